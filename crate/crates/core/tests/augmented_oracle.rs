// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

use ptmpo::augmented::{augmented_pt, AuxMode, AuxiliaryModel};
use ptmpo::bath::{BathCorrelation, SpectralDensity};
use ptmpo::heom::{build_generator, heom_pt, DEFAULT_AUX_CEILING};
use ptmpo::linalg;
use ptmpo::liouville::{
    hamiltonian_superop, lindblad_superop, step_propagator, DensityVec, QOperator, SuperOp,
};

fn spin_boson_props(dt: f64, steps: usize) -> Vec<SuperOp> {
    let u = step_propagator(&hamiltonian_superop(&QOperator::sigma_x().scaled(0.5)), dt).unwrap();
    vec![u; steps]
}

#[test]
fn pseudomode_matches_heom_on_exact_lorentzian() {
    let (coupling, center, width) = (0.5, 1.0, 1.0);
    let (dt, steps) = (0.05, 100);
    let s = QOperator::sigma_z().scaled(0.5);
    let props = spin_boson_props(dt, steps);
    let rho0 = DensityVec::basis(2, 0);

    let j = SpectralDensity::lorentzian(coupling, center, width).unwrap();
    let model = AuxiliaryModel::from_lorentzian(&j, 8).unwrap();
    let pm = augmented_pt(&model, &s, dt, steps).unwrap().propagate(&props, &rho0).unwrap();

    let corr = BathCorrelation::lorentzian_exact(coupling, center, width).unwrap();
    let gen = build_generator(&corr, &s, 10, DEFAULT_AUX_CEILING).unwrap();
    let heom = heom_pt(&gen, dt, steps).unwrap().propagate(&props, &rho0).unwrap();

    let dev = linalg::vec_max_abs_diff(&pm.data, &heom.data);
    eprintln!("pseudomode vs hierarchy final-state deviation {dev:.3e}");
    assert!(dev <= 1e-3, "final-state deviation {dev:.3e}");
}

#[test]
fn broad_mode_approaches_lindblad_limit() {
    // Fixed weight, width 50 times the system frequency.
    let (coupling, center, width) = (1.0, 0.0, 50.0);
    let (dt, steps) = (0.05, 200);
    let s = QOperator::sigma_z().scaled(0.5);
    let props = spin_boson_props(dt, steps);
    let rho0 = DensityVec::basis(2, 0);
    let model = AuxiliaryModel::new(vec![AuxMode { g: coupling, omega0: center, kappa: width, d: 4 }]).unwrap();
    let traj = augmented_pt(&model, &s, dt, steps).unwrap().trajectory(&props, &rho0).unwrap();

    // Born-Markov rate from the integrated correlation g^2 / (kappa/2 + i omega0).
    let gamma = num_complex::Complex64::new(coupling * coupling, 0.0)
        / num_complex::Complex64::new(0.5 * width, center);
    let lind = lindblad_superop(&[s.clone()], &[2.0 * gamma.re]).unwrap();
    let gen = &hamiltonian_superop(&QOperator::sigma_x().scaled(0.5)) + &lind;
    let u = step_propagator(&gen, dt).unwrap();
    let mut oracle = rho0.clone();
    let mut worst: f64 = 0.0;
    for r in traj.iter().skip(1) {
        oracle = u.apply(&oracle);
        for op in [QOperator::sigma_x(), QOperator::sigma_y(), QOperator::sigma_z()] {
            worst = worst.max((r.expectation(&op).re - oracle.expectation(&op).re).abs());
        }
    }
    eprintln!("deviation from the Markov limit {worst:.3e}");
    assert!(worst <= 1e-2, "deviation from the Markov limit {worst:.3e}");
}

#[test]
fn fock_truncation_converges_under_doubling() {
    let j = SpectralDensity::lorentzian(0.5, 1.0, 1.0).unwrap();
    let (dt, steps) = (0.05, 100);
    let s = QOperator::sigma_z().scaled(0.5);
    let props = spin_boson_props(dt, steps);
    let rho0 = DensityVec::basis(2, 0);
    let observe = |d: usize| -> Option<Vec<f64>> {
        let model = AuxiliaryModel::from_lorentzian(&j, d).unwrap();
        let pt = augmented_pt(&model, &s, dt, steps).ok()?;
        let traj = pt.trajectory(&props, &rho0).unwrap();
        Some(traj.iter().map(|r| r.expectation(&QOperator::sigma_z()).re).collect())
    };
    let mut converged = None;
    for d in 2..12 {
        let (Some(a), Some(b)) = (observe(d), observe(d + 2)) else { continue };
        let change = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if change < 1e-5 {
            converged = Some(d);
            break;
        }
    }
    let d = converged.expect("no truncation below 12 converged");
    eprintln!("smallest converged Fock truncation: d = {d}");
    assert!(d <= 8);
}

#[test]
fn short_memory_recompresses_below_auxiliary_dimension() {
    let model = AuxiliaryModel::new(vec![AuxMode { g: 0.5, omega0: 1.0, kappa: 5.0, d: 4 }]).unwrap();
    let s = QOperator::sigma_z().scaled(0.5);
    let (dt, steps) = (0.1, 40);
    let pt = augmented_pt(&model, &s, dt, steps).unwrap();
    let (small, report) = pt.recompress(1e-7).unwrap();
    eprintln!("profile after recompression: {:?}", report.profile_after);
    assert!(small.max_bond() < model.liouville_dim());
    let props = spin_boson_props(dt, steps);
    let rho0 = DensityVec::basis(2, 0);
    let a = pt.propagate(&props, &rho0).unwrap();
    let b = small.propagate(&props, &rho0).unwrap();
    assert!(linalg::vec_max_abs_diff(&a.data, &b.data) <= report.deviation_bound(&props, &rho0) + 1e-12);
}
