// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use ptmpo::bath::{correlation_samples, BathCorrelation, fit_exponentials, FitMode, FitOptions, SpectralDensity};
use ptmpo::heom::{build_generator, heom_pt, heom_solve, ExtendedGenerator, DEFAULT_AUX_CEILING};
use ptmpo::linalg;
use ptmpo::liouville::{hamiltonian_superop, step_propagator, DensityVec, QOperator, SuperOp};
use ptmpo::ttm::{extract, maps_from_pt, DynamicalMapSeq, TransferTensorSet};

const DT: f64 = 0.1;

fn generator() -> ExtendedGenerator {
    let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
    let samples = correlation_samples(&j, 0.0, 8.0, 161).unwrap();
    let opts = FitOptions { mode: FitMode::Joint, ..FitOptions::default() };
    let (corr, _) = fit_exponentials(&samples, 4, &opts).unwrap();
    build_generator(&corr, &QOperator::sigma_z().scaled(0.5), 4, DEFAULT_AUX_CEILING).unwrap()
}

fn system_step() -> SuperOp {
    step_propagator(&hamiltonian_superop(&QOperator::sigma_x().scaled(0.5)), DT).unwrap()
}

fn heom_maps(steps: usize) -> (ExtendedGenerator, DynamicalMapSeq) {
    let gen = generator();
    let pt = heom_pt(&gen, DT, steps).unwrap();
    let maps = maps_from_pt(&pt, &system_step()).unwrap();
    (gen, maps)
}

#[test]
fn first_map_matches_direct_solver() {
    let (gen, maps) = heom_maps(3);
    let u = system_step();
    let mut direct = Array2::<C64>::zeros((4, 4));
    for j in 0..4 {
        let mut e = Array1::zeros(4);
        e[j] = linalg::ONE;
        let traj = heom_solve(&gen, &[u.clone()], &DensityVec::new(e), DT).unwrap();
        direct.column_mut(j).assign(&traj[1].data);
    }
    let dev = linalg::max_abs_diff(&maps.maps[0].data.view(), &direct.view());
    assert!(dev <= 1e-12, "deviation {dev:.3e}");
}

#[test]
fn heom_memory_decays_and_truncation_converges() {
    // Exponentially decaying bath with a step comparable to its memory.
    let dt = 0.5;
    let k = 40;
    let corr = BathCorrelation::lorentzian_exact(0.5, 0.0, 4.0).unwrap();
    let gen = build_generator(&corr, &QOperator::sigma_z().scaled(0.5), 8, DEFAULT_AUX_CEILING).unwrap();
    let u = step_propagator(&hamiltonian_superop(&QOperator::sigma_x().scaled(0.5)), dt).unwrap();
    let maps = maps_from_pt(&heom_pt(&gen, dt, k).unwrap(), &u).unwrap();
    let full = extract(&maps, k).unwrap();
    let norms = full.norm_profile();
    let memory = full.memory_time(1e-3).expect("memory does not decay within the training horizon");
    eprintln!("transfer tensor memory time: {memory} steps ({:.2} time units)", memory as f64 * dt);
    eprintln!("norms 1..8: {:?}", &norms[..8]);
    assert!(norms[memory..].iter().all(|n| *n < 1e-3 * norms[0]));
    assert!(norms[memory..].windows(2).all(|w| w[1] <= w[0] * 1.5 + 1e-15));
    assert_eq!(memory, 4);

    let rho0 = DensityVec::basis(2, 0);
    let horizon = 4 * k;
    let reference = full.propagate(&rho0, horizon).unwrap();
    let deviation = |c: usize| -> f64 {
        let t = full.truncated(c).unwrap().propagate(&rho0, horizon).unwrap();
        t.iter().zip(&reference).map(|(a, b)| linalg::vec_max_abs_diff(&a.data, &b.data)).fold(0.0, f64::max)
    };
    let sweep: Vec<(usize, f64)> = (1..=2 * memory).map(|c| (c, deviation(c))).collect();
    eprintln!("cutoff sweep: {sweep:?}");
    let at_memory = sweep[memory - 1].1;
    assert!(at_memory <= 1e-2, "deviation at the memory time {at_memory:.3e}");
    for w in sweep.windows(2) {
        assert!(w[1].1 <= w[0].1, "deviation not decreasing: {sweep:?}");
    }
}

#[test]
fn propagation_is_linear() {
    let (_, maps) = heom_maps(30);
    let tts = extract(&maps, 20).unwrap();
    let a = DensityVec::basis(2, 0);
    let b = DensityVec::new(Array1::from(vec![C64::new(0.5, 0.0), C64::new(0.2, 0.4), C64::new(0.2, -0.4), C64::new(0.5, 0.0)]));
    let (x, y) = (C64::new(0.3, -1.2), C64::new(-0.7, 0.1));
    let mix = DensityVec::new(&a.data * x + &b.data * y);
    let ta = tts.propagate(&a, 90).unwrap();
    let tb = tts.propagate(&b, 90).unwrap();
    let tm = tts.propagate(&mix, 90).unwrap();
    for k in 0..=90 {
        let want = &ta[k].data * x + &tb[k].data * y;
        assert!(linalg::vec_max_abs_diff(&tm[k].data, &want) <= 1e-10);
    }
}

fn random_set(s: usize, cutoff: usize) -> TransferTensorSet {
    let l = s * s;
    let tensors = (0..cutoff)
        .map(|m| {
            let decay = 0.5 / (1.0 + m as f64);
            SuperOp {
                data: Array2::from_shape_fn((l, l), |(a, b)| {
                    let x = ((a * 31 + b * 17 + m * 7) % 13) as f64 / 13.0 - 0.5;
                    C64::new(decay * x / l as f64, 0.0)
                }),
            }
        })
        .collect();
    TransferTensorSet { tensors, dt: DT, propagator: SuperOp::identity(l) }
}

#[test]
fn step_cost_grows_linearly_with_cutoff() {
    let steps = 2048;
    let rho0 = DensityVec::maximally_mixed(4);
    let cutoffs = [8usize, 16, 32, 64, 128, 256];
    let times: Vec<f64> = cutoffs
        .iter()
        .map(|&c| {
            let set = random_set(4, c);
            let mut runs: Vec<f64> = (0..5)
                .map(|_| {
                    let t0 = Instant::now();
                    set.propagate(&rho0, steps).unwrap();
                    t0.elapsed().as_secs_f64()
                })
                .collect();
            runs.sort_by(f64::total_cmp);
            runs[2]
        })
        .collect();
    let xs: Vec<f64> = cutoffs.iter().map(|c| (*c as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    eprintln!("per-step cost slope in the cutoff: {slope:.3} (times {times:?})");
    assert!((0.7..=1.3).contains(&slope), "slope {slope:.3}");
}
