// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

use ndarray::array;
use num_complex::Complex64 as C64;
use ptmpo::bath::{correlation_samples, fit_exponentials, FitMode, FitOptions, SpectralDensity};
use ptmpo::heom::{build_generator, heom_pt, DEFAULT_AUX_CEILING};
use ptmpo::liouville::{hamiltonian_superop, step_propagator, DensityVec, QOperator, SuperOp};
use ptmpo::stochastic::{batch_estimate, sample_noise, stochastic_pt};

fn minus_state() -> DensityVec {
    let h = C64::new(0.5, 0.0);
    DensityVec::new(array![h, -h, -h, h])
}

fn ohmic_grid(alpha: f64, dt: f64, steps: usize) -> Vec<C64> {
    (0..steps).map(|k| 2.0 * alpha / C64::new(1.0, k as f64 * dt).powi(2)).collect()
}

#[test]
fn independent_boson_within_three_standard_errors() {
    let (dt, steps, n) = (0.05, 60, 10_000);
    let e = sample_noise(&ohmic_grid(0.1, dt, steps), n, dt, steps, 2024).unwrap();
    let s = QOperator::sigma_z().scaled(0.5);
    let props = vec![SuperOp::identity(4); steps];
    let (mean, err) = batch_estimate(&e, &s, &props, &minus_state(), &QOperator::sigma_x(), 20).unwrap();
    let target = -10f64.powf(-0.1);
    assert!((target + 0.7943).abs() < 1e-4);
    let dev = (mean[steps] - target).abs();
    assert!(dev <= 3.0 * err[steps], "mean {} target {target} stderr {}", mean[steps], err[steps]);

    // The full-ensemble process tensor reproduces the batch mean.
    let pt = stochastic_pt(&e, &s, dt).unwrap();
    let full = pt.propagate(&props, &minus_state()).unwrap().expectation(&QOperator::sigma_x()).re;
    assert!((full - mean[steps]).abs() < 1e-12);
}

/// RMS deviation from the reference over replicas and time points.
fn rms_error(n: usize, replicas: usize, reference: &[f64], props: &[SuperOp], dt: f64) -> f64 {
    let steps = props.len();
    let s = QOperator::sigma_z().scaled(0.5);
    let grid = correlation_samples(&SpectralDensity::ohmic(0.1, 1.0).unwrap(), 0.0, dt * (steps - 1) as f64, steps)
        .unwrap()
        .into_iter()
        .map(|(_, c)| c)
        .collect::<Vec<C64>>();
    let mut acc = 0.0;
    let mut count = 0.0;
    for r in 0..replicas {
        let e = sample_noise(&grid, n, dt, steps, 1000 + r as u64).unwrap();
        let pt = stochastic_pt(&e, &s, dt).unwrap();
        let traj = pt.trajectory(props, &minus_state()).unwrap();
        for (k, rho) in traj.iter().enumerate().skip(1) {
            let d = rho.expectation(&QOperator::sigma_x()).re - reference[k];
            acc += d * d;
            count += 1.0;
        }
    }
    (acc / count).sqrt()
}

#[test]
fn monte_carlo_error_scales_as_inverse_square_root() {
    let (dt, steps) = (0.05, 40);
    let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
    let samples = correlation_samples(&j, 0.0, 8.0, 161).unwrap();
    let opts = FitOptions { mode: FitMode::Joint, ..FitOptions::default() };
    let (corr, _) = fit_exponentials(&samples, 4, &opts).unwrap();
    let gen = build_generator(&corr, &QOperator::sigma_z().scaled(0.5), 6, DEFAULT_AUX_CEILING).unwrap();
    let u = step_propagator(&hamiltonian_superop(&QOperator::sigma_x().scaled(0.5)), dt).unwrap();
    let props = vec![u; steps];
    let reference: Vec<f64> = heom_pt(&gen, dt, steps)
        .unwrap()
        .trajectory(&props, &minus_state())
        .unwrap()
        .iter()
        .map(|r| r.expectation(&QOperator::sigma_x()).re)
        .collect();
    let errs: Vec<f64> = [100, 1_000, 10_000].iter().map(|&n| rms_error(n, 8, &reference, &props, dt)).collect();
    eprintln!("rms errors {errs:?}");
    let ideal = 10f64.sqrt();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio >= ideal / 2.0 && ratio <= ideal * 2.0, "errors {errs:?}");
    }
}
