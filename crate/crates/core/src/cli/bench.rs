// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Wall-clock scaling of contraction, back-propagation, gradient assembly,
//! recompression and transfer-tensor propagation on synthetic inputs.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::commands::write_rows;
use super::config::BenchConfig;
use crate::control::{backpropagate, gradient_wrt_propagators, terminal_costate};
use crate::error::{Error, Result};
use crate::liouville::{DensityVec, SuperOp};
use crate::ptmpo::ProcessTensor;
use crate::ttm::TransferTensorSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Forward,
    Backward,
    Gradient,
    Recompress,
    Ttm,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Forward => "forward",
            Phase::Backward => "backward",
            Phase::Gradient => "gradient",
            Phase::Recompress => "recompress",
            Phase::Ttm => "ttm",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Timing {
    pub phase: Phase,
    /// Bond dimension, or cutoff for the transfer tensor phase.
    pub size: usize,
    pub median_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Slope {
    pub phase: Phase,
    pub slope: f64,
    pub min_size: usize,
    pub max_size: usize,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub timings: Vec<Timing>,
    pub slopes: Vec<Slope>,
}

impl BenchReport {
    pub fn slope(&self, phase: Phase) -> Option<f64> {
        self.slopes.iter().find(|s| s.phase == phase).map(|s| s.slope)
    }

    /// `bench.csv` with `phase,size,median_seconds` and `bench_slopes.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .timings
            .iter()
            .map(|t| vec![t.phase.name().into(), t.size.to_string(), format!("{}", t.median_seconds)])
            .collect();
        write_rows(&dir.join("bench.csv"), &["phase".into(), "size".into(), "median_seconds".into()], &rows)?;
        let rows: Vec<Vec<String>> = self
            .slopes
            .iter()
            .map(|s| vec![s.phase.name().into(), format!("{}", s.slope), s.min_size.to_string(), s.max_size.to_string()])
            .collect();
        write_rows(
            &dir.join("bench_slopes.csv"),
            &["phase".into(), "slope".into(), "min_size".into(), "max_size".into()],
            &rows,
        )
    }
}

/// Median wall time of `repeats` runs.
pub fn median_time(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        f()?;
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn random_unitary_like(l: usize, rng: &mut ChaCha8Rng) -> SuperOp {
    let scale = 1.0 / (l as f64).sqrt();
    SuperOp {
        data: Array2::from_shape_simple_fn((l, l), || {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im) * scale
        }),
    }
}

/// Random transfer tensors with `1/m` decay, drawn from stream `seed`.
pub fn random_transfer_set(system_dim: usize, cutoff: usize, seed: u64) -> TransferTensorSet {
    let l = system_dim * system_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = (0..cutoff)
        .map(|m| {
            let mut t = random_unitary_like(l, &mut rng);
            t.data.mapv_inplace(|z| z * (0.5 / (1.0 + m as f64)));
            t
        })
        .collect();
    TransferTensorSet { tensors, dt: 1.0, propagator: SuperOp::identity(l) }
}

fn check(cfg: &BenchConfig) -> Result<()> {
    let bad = |m: &str| Err(Error::Config(m.into()));
    if cfg.chis.len() < 2 && cfg.ttm_cutoffs.len() < 2 {
        return bad("bench needs at least two bond dimensions or two cutoffs");
    }
    if cfg.chis.iter().chain(&cfg.ttm_cutoffs).any(|&c| c == 0) {
        return bad("bench sizes must be positive");
    }
    if cfg.steps < 3 || cfg.system_dim < 2 || cfg.ttm_system_dim < 2 || cfg.repeats == 0 {
        return bad("bench needs steps >= 3, system dimensions >= 2 and repeats >= 1");
    }
    if cfg.ttm_cutoffs.iter().any(|&c| c > cfg.ttm_steps) {
        return bad("ttm cutoffs must not exceed ttm_steps");
    }
    Ok(())
}

/// Times every phase. Random process tensors for bond `chi` use seed
/// `seed + chi`; transfer tensors for cutoff `c` use `seed + c`.
pub fn run_bench(cfg: &BenchConfig, seed: u64) -> Result<BenchReport> {
    check(cfg)?;
    let mut report = BenchReport::default();
    let l = cfg.system_dim * cfg.system_dim;
    for &chi in &cfg.chis {
        let pt = ProcessTensor::random(cfg.steps, cfg.system_dim, chi, 1.0, seed.wrapping_add(chi as u64), false)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(chi as u64));
        rng.set_stream(1);
        let props: Vec<SuperOp> = (0..cfg.steps).map(|_| random_unitary_like(l, &mut rng)).collect();
        let rho0 = DensityVec::maximally_mixed(cfg.system_dim);
        let target = DensityVec::basis(cfg.system_dim, 0);
        let lam = terminal_costate(&target, cfg.steps);
        let forward = median_time(cfg.repeats, || pt.contract_forward(&props, &rho0).map(|_| ()))?;
        let backward = median_time(cfg.repeats, || backpropagate(&pt, &props, &lam).map(|_| ()))?;
        let (_, states) = pt.contract_forward(&props, &rho0)?;
        let costates = backpropagate(&pt, &props, &lam)?;
        let gradient = median_time(cfg.repeats, || gradient_wrt_propagators(&states, &costates, &pt).map(|_| ()))?;
        let recompress = median_time(cfg.repeats, || pt.recompress(1e-14).map(|_| ()))?;
        log::info!("chi {chi}: forward {forward:.3e}s backward {backward:.3e}s gradient {gradient:.3e}s recompress {recompress:.3e}s");
        for (phase, t) in [
            (Phase::Forward, forward),
            (Phase::Backward, backward),
            (Phase::Gradient, gradient),
            (Phase::Recompress, recompress),
        ] {
            report.timings.push(Timing { phase, size: chi, median_seconds: t });
        }
    }
    let rho0 = DensityVec::maximally_mixed(cfg.ttm_system_dim);
    for &c in &cfg.ttm_cutoffs {
        let set = random_transfer_set(cfg.ttm_system_dim, c, seed.wrapping_add(c as u64));
        let t = median_time(cfg.repeats, || set.propagate(&rho0, cfg.ttm_steps).map(|_| ()))?;
        log::info!("ttm cutoff {c}: {t:.3e}s");
        report.timings.push(Timing { phase: Phase::Ttm, size: c, median_seconds: t });
    }
    for phase in [Phase::Forward, Phase::Backward, Phase::Gradient, Phase::Recompress, Phase::Ttm] {
        let min = if phase == Phase::Recompress { cfg.large_chi } else { 0 };
        let pts: Vec<(f64, f64)> = report
            .timings
            .iter()
            .filter(|t| t.phase == phase && t.size >= min)
            .map(|t| (t.size as f64, t.median_seconds))
            .collect();
        if pts.len() >= 2 {
            let sizes = report.timings.iter().filter(|t| t.phase == phase && t.size >= min).map(|t| t.size);
            report.slopes.push(Slope {
                phase,
                slope: log_log_slope(&pts),
                min_size: sizes.clone().min().unwrap_or(0),
                max_size: sizes.max().unwrap_or(0),
            });
        }
    }
    Ok(report)
}
