// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Stochastic Liouville–von Neumann unravelling of a Gaussian bath.
//!
//! Two complex fields `xi_k`, `nu_k` are sampled per step with
//! `<xi_k xi_l> = Re C((k-l) dt)`, `<xi_k nu_l> = 2i theta(k-l) Im C((k-l) dt)`
//! and `<nu_k nu_l> = 0`, where `theta(0) = 1/2`. Each trajectory evolves under
//! `exp(dt (i xi_k C[S] + (i/2) nu_k A[S]))` between system steps, and the
//! process tensor is the empirical average over trajectories.

use std::sync::Arc;

use ndarray::{Array1, Array2, Array3, Axis};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, kron, I, ONE};
use crate::liouville::{anticommutator, commutator, DensityVec, QOperator, SuperOp};
use crate::ptmpo::{ProcessTensor, PtNode};

/// Default per-trajectory norm ceiling, relative to the initial norm.
pub const DEFAULT_NORM_CEILING: f64 = 1e3;

/// Relative tolerance on the clipped negative spectrum of `Re C`.
const FACTOR_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    pub xi: Array1<C64>,
    pub nu: Array1<C64>,
    pub index: usize,
}

#[derive(Clone, Debug)]
pub struct NoiseEnsemble {
    pub realizations: Vec<NoiseRealization>,
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
}

impl NoiseEnsemble {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    /// Sub-ensemble over a contiguous range of trajectories.
    pub fn batch(&self, range: std::ops::Range<usize>) -> NoiseEnsemble {
        NoiseEnsemble {
            realizations: self.realizations[range].to_vec(),
            seed: self.seed,
            dt: self.dt,
            steps: self.steps,
        }
    }
}

/// Linear maps from i.i.d. real normals `(w, a, b)` to the fields:
/// `xi = P w + H (a - i b)`, `nu = d (a + i b)`.
#[derive(Clone, Debug)]
struct NoiseFactor {
    p: Array2<f64>,
    h: Array2<C64>,
    d: Array1<f64>,
}

fn noise_factor(c_grid: &[C64], steps: usize) -> Result<NoiseFactor> {
    let lag = |k: usize, l: usize| -> C64 {
        let m = k.abs_diff(l);
        if m < c_grid.len() {
            c_grid[m]
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let a = Array2::from_shape_fn((steps, steps), |(k, l)| lag(k, l).re);
    let g = Array2::from_shape_fn((steps, steps), |(k, l)| {
        let th = match k.cmp(&l) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Less => 0.0,
        };
        2.0 * I * th * lag(k, l).im
    });
    let (evals, evecs) = a.eigh(UPLO::Lower)?;
    let scale = evals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let negative = evals.iter().fold(0.0f64, |m, &v| m.max(-v));
    if negative > FACTOR_TOL * scale.max(f64::MIN_POSITIVE) && negative > 1e-300 {
        return Err(Error::NoiseFactorization { residual: negative / scale });
    }
    let root = evals.mapv(|v| v.max(0.0).sqrt());
    let p = (&evecs * &root.insert_axis(Axis(0))).dot(&evecs.t());
    let d = Array1::from_shape_fn(steps, |l| (g.column(l).iter().map(|z| z.norm()).sum::<f64>() / 2.0).sqrt());
    let h = Array2::from_shape_fn((steps, steps), |(k, l)| {
        if d[l] > 0.0 {
            g[[k, l]] / (2.0 * d[l])
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(NoiseFactor { p, h, d })
}

fn draw(f: &NoiseFactor, seed: u64, index: usize) -> NoiseRealization {
    let steps = f.d.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut normals = |n: usize| -> Array1<f64> {
        Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng))
    };
    let w = normals(steps);
    let a = normals(steps);
    let b = normals(steps);
    let minus = Array1::from_shape_fn(steps, |l| C64::new(a[l], -b[l]));
    let xi = f.p.dot(&w).mapv(|x| C64::new(x, 0.0)) + f.h.dot(&minus);
    let nu = Array1::from_shape_fn(steps, |l| C64::new(a[l], b[l]) * f.d[l]);
    NoiseRealization { xi, nu, index }
}

/// Samples `n_traj` field realizations on a grid of `steps` steps.
///
/// `c_grid[m]` is the bath correlation at lag `m dt`; lags beyond its length are zero.
pub fn sample_noise(c_grid: &[C64], n_traj: usize, dt: f64, steps: usize, seed: u64) -> Result<NoiseEnsemble> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("at least one trajectory is required".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if c_grid.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { step: 0, what: "correlation samples".into() });
    }
    let f = noise_factor(c_grid, steps)?;
    let realizations = (0..n_traj).into_par_iter().map(|i| draw(&f, seed, i)).collect();
    Ok(NoiseEnsemble { realizations, seed, dt, steps })
}

/// Diagonalization of the coupling used to exponentiate the noise superoperator.
enum CouplingBasis {
    /// Eigenvalues and a unitary change of Liouville basis (`None` when `S` is diagonal).
    Spectral { s: Array1<f64>, p: Option<Array2<C64>> },
    General { comm: Array2<C64>, anti: Array2<C64> },
}

impl CouplingBasis {
    fn new(s_op: &QOperator) -> Result<Self> {
        if s_op.is_diagonal() && s_op.data.diag().iter().all(|z| z.im == 0.0) {
            return Ok(CouplingBasis::Spectral { s: s_op.data.diag().mapv(|z| z.re), p: None });
        }
        if s_op.is_hermitian() {
            let (s, v) = linalg::hermitian_eig(&s_op.data.view())?;
            let p = kron(&v.mapv(|z| z.conj()).view(), &v.view());
            return Ok(CouplingBasis::Spectral { s, p: Some(p) });
        }
        Ok(CouplingBasis::General { comm: commutator(s_op).data, anti: anticommutator(s_op).data })
    }

    fn step(&self, xi: C64, nu: C64, dt: f64) -> Result<Array2<C64>> {
        match self {
            CouplingBasis::Spectral { s, p } => {
                let n = s.len();
                let diag = Array1::from_shape_fn(n * n, |idx| {
                    let (i, j) = (idx % n, idx / n);
                    (dt * (I * xi * (s[i] - s[j]) + 0.5 * I * nu * (s[i] + s[j]))).exp()
                });
                Ok(match p {
                    None => Array2::from_diag(&diag),
                    Some(p) => {
                        let scaled = p * &diag.insert_axis(Axis(0));
                        scaled.dot(&p.t().mapv(|z| z.conj()))
                    }
                })
            }
            CouplingBasis::General { comm, anti } => {
                let gen = comm.mapv(|z| z * I * xi * dt) + anti.mapv(|z| z * 0.5 * I * nu * dt);
                linalg::expm(&gen.view())
            }
        }
    }
}

/// Per-step noise propagators `U_SB,k` of one trajectory.
pub fn trajectory_propagators(noise: &NoiseRealization, s_op: &QOperator, dt: f64) -> Result<Vec<SuperOp>> {
    if noise.xi.len() != noise.nu.len() {
        return Err(Error::Dimension(format!(
            "xi has {} steps but nu has {}",
            noise.xi.len(),
            noise.nu.len()
        )));
    }
    let basis = CouplingBasis::new(s_op)?;
    noise
        .xi
        .iter()
        .zip(noise.nu.iter())
        .map(|(&x, &n)| SuperOp::new(basis.step(x, n, dt)?))
        .collect()
}

/// Stacked propagators `[k, mu, nu]` for one trajectory, with the norm check applied.
fn checked_maps(
    noise: &NoiseRealization,
    basis: &CouplingBasis,
    l: usize,
    dt: f64,
    ceiling: f64,
) -> Result<Array3<C64>> {
    let steps = noise.xi.len();
    let s = (l as f64).sqrt().round() as usize;
    let mut maps = Array3::<C64>::zeros((steps, l, l));
    let mut probe = DensityVec::maximally_mixed(s).data;
    let initial = probe.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for k in 0..steps {
        let u = basis.step(noise.xi[k], noise.nu[k], dt)?;
        probe = u.dot(&probe);
        let ratio = probe.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / initial;
        if !(ratio <= ceiling) {
            return Err(Error::TrajectoryDiverged { index: noise.index, step: k + 1, ratio, ceiling });
        }
        maps.index_axis_mut(Axis(0), k).assign(&u);
    }
    Ok(maps)
}

/// [`stochastic_pt_with_ceiling`] with the default norm ceiling.
pub fn stochastic_pt(ensemble: &NoiseEnsemble, s_op: &QOperator, dt: f64) -> Result<ProcessTensor> {
    stochastic_pt_with_ceiling(ensemble, s_op, dt, DEFAULT_NORM_CEILING)
}

/// Empirical-average process tensor with one bond index per trajectory.
///
/// Any trajectory whose Liouville norm grows beyond `ceiling` times its initial
/// value aborts construction.
pub fn stochastic_pt_with_ceiling(
    ensemble: &NoiseEnsemble,
    s_op: &QOperator,
    dt: f64,
    ceiling: f64,
) -> Result<ProcessTensor> {
    if ensemble.is_empty() {
        return Err(Error::InvalidParameter("noise ensemble is empty".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if !(ceiling > 1.0) {
        return Err(Error::InvalidParameter(format!("norm ceiling must exceed 1, got {ceiling}")));
    }
    let steps = ensemble.steps;
    if let Some(r) = ensemble.realizations.iter().find(|r| r.xi.len() != steps || r.nu.len() != steps) {
        return Err(Error::Dimension(format!("trajectory {} does not have {steps} steps", r.index)));
    }
    let n = ensemble.len();
    let sdim = s_op.dim();
    let l = sdim * sdim;
    let basis = CouplingBasis::new(s_op)?;
    let per_traj: Vec<Array3<C64>> = ensemble
        .realizations
        .par_iter()
        .map(|r| checked_maps(r, &basis, l, dt, ceiling))
        .collect::<Result<_>>()?;

    let weight = 1.0 / n as f64;
    let mut nodes = Vec::with_capacity(steps);
    if steps == 1 {
        let mut avg = Array2::<C64>::zeros((l, l));
        for m in &per_traj {
            avg.scaled_add(ONE * weight, &m.index_axis(Axis(0), 0));
        }
        nodes.push(Arc::new(PtNode::dense(1, 1, l, avg)?));
    } else if steps > 1 {
        let mut first = Array2::<C64>::zeros((n * l, l));
        let mut last = Array2::<C64>::zeros((l, n * l));
        for (i, m) in per_traj.iter().enumerate() {
            first
                .slice_mut(ndarray::s![i * l..(i + 1) * l, ..])
                .assign(&m.index_axis(Axis(0), 0).mapv(|z| z * weight));
            last.slice_mut(ndarray::s![.., i * l..(i + 1) * l]).assign(&m.index_axis(Axis(0), steps - 1));
        }
        nodes.push(Arc::new(PtNode::dense(n, 1, l, first)?));
        for k in 1..steps - 1 {
            let mut maps = Array3::<C64>::zeros((n, l, l));
            for (i, m) in per_traj.iter().enumerate() {
                maps.index_axis_mut(Axis(0), i).assign(&m.index_axis(Axis(0), k));
            }
            nodes.push(Arc::new(PtNode::bond_diagonal(maps)?));
        }
        nodes.push(Arc::new(PtNode::dense(1, n, l, last)?));
    }
    let mut caps = Vec::with_capacity(steps + 1);
    caps.push(Array1::from_elem(1, ONE));
    for _ in 1..steps {
        caps.push(Array1::from_elem(n, ONE));
    }
    if steps > 0 {
        caps.push(Array1::from_elem(1, ONE));
    }
    ProcessTensor::new(
        nodes,
        dt,
        sdim,
        Some(caps),
        format!("stochastic(n_traj={n},seed={})", ensemble.seed),
    )
}

/// Batch-mean estimate of `<op>` along the trajectory.
///
/// The ensemble is split into `batches` contiguous groups; each group yields its
/// own process tensor. Returns the mean and the standard error at every step.
pub fn batch_estimate(
    ensemble: &NoiseEnsemble,
    s_op: &QOperator,
    props: &[SuperOp],
    rho0: &DensityVec,
    op: &QOperator,
    batches: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if batches < 2 || batches > ensemble.len() {
        return Err(Error::InvalidParameter(format!(
            "need between 2 and {} batches, got {batches}",
            ensemble.len()
        )));
    }
    let n = ensemble.len();
    let per = n / batches;
    let mut values = Vec::with_capacity(batches);
    for b in 0..batches {
        let hi = if b + 1 == batches { n } else { (b + 1) * per };
        let pt = stochastic_pt(&ensemble.batch(b * per..hi), s_op, ensemble.dt)?;
        let traj = pt.trajectory(props, rho0)?;
        values.push(traj.iter().map(|r| r.expectation(op).re).collect::<Vec<f64>>());
    }
    let steps = values[0].len();
    let nb = batches as f64;
    let mut mean = vec![0.0; steps];
    let mut err = vec![0.0; steps];
    for k in 0..steps {
        let m = values.iter().map(|v| v[k]).sum::<f64>() / nb;
        let var = values.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (nb - 1.0);
        mean[k] = m;
        err[k] = (var / nb).sqrt();
    }
    Ok((mean, err))
}
