// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Spectral densities, bath correlation functions, exponential fits and mode
//! discretizations.
//!
//! The correlation function is `C(t) = <X(t) X(0)>`; at zero temperature
//! `C(t) = int J(w) exp(-i w t) dw`. Exponential series use the convention
//! `C(t) = sum_j alpha_j exp(i gamma_j t)` with `Im gamma_j > 0`, and the
//! conjugate `C(t)^*` is expanded over the same exponents with coefficients
//! `alpha_tilde_j`.

use std::path::Path;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, LeastSquaresSvd, Solve, SVD};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::quad::{fourier_tail, integrate, QuadOptions};

#[derive(Clone, Debug, PartialEq)]
pub enum SpectralDensity {
    /// `J(w) = 2 alpha w exp(-w / w_c)` for `w > 0`.
    OhmicExp { alpha: f64, cutoff: f64 },
    /// Lorentzian of total weight `coupling^2` centred at `center` with FWHM `width`,
    /// defined on the whole real axis.
    Lorentzian { coupling: f64, center: f64, width: f64 },
    /// Linear interpolation between samples, zero outside the sampled range.
    Tabulated { omega: Vec<f64>, values: Vec<f64> },
}

impl SpectralDensity {
    pub fn ohmic(alpha: f64, cutoff: f64) -> Result<Self> {
        let j = SpectralDensity::OhmicExp { alpha, cutoff };
        j.validate()?;
        Ok(j)
    }

    pub fn lorentzian(coupling: f64, center: f64, width: f64) -> Result<Self> {
        let j = SpectralDensity::Lorentzian { coupling, center, width };
        j.validate()?;
        Ok(j)
    }

    pub fn tabulated(omega: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let j = SpectralDensity::Tabulated { omega, values };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::OhmicExp { alpha, cutoff } => {
                if !(*alpha > 0.0 && alpha.is_finite()) || !(*cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "ohmic bath needs alpha > 0 and cutoff > 0 (got {alpha}, {cutoff})"
                    )));
                }
            }
            SpectralDensity::Lorentzian { coupling, center, width } => {
                if !coupling.is_finite() || !center.is_finite() || !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "Lorentzian bath needs finite coupling/center and width > 0 (got {coupling}, {center}, {width})"
                    )));
                }
            }
            SpectralDensity::Tabulated { omega, values } => {
                if omega.len() != values.len() || omega.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "tabulated spectral density needs at least two (w, J) pairs".into(),
                    ));
                }
                if omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter(
                        "tabulated frequencies must be strictly increasing".into(),
                    ));
                }
                if omega.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite tabulated entry".into()));
                }
                if omega.iter().zip(values).any(|(w, j)| *w > 0.0 && *j < 0.0) {
                    return Err(Error::InvalidParameter(
                        "spectral density must be nonnegative for w > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Two-column CSV of `(w, J)`; a non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut omega = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if rec.len() < 2 {
                return Err(Error::Config(format!("{}: row {} has fewer than two columns", path.display(), row + 1)));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(w), Ok(j)) => {
                    omega.push(w);
                    values.push(j);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Config(format!(
                        "{}: row {} is not numeric",
                        path.display(),
                        row + 1
                    )))
                }
            }
        }
        Self::tabulated(omega, values)
    }

    pub fn density(&self, w: f64) -> f64 {
        match self {
            SpectralDensity::OhmicExp { alpha, cutoff } => {
                if w > 0.0 {
                    2.0 * alpha * w * (-w / cutoff).exp()
                } else {
                    0.0
                }
            }
            SpectralDensity::Lorentzian { coupling, center, width } => {
                let h = 0.5 * width;
                coupling * coupling / std::f64::consts::PI * h / ((w - center).powi(2) + h * h)
            }
            SpectralDensity::Tabulated { omega, values } => {
                if w < omega[0] || w > *omega.last().unwrap() {
                    return 0.0;
                }
                let k = omega.partition_point(|x| *x <= w).clamp(1, omega.len() - 1);
                let (w0, w1) = (omega[k - 1], omega[k]);
                let f = (w - w0) / (w1 - w0);
                values[k - 1] * (1.0 - f) + values[k] * f
            }
        }
    }
}

/// `C(t)` from the defining integral at the given temperature.
pub fn correlation(j: &SpectralDensity, t: f64, temperature: f64) -> Result<C64> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite, got {t}")));
    }
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidParameter(format!("temperature must be >= 0, got {temperature}")));
    }
    j.validate()?;
    let opts = QuadOptions::default();
    let kernel = |w: f64| -> C64 {
        if temperature == 0.0 {
            C64::from_polar(1.0, -w * t)
        } else {
            let x = w / (2.0 * temperature);
            let coth = if x.abs() < 1e-8 { 1.0 / x } else { 1.0 / x.tanh() };
            C64::new(coth * (w * t).cos(), -(w * t).sin())
        }
    };
    match j {
        SpectralDensity::OhmicExp { cutoff, .. } => {
            fourier_tail(|w| kernel(w) * j.density(w), 0.0, 60.0 * cutoff, t, &opts)
        }
        SpectralDensity::Lorentzian { center, width, .. } => {
            if temperature > 0.0 {
                return Err(Error::InvalidParameter(
                    "finite-temperature Lorentzian correlations are not supported".into(),
                ));
            }
            let span = 40.0 * width;
            let up = fourier_tail(|x| kernel(center + x) * j.density(center + x), 0.0, span, t, &opts)?;
            let down =
                fourier_tail(|x| kernel(center - x) * j.density(center - x), 0.0, span, t, &opts)?;
            Ok(up + down)
        }
        SpectralDensity::Tabulated { omega, values } => {
            let peak = values.iter().cloned().fold(0.0, f64::max);
            let last = *values.last().unwrap();
            if peak > 0.0 && last > 1e-2 * peak {
                return Err(Error::Divergent(format!(
                    "tabulated J ends at {last:.3e} (peak {peak:.3e}) without decaying; add a cutoff"
                )));
            }
            let mut acc = C64::new(0.0, 0.0);
            for w in omega.windows(2) {
                let (a, b) = (w[0], w[1]);
                if temperature > 0.0 && a < 0.0 {
                    return Err(Error::InvalidParameter(
                        "finite temperature needs J sampled on w >= 0".into(),
                    ));
                }
                acc += integrate(|x| kernel(x) * j.density(x), a, b, &opts)?;
            }
            Ok(acc)
        }
    }
}

/// `C(t_k)` on `t_k = k * t_max / (n - 1)`.
pub fn correlation_samples(
    j: &SpectralDensity,
    temperature: f64,
    t_max: f64,
    n: usize,
) -> Result<Vec<(f64, C64)>> {
    if n < 2 || !(t_max > 0.0) {
        return Err(Error::InvalidParameter("need n >= 2 samples and t_max > 0".into()));
    }
    (0..n)
        .map(|k| {
            let t = t_max * k as f64 / (n - 1) as f64;
            Ok((t, correlation(j, t, temperature)?))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    pub alpha: C64,
    pub alpha_tilde: C64,
    pub gamma: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BathCorrelation {
    pub terms: Vec<ExpTerm>,
}

impl BathCorrelation {
    pub fn new(terms: Vec<ExpTerm>) -> Result<Self> {
        for (k, term) in terms.iter().enumerate() {
            if !(term.gamma.im > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "exponent {k} does not decay (gamma = {})",
                    term.gamma
                )));
            }
            let vals = [term.alpha, term.alpha_tilde, term.gamma];
            if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { step: k, what: "exponential term".into() });
            }
        }
        Ok(Self { terms })
    }

    /// Exact two-term series for a zero-temperature Lorentzian bath.
    pub fn lorentzian_exact(coupling: f64, center: f64, width: f64) -> Result<Self> {
        let l2 = C64::new(coupling * coupling, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self::new(vec![
            ExpTerm { alpha: l2, alpha_tilde: zero, gamma: C64::new(-center, 0.5 * width) },
            ExpTerm { alpha: zero, alpha_tilde: l2, gamma: C64::new(center, 0.5 * width) },
        ])
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `sum_j alpha_j exp(i gamma_j t)`.
    pub fn eval(&self, t: f64) -> C64 {
        self.terms.iter().map(|x| x.alpha * (C64::i() * x.gamma * t).exp()).sum()
    }

    /// `sum_j alpha_tilde_j exp(i gamma_j t)`, the expansion of `C(t)^*`.
    pub fn eval_conj(&self, t: f64) -> C64 {
        self.terms.iter().map(|x| x.alpha_tilde * (C64::i() * x.gamma * t).exp()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|x| x.alpha.norm() == 0.0 && x.alpha_tilde.norm() == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Exponents are fitted to `C(t)` alone; `alpha_tilde` follows by linear least squares.
    CorrelationOnly,
    /// Exponents minimize the combined residual of `C(t)` and `C(t)^*`.
    Joint,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub mode: FitMode,
    /// Largest accepted RMS residual relative to the largest sample magnitude.
    pub residual_ceiling: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { mode: FitMode::CorrelationOnly, residual_ceiling: 1e-2, max_iters: 400, restarts: 6, seed: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    /// RMS of `|sum alpha exp(i gamma t) - C(t)|` over the samples.
    pub rms: f64,
    /// RMS residual of the `C(t)^*` expansion.
    pub rms_conj: f64,
    /// `rms` divided by the largest sample magnitude.
    pub relative_rms: f64,
    pub iterations: usize,
}

struct FitProblem<'a> {
    t: &'a [f64],
    c: Array1<C64>,
    cc: Array1<C64>,
    m: usize,
    joint: bool,
}

impl FitProblem<'_> {
    fn gammas(&self, p: &[f64]) -> Vec<C64> {
        (0..self.m).map(|j| C64::new(p[j], p[self.m + j].exp())).collect()
    }

    fn basis(&self, g: &[C64]) -> Array2<C64> {
        Array2::from_shape_fn((self.t.len(), self.m), |(k, j)| (C64::i() * g[j] * self.t[k]).exp())
    }

    fn amplitudes(&self, phi: &Array2<C64>, rhs: &Array1<C64>) -> Option<Array1<C64>> {
        phi.least_squares(rhs).ok().map(|r| r.solution)
    }

    /// Stacked real residual after eliminating the linear amplitudes.
    fn residual(&self, p: &[f64]) -> Option<Array1<f64>> {
        let g = self.gammas(p);
        if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite() || z.im > 1e6) {
            return None;
        }
        let phi = self.basis(&g);
        let mut out = Vec::with_capacity(4 * self.t.len());
        let a = self.amplitudes(&phi, &self.c)?;
        let r = phi.dot(&a) - &self.c;
        out.extend(r.iter().map(|z| z.re));
        out.extend(r.iter().map(|z| z.im));
        if self.joint {
            let at = self.amplitudes(&phi, &self.cc)?;
            let r = phi.dot(&at) - &self.cc;
            out.extend(r.iter().map(|z| z.re));
            out.extend(r.iter().map(|z| z.im));
        }
        let v = Array1::from(out);
        v.iter().all(|x| x.is_finite()).then_some(v)
    }

    fn cost(&self, p: &[f64]) -> f64 {
        self.residual(p).map(|r| r.dot(&r)).unwrap_or(f64::INFINITY)
    }

    /// Levenberg–Marquardt on the projected residual with a forward-difference Jacobian.
    fn refine(&self, p0: Vec<f64>, max_iters: usize) -> (Vec<f64>, f64, usize) {
        let n = p0.len();
        let mut p = p0;
        let Some(mut r) = self.residual(&p) else {
            return (p, f64::INFINITY, 0);
        };
        let mut cost = r.dot(&r);
        let mut mu = 1e-3;
        let mut it = 0;
        while it < max_iters {
            it += 1;
            let mut jac = Array2::<f64>::zeros((r.len(), n));
            for i in 0..n {
                let h = 1e-7 * p[i].abs().max(1.0);
                let mut q = p.clone();
                q[i] += h;
                let Some(rq) = self.residual(&q) else {
                    return (p, cost, it);
                };
                jac.column_mut(i).assign(&((&rq - &r) / h));
            }
            let jtj = jac.t().dot(&jac);
            let jtr = jac.t().dot(&r);
            let mut improved = false;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for i in 0..n {
                    a[[i, i]] += mu * jtj[[i, i]].max(1e-12);
                }
                let Ok(step) = a.solve(&jtr.mapv(|x| -x)) else {
                    mu *= 10.0;
                    continue;
                };
                let q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let c = self.cost(&q);
                if c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    p = q;
                    r = self.residual(&p).unwrap();
                    cost = c;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    if rel < 1e-12 {
                        return (p, cost, it);
                    }
                    break;
                }
                mu *= 4.0;
                if mu > 1e12 {
                    break;
                }
            }
            if !improved {
                break;
            }
        }
        (p, cost, it)
    }
}

/// Matrix-pencil estimate of `m` exponents from uniformly sampled signals.
fn pencil(signals: &[&Array1<C64>], m: usize, l: usize, dt: f64) -> Option<Vec<C64>> {
    let n = signals[0].len();
    if l <= m || l + 1 > n {
        return None;
    }
    let rows = n - l;
    let mut y = Array2::<C64>::zeros((rows * signals.len(), l + 1));
    for (b, sig) in signals.iter().enumerate() {
        for i in 0..rows {
            y.row_mut(b * rows + i).assign(&sig.slice(s![i..i + l + 1]));
        }
    }
    let y0 = y.slice(s![.., ..l]).to_owned();
    let y1 = y.slice(s![.., 1..]).to_owned();
    let (u, sv, vt) = y0.svd(true, true).ok()?;
    let (u, vt) = (u?, vt?);
    if sv.len() < m || sv[m - 1] <= 1e-14 * sv[0] {
        return None;
    }
    let um = u.slice(s![.., ..m]).mapv(|z| z.conj()).reversed_axes();
    let vm = vt.slice(s![..m, ..]).mapv(|z| z.conj()).reversed_axes();
    let mut z = um.dot(&y1).dot(&vm);
    for i in 0..m {
        let inv = 1.0 / sv[i];
        z.row_mut(i).mapv_inplace(|x| x * inv);
    }
    let (ev, _) = z.eig().ok()?;
    Some(ev.iter().map(|z| -C64::i() * z.ln() / dt).collect())
}

/// Least-squares fit of `m` decaying exponentials to uniformly spaced samples of `C(t)`.
pub fn fit_exponentials(
    samples: &[(f64, C64)],
    m: usize,
    opts: &FitOptions,
) -> Result<(BathCorrelation, FitReport)> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one exponential".into()));
    }
    if samples.len() < 4 * m {
        return Err(Error::InvalidParameter(format!(
            "{} samples are too few for {m} exponentials (need {})",
            samples.len(),
            4 * m
        )));
    }
    let t: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let dt = t[1] - t[0];
    if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(t[t.len() - 1].abs())) {
        return Err(Error::InvalidParameter("samples must lie on a uniform increasing grid".into()));
    }
    let c: Array1<C64> = samples.iter().map(|s| s.1).collect();
    if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { step: 0, what: "correlation samples".into() });
    }
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        let zero = C64::new(0.0, 0.0);
        let terms = (0..m)
            .map(|j| ExpTerm { alpha: zero, alpha_tilde: zero, gamma: C64::new(0.0, 1.0 + j as f64) })
            .collect();
        let report = FitReport { rms: 0.0, rms_conj: 0.0, relative_rms: 0.0, iterations: 0 };
        return Ok((BathCorrelation::new(terms)?, report));
    }
    let cc = c.mapv(|z| z.conj());
    let joint = opts.mode == FitMode::Joint;
    let problem = FitProblem { t: &t, c: c.clone(), cc: cc.clone(), m, joint };

    let signals: Vec<&Array1<C64>> = if joint { vec![&c, &cc] } else { vec![&c] };
    let n = t.len();
    let mut starts: Vec<Vec<C64>> = Vec::new();
    for frac in [8usize, 4, 3, 2] {
        let l = (n / frac).max(m + 1);
        if let Some(g) = pencil(&signals, m, l, dt) {
            starts.push(g);
        }
    }
    if starts.is_empty() {
        // fall back to a ladder of decay rates
        let span = t[n - 1] - t[0];
        starts.push((0..m).map(|j| C64::new(0.0, (j + 1) as f64 / span * 4.0)).collect());
    }
    let to_params = |g: &[C64]| -> Vec<f64> {
        let floor = 1e-3 / (t[n - 1] - t[0]);
        let mut p: Vec<f64> = g.iter().map(|z| z.re).collect();
        p.extend(g.iter().map(|z| z.im.max(floor).ln()));
        p
    };

    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let consider = |p0: Vec<f64>, best: &mut Option<(Vec<f64>, f64, usize)>| {
        let (p, cost, it) = problem.refine(p0, opts.max_iters);
        if cost.is_finite() && best.as_ref().is_none_or(|b| cost < b.1) {
            *best = Some((p, cost, it));
        }
    };
    for g in &starts {
        consider(to_params(g), &mut best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let base = best.as_ref().map(|b| b.0.clone()).unwrap_or_else(|| to_params(&starts[0]));
        let jitter: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let width = if i < m { 0.3 * x.abs().max(0.3) } else { 0.5 };
                x + width * (rng.random::<f64>() * 2.0 - 1.0)
            })
            .collect();
        consider(jitter, &mut best);
    }
    let Some((p, _, iterations)) = best else {
        return Err(Error::FitFailed { residual: f64::INFINITY, ceiling: opts.residual_ceiling });
    };

    let g = problem.gammas(&p);
    let phi = problem.basis(&g);
    let fail = || Error::FitFailed { residual: f64::INFINITY, ceiling: opts.residual_ceiling };
    let a = problem.amplitudes(&phi, &c).ok_or_else(fail)?;
    let at = problem.amplitudes(&phi, &cc).ok_or_else(fail)?;
    let rms_of = |r: Array1<C64>| (r.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    let rms = rms_of(phi.dot(&a) - &c);
    let rms_conj = rms_of(phi.dot(&at) - &cc);
    let relative = rms / scale;
    let judged = if joint { (rms * rms + rms_conj * rms_conj).sqrt() / scale } else { relative };
    if !(judged <= opts.residual_ceiling) {
        return Err(Error::FitFailed { residual: judged, ceiling: opts.residual_ceiling });
    }
    let mut terms: Vec<ExpTerm> = (0..m)
        .map(|j| ExpTerm { alpha: a[j], alpha_tilde: at[j], gamma: g[j] })
        .collect();
    terms.sort_by(|x, y| x.gamma.im.total_cmp(&y.gamma.im).then(x.gamma.re.total_cmp(&y.gamma.re)));
    let bath = BathCorrelation::new(terms)?;
    Ok((bath, FitReport { rms, rms_conj, relative_rms: relative, iterations }))
}

/// Discrete modes `(g_k, w_k)` representing a spectral density.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeDiscretization {
    pub couplings: Vec<f64>,
    pub frequencies: Vec<f64>,
}

impl ModeDiscretization {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Midpoint grid `w_k = (k - 1/2) dw`, `g_k = sqrt(J(w_k) dw)`.
pub fn discretize(j: &SpectralDensity, n: usize, omega_max: f64) -> Result<ModeDiscretization> {
    if n == 0 || !(omega_max > 0.0) || !omega_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "discretization needs N >= 1 and w_max > 0 (got {n}, {omega_max})"
        )));
    }
    j.validate()?;
    let dw = omega_max / n as f64;
    let frequencies: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * dw).collect();
    let couplings = frequencies.iter().map(|w| (j.density(*w).max(0.0) * dw).sqrt()).collect();
    Ok(ModeDiscretization { couplings, frequencies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ohmic_analytic(alpha: f64, wc: f64, t: f64) -> C64 {
        let d = C64::new(1.0, wc * t);
        2.0 * alpha * wc * wc / (d * d)
    }

    #[test]
    fn ohmic_zero_temperature_matches_closed_form() {
        let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
        let c0 = correlation(&j, 0.0, 0.0).unwrap();
        assert!((c0 - C64::new(0.2, 0.0)).norm() < 1e-10);
        for t in [0.3, 1.0, 2.5, 8.0, 20.0] {
            let c = correlation(&j, t, 0.0).unwrap();
            let want = ohmic_analytic(0.1, 1.0, t);
            assert!((c - want).norm() <= 1e-9 * 0.2, "t={t}: {c} vs {want}");
        }
    }

    #[test]
    fn conjugate_symmetry_at_zero_temperature() {
        let j = SpectralDensity::ohmic(0.1, 2.0).unwrap();
        let a = correlation(&j, 1.0, 0.0).unwrap();
        let b = correlation(&j, -1.0, 0.0).unwrap();
        assert!((a - b.conj()).norm() < 1e-10);
    }

    #[test]
    fn lorentzian_matches_contour_result() {
        let (lam, w0, kappa) = (0.4, 1.2, 0.6);
        let j = SpectralDensity::lorentzian(lam, w0, kappa).unwrap();
        for t in [0.0, 0.5, 1.0, 2.0] {
            let c = correlation(&j, t, 0.0).unwrap();
            let want = lam * lam * C64::from_polar((-0.5 * kappa * t).exp(), -w0 * t);
            assert!((c - want).norm() < 1e-8 * lam * lam, "t={t}: {c} vs {want}");
        }
    }

    #[test]
    fn finite_temperature_real_part_grows() {
        let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
        let cold = correlation(&j, 0.5, 0.0).unwrap();
        let warm = correlation(&j, 0.5, 1.0).unwrap();
        assert!(warm.re > cold.re);
        assert!((warm.im - cold.im).abs() < 1e-9);
        assert!(correlation(&SpectralDensity::lorentzian(1.0, 0.0, 1.0).unwrap(), 0.5, 1.0).is_err());
    }

    #[test]
    fn tabulated_without_cutoff_is_divergent() {
        let j = SpectralDensity::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(correlation(&j, 1.0, 0.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn tabulated_ohmic_tracks_analytic() {
        let omega: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
        let values = omega.iter().map(|w| 0.2 * w * (-w).exp()).collect();
        let j = SpectralDensity::tabulated(omega, values).unwrap();
        let c = correlation(&j, 1.0, 0.0).unwrap();
        assert!((c - ohmic_analytic(0.1, 1.0, 1.0)).norm() < 1e-5);
    }

    #[test]
    fn csv_loader_accepts_header() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "omega,J\n0.0,0.0\n1.0,0.5\n2.0,0.0").unwrap();
        let j = SpectralDensity::from_csv(f.path()).unwrap();
        assert_eq!(j.density(0.5), 0.25);
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "0.0,0.0\n2.0,0.5\n1.0,0.0").unwrap();
        assert!(SpectralDensity::from_csv(g.path()).is_err());
    }

    fn grid(f: impl Fn(f64) -> C64, t_max: f64, n: usize) -> Vec<(f64, C64)> {
        (0..n).map(|k| {
            let t = t_max * k as f64 / (n - 1) as f64;
            (t, f(t))
        }).collect()
    }

    fn sorted_gammas(b: &BathCorrelation) -> Vec<C64> {
        let mut g: Vec<C64> = b.terms.iter().map(|x| x.gamma).collect();
        g.sort_by(|a, b| a.re.total_cmp(&b.re));
        g
    }

    #[test]
    fn fit_recovers_two_term_series() {
        let g1 = C64::new(0.7, 0.3);
        let g2 = C64::new(-1.1, 0.8);
        let a1 = C64::new(0.5, -0.2);
        let a2 = C64::new(0.25, 0.4);
        let s = grid(|t| a1 * (C64::i() * g1 * t).exp() + a2 * (C64::i() * g2 * t).exp(), 8.0, 81);
        let (fit, report) = fit_exponentials(&s, 2, &FitOptions::default()).unwrap();
        assert!(report.rms < 1e-10);
        let got = sorted_gammas(&fit);
        assert!((got[0] - g2).norm() < 1e-8 && (got[1] - g1).norm() < 1e-8, "{got:?}");
        for term in &fit.terms {
            let want = if (term.gamma - g1).norm() < 1e-6 { a1 } else { a2 };
            assert!((term.alpha - want).norm() < 1e-8);
        }
    }

    #[test]
    fn joint_fit_recovers_conjugate_closed_series() {
        // {gamma, -gamma^*} makes C and C^* share exponents exactly.
        let g1 = C64::new(0.9, 0.4);
        let g2 = -g1.conj();
        let a1 = C64::new(0.3, 0.1);
        let a2 = C64::new(0.05, -0.2);
        let s = grid(|t| a1 * (C64::i() * g1 * t).exp() + a2 * (C64::i() * g2 * t).exp(), 8.0, 81);
        let opts = FitOptions { mode: FitMode::Joint, ..FitOptions::default() };
        let (fit, report) = fit_exponentials(&s, 2, &opts).unwrap();
        assert!(report.rms < 1e-10 && report.rms_conj < 1e-10);
        let got = sorted_gammas(&fit);
        assert!((got[0] - g2).norm() < 1e-8 && (got[1] - g1).norm() < 1e-8);
    }

    #[test]
    fn lorentzian_single_term_fit_is_near_exact() {
        let j = SpectralDensity::lorentzian(0.5, 1.0, 0.4).unwrap();
        let s = correlation_samples(&j, 0.0, 8.0, 81).unwrap();
        let (fit, report) = fit_exponentials(&s, 1, &FitOptions::default()).unwrap();
        assert!(report.rms <= 1e-6, "{}", report.rms);
        assert!((fit.terms[0].gamma - C64::new(-1.0, 0.2)).norm() < 1e-6);
    }

    #[test]
    fn ohmic_four_term_fit_residual() {
        let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
        let s = correlation_samples(&j, 0.0, 8.0, 161).unwrap();
        let (fit, report) = fit_exponentials(&s, 4, &FitOptions::default()).unwrap();
        assert!(report.relative_rms <= 1e-3, "{}", report.relative_rms);
        for (t, c) in &s {
            assert!((fit.eval(*t) - c).norm() <= 10.0 * report.rms + 1e-12);
        }
        assert!(fit.terms.iter().all(|x| x.gamma.im > 0.0));
    }

    #[test]
    fn joint_ohmic_fit_is_usable() {
        let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
        let s = correlation_samples(&j, 0.0, 8.0, 161).unwrap();
        let opts = FitOptions { mode: FitMode::Joint, ..FitOptions::default() };
        let (_, report) = fit_exponentials(&s, 4, &opts).unwrap();
        assert!(report.relative_rms < 1e-2 && report.rms_conj / 0.2 < 1e-2);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let s = grid(|t| C64::new((-t).exp(), 0.0), 1.0, 7);
        assert!(fit_exponentials(&s, 2, &FitOptions::default()).is_err());
        let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
        let s = correlation_samples(&j, 0.0, 8.0, 81).unwrap();
        let strict = FitOptions { residual_ceiling: 1e-12, ..FitOptions::default() };
        assert!(matches!(fit_exponentials(&s, 1, &strict), Err(Error::FitFailed { .. })));
    }

    #[test]
    fn discretize_examples() {
        let j = SpectralDensity::ohmic(0.1, 1.0).unwrap();
        let one = discretize(&j, 1, 4.0).unwrap();
        assert_eq!(one.frequencies, vec![2.0]);
        assert!((one.couplings[0].powi(2) - j.density(2.0) * 4.0).abs() < 1e-15);

        let d = discretize(&j, 200, 10.0).unwrap();
        let total: f64 = d.couplings.iter().map(|g| g * g).sum();
        let exact = integrate(|w| C64::new(j.density(w), 0.0), 0.0, 10.0, &QuadOptions::default())
            .unwrap()
            .re;
        assert!((total - exact).abs() / exact < 1e-2);

        let zeros = SpectralDensity::tabulated(vec![0.0, 5.0], vec![0.0, 0.0]).unwrap();
        assert!(discretize(&zeros, 10, 5.0).unwrap().couplings.iter().all(|g| *g == 0.0));
        assert!(discretize(&j, 0, 1.0).is_err());
    }

    #[test]
    fn lorentzian_exact_series_matches_integral() {
        let b = BathCorrelation::lorentzian_exact(0.5, 0.8, 0.6).unwrap();
        let j = SpectralDensity::lorentzian(0.5, 0.8, 0.6).unwrap();
        for t in [0.0, 0.7, 2.0] {
            let c = correlation(&j, t, 0.0).unwrap();
            assert!((b.eval(t) - c).norm() < 1e-8);
            assert!((b.eval_conj(t) - c.conj()).norm() < 1e-8);
        }
    }
}
