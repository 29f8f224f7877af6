// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Polaron-ansatz variational dynamics of the spin-boson model
//! `H = (w_q/2) sigma_x + sum w_k b_k^dagger b_k + (sigma_z/2) sum g_k (b_k^dagger + b_k)`.
//!
//! The displacements obey `dx_k/dt = i x_k (w_q E + w_k) + i g_k / 2` with the
//! shared factor `E = exp(-2 sum |x_p|^2)`, and `<sigma_x> = -E`. Integration is
//! classical RK4 with `w_q` held constant over each step; gradients with respect
//! to the per-step `w_q` come from the exact discrete adjoint of that map.

use std::path::Path;

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::bath::ModeDiscretization;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PolaronState {
    pub x: Array1<C64>,
}

impl PolaronState {
    /// Undisplaced bath, the initial condition `|->|0>`.
    pub fn vacuum(n: usize) -> Self {
        Self { x: Array1::zeros(n) }
    }

    /// `exp(-2 sum |x_k|^2)`.
    pub fn overlap(&self) -> f64 {
        (-2.0 * self.x.iter().map(|z| z.norm_sqr()).sum::<f64>()).exp()
    }
}

/// `<sigma_x> = -exp(-2 sum |x_k|^2)`.
pub fn magnetization(x: &PolaronState) -> f64 {
    -x.overlap()
}

/// Right-hand side of the displacement equations.
pub fn eom_rhs(x: &PolaronState, modes: &ModeDiscretization, omega_q: f64) -> Result<Array1<C64>> {
    if modes.is_empty() {
        return Err(Error::InvalidParameter("no bath modes".into()));
    }
    if x.x.len() != modes.len() {
        return Err(Error::Dimension(format!("{} displacements for {} modes", x.x.len(), modes.len())));
    }
    let e = x.overlap();
    Ok(Array1::from_shape_fn(modes.len(), |k| {
        let c = omega_q * e + modes.frequencies[k];
        C64::i() * x.x[k] * c + C64::new(0.0, 0.5 * modes.couplings[k])
    }))
}

/// Real split `(a, b)` with `x = a + i b`.
#[derive(Clone, Debug)]
struct Real {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Real {
    fn from_state(x: &PolaronState) -> Self {
        Self { a: x.x.iter().map(|z| z.re).collect(), b: x.x.iter().map(|z| z.im).collect() }
    }

    fn to_state(&self) -> PolaronState {
        PolaronState { x: self.a.iter().zip(&self.b).map(|(&a, &b)| C64::new(a, b)).collect() }
    }

    fn zeros(n: usize) -> Self {
        Self { a: vec![0.0; n], b: vec![0.0; n] }
    }

    fn overlap(&self) -> f64 {
        let s: f64 = self.a.iter().zip(&self.b).map(|(a, b)| a * a + b * b).sum();
        (-2.0 * s).exp()
    }

    /// `self + h * k`.
    fn axpy(&self, h: f64, k: &Real) -> Real {
        Real {
            a: self.a.iter().zip(&k.a).map(|(y, d)| y + h * d).collect(),
            b: self.b.iter().zip(&k.b).map(|(y, d)| y + h * d).collect(),
        }
    }

    fn add_scaled(&mut self, h: f64, k: &Real) {
        for (y, d) in self.a.iter_mut().zip(&k.a) {
            *y += h * d;
        }
        for (y, d) in self.b.iter_mut().zip(&k.b) {
            *y += h * d;
        }
    }

    fn finite(&self) -> bool {
        self.a.iter().chain(&self.b).all(|v| v.is_finite())
    }
}

fn rhs(y: &Real, modes: &ModeDiscretization, w: f64) -> Real {
    let e = y.overlap();
    let n = y.a.len();
    let mut out = Real::zeros(n);
    for k in 0..n {
        let c = w * e + modes.frequencies[k];
        out.a[k] = -y.b[k] * c;
        out.b[k] = y.a[k] * c + 0.5 * modes.couplings[k];
    }
    out
}

/// `(J^T v, v . df/dw)` at `y`.
fn rhs_vjp(y: &Real, modes: &ModeDiscretization, w: f64, v: &Real) -> (Real, f64) {
    let e = y.overlap();
    let n = y.a.len();
    let q: f64 = (0..n).map(|k| y.a[k] * v.b[k] - y.b[k] * v.a[k]).sum();
    let mut out = Real::zeros(n);
    for j in 0..n {
        let c = w * e + modes.frequencies[j];
        out.a[j] = v.b[j] * c - 4.0 * w * e * y.a[j] * q;
        out.b[j] = -v.a[j] * c - 4.0 * w * e * y.b[j] * q;
    }
    (out, e * q)
}

fn rk4_step(y: &Real, modes: &ModeDiscretization, w: f64, h: f64) -> Real {
    let k1 = rhs(y, modes, w);
    let k2 = rhs(&y.axpy(0.5 * h, &k1), modes, w);
    let k3 = rhs(&y.axpy(0.5 * h, &k2), modes, w);
    let k4 = rhs(&y.axpy(h, &k3), modes, w);
    let mut out = y.clone();
    out.add_scaled(h / 6.0, &k1);
    out.add_scaled(h / 3.0, &k2);
    out.add_scaled(h / 3.0, &k3);
    out.add_scaled(h / 6.0, &k4);
    out
}

/// Pulls `ybar_{k+1}` back through one RK4 step; returns `(ybar_k, dZ/dw_k)`.
fn rk4_adjoint(y: &Real, modes: &ModeDiscretization, w: f64, h: f64, ybar: &Real) -> (Real, f64) {
    let k1 = rhs(y, modes, w);
    let z2 = y.axpy(0.5 * h, &k1);
    let k2 = rhs(&z2, modes, w);
    let z3 = y.axpy(0.5 * h, &k2);
    let k3 = rhs(&z3, modes, w);
    let z4 = y.axpy(h, &k3);

    let mut out = ybar.clone();
    let mut wbar = 0.0;
    let k4bar = Real { a: ybar.a.iter().map(|v| v * h / 6.0).collect(), b: ybar.b.iter().map(|v| v * h / 6.0).collect() };
    let mut k3bar = Real { a: ybar.a.iter().map(|v| v * h / 3.0).collect(), b: ybar.b.iter().map(|v| v * h / 3.0).collect() };
    let mut k2bar = k3bar.clone();
    let mut k1bar = k4bar.clone();

    let (z4bar, p) = rhs_vjp(&z4, modes, w, &k4bar);
    wbar += p;
    out.add_scaled(1.0, &z4bar);
    k3bar.add_scaled(h, &z4bar);

    let (z3bar, p) = rhs_vjp(&z3, modes, w, &k3bar);
    wbar += p;
    out.add_scaled(1.0, &z3bar);
    k2bar.add_scaled(0.5 * h, &z3bar);

    let (z2bar, p) = rhs_vjp(&z2, modes, w, &k2bar);
    wbar += p;
    out.add_scaled(1.0, &z2bar);
    k1bar.add_scaled(0.5 * h, &z2bar);

    let (z1bar, p) = rhs_vjp(y, modes, w, &k1bar);
    wbar += p;
    out.add_scaled(1.0, &z1bar);
    (out, wbar)
}

/// RK4 from the vacuum. Returns the states at steps `0..=T`, `T = omega_q.len()`.
pub fn integrate(modes: &ModeDiscretization, omega_q: &[f64], dt: f64) -> Result<Vec<PolaronState>> {
    integrate_from(&PolaronState::vacuum(modes.len()), modes, omega_q, dt)
}

pub fn integrate_from(
    x0: &PolaronState,
    modes: &ModeDiscretization,
    omega_q: &[f64],
    dt: f64,
) -> Result<Vec<PolaronState>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if modes.is_empty() {
        return Err(Error::InvalidParameter("no bath modes".into()));
    }
    if x0.x.len() != modes.len() {
        return Err(Error::Dimension(format!("{} displacements for {} modes", x0.x.len(), modes.len())));
    }
    let mut y = Real::from_state(x0);
    let mut out = Vec::with_capacity(omega_q.len() + 1);
    out.push(x0.clone());
    for (k, &w) in omega_q.iter().enumerate() {
        y = rk4_step(&y, modes, w, dt);
        if !y.finite() {
            return Err(Error::NonFinite { step: k + 1, what: "polaron displacements".into() });
        }
        out.push(y.to_state());
    }
    Ok(out)
}

/// Gradient of `cost(<sigma_x>(T))` with respect to each step's `omega_q`.
///
/// `cost` returns the value and its derivative with respect to the magnetization.
pub fn adjoint_gradient(
    trajectory: &[PolaronState],
    modes: &ModeDiscretization,
    omega_q: &[f64],
    dt: f64,
    cost: &dyn Fn(f64) -> (f64, f64),
) -> Result<(f64, Vec<f64>)> {
    if trajectory.len() != omega_q.len() + 1 {
        return Err(Error::Dimension(format!(
            "trajectory has {} states for {} steps",
            trajectory.len(),
            omega_q.len()
        )));
    }
    let last = Real::from_state(trajectory.last().expect("nonempty"));
    let e = last.overlap();
    let (z, dz_dm) = cost(-e);
    // dm/da_j = 4 E a_j, dm/db_j = 4 E b_j
    let mut ybar = Real {
        a: last.a.iter().map(|a| dz_dm * 4.0 * e * a).collect(),
        b: last.b.iter().map(|b| dz_dm * 4.0 * e * b).collect(),
    };
    let mut grad = vec![0.0; omega_q.len()];
    for k in (0..omega_q.len()).rev() {
        let y = Real::from_state(&trajectory[k]);
        let (prev, wbar) = rk4_adjoint(&y, modes, omega_q[k], dt, &ybar);
        grad[k] = wbar;
        ybar = prev;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { step: 0, what: "adjoint gradient".into() });
    }
    Ok((z, grad))
}

/// Terminal magnetization for a schedule.
pub fn final_magnetization(modes: &ModeDiscretization, omega_q: &[f64], dt: f64) -> Result<f64> {
    let mut y = Real::zeros(modes.len());
    for (k, &w) in omega_q.iter().enumerate() {
        y = rk4_step(&y, modes, w, dt);
        if !y.finite() {
            return Err(Error::NonFinite { step: k + 1, what: "polaron displacements".into() });
        }
    }
    Ok(-y.overlap())
}

/// Closed-form displacement at `w_q = 0`: `x_k(t) = g_k/(2 w_k) (e^{i w_k t} - 1)`.
pub fn independent_boson_displacement(g: f64, w: f64, t: f64) -> C64 {
    (C64::from_polar(1.0, w * t) - 1.0) * (g / (2.0 * w))
}

/// Writes `t,re_x0..,im_x0..,magnetization`.
pub fn write_trajectory_csv(trajectory: &[PolaronState], dt: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    let n = trajectory.first().map(|s| s.x.len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|k| format!("re_x{k}")));
    header.extend((0..n).map(|k| format!("im_x{k}")));
    header.push("magnetization".into());
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for (k, s) in trajectory.iter().enumerate() {
        let mut rec = vec![format!("{}", k as f64 * dt)];
        rec.extend(s.x.iter().map(|z| format!("{}", z.re)));
        rec.extend(s.x.iter().map(|z| format!("{}", z.im)));
        rec.push(format!("{}", magnetization(s)));
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{discretize, SpectralDensity};

    fn ohmic_modes(n: usize) -> ModeDiscretization {
        discretize(&SpectralDensity::ohmic(0.1, 1.0).unwrap(), n, 10.0).unwrap()
    }

    #[test]
    fn fixed_point_and_origin() {
        let zero = ModeDiscretization { couplings: vec![0.0; 3], frequencies: vec![0.5, 1.0, 2.0] };
        let d = eom_rhs(&PolaronState::vacuum(3), &zero, 0.7).unwrap();
        assert!(d.iter().all(|z| z.norm() == 0.0));
        let m = ohmic_modes(5);
        let d = eom_rhs(&PolaronState::vacuum(5), &m, 0.7).unwrap();
        for (k, z) in d.iter().enumerate() {
            assert!((z - C64::new(0.0, 0.5 * m.couplings[k])).norm() < 1e-15);
        }
        let empty = ModeDiscretization { couplings: vec![], frequencies: vec![] };
        assert!(eom_rhs(&PolaronState::vacuum(0), &empty, 0.0).is_err());
    }

    #[test]
    fn closed_form_satisfies_equation() {
        let (g, w) = (0.3, 1.7);
        let modes = ModeDiscretization { couplings: vec![g], frequencies: vec![w] };
        for t in [0.0, 0.4, 2.2, 7.5] {
            let x = PolaronState { x: Array1::from(vec![independent_boson_displacement(g, w, t)]) };
            let lhs = (C64::from_polar(1.0, w * t) * C64::i() * w) * (g / (2.0 * w));
            let rhs = eom_rhs(&x, &modes, 0.0).unwrap()[0];
            assert!((lhs - rhs).norm() <= 1e-12);
        }
    }

    #[test]
    fn magnetization_limits() {
        assert_eq!(magnetization(&PolaronState::vacuum(4)), -1.0);
        let mut last = -1.0;
        for r in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let m = magnetization(&PolaronState { x: Array1::from(vec![C64::new(r, 0.0)]) });
            assert!(m > last && m < 0.0);
            last = m;
        }
    }

    #[test]
    fn zero_coupling_stays_at_origin() {
        let m = ModeDiscretization { couplings: vec![0.0; 4], frequencies: vec![1.0, 2.0, 3.0, 4.0] };
        let traj = integrate(&m, &vec![0.8; 50], 0.05).unwrap();
        assert!(traj.iter().all(|s| s.x.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn matches_closed_form_at_zero_splitting() {
        let m = ohmic_modes(30);
        let dt = 1e-3;
        let traj = integrate(&m, &vec![0.0; 3000], dt).unwrap();
        let last = traj.last().unwrap();
        for k in 0..30 {
            let want = independent_boson_displacement(m.couplings[k], m.frequencies[k], 3.0);
            assert!((last.x[k] - want).norm() <= 1e-8, "mode {k}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let m = ohmic_modes(20);
        let horizon = 2.0;
        let run = |dt: f64| -> Array1<C64> {
            let steps = (horizon / dt).round() as usize;
            integrate(&m, &vec![1.0; steps], dt).unwrap().last().unwrap().x.clone()
        };
        let reference = run(0.0025);
        let err = |dt: f64| run(dt).iter().zip(reference.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let ratio = err(0.04) / err(0.02);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mode_sum_reproduces_independent_boson() {
        let target = -(10f64).powf(-0.1);
        for (n, tol) in [(300, 2e-3), (30, 2e-2)] {
            let m = ohmic_modes(n);
            let traj = integrate(&m, &vec![0.0; 300], 0.01).unwrap();
            let got = magnetization(traj.last().unwrap());
            assert!((got - target).abs() <= tol, "N={n}: {got} vs {target}");
        }
    }

    fn fd_gradient(m: &ModeDiscretization, w: &[f64], dt: f64, h: f64) -> Vec<f64> {
        (0..w.len())
            .map(|k| {
                let mut p = w.to_vec();
                p[k] += h;
                let mut q = w.to_vec();
                q[k] -= h;
                (final_magnetization(m, &p, dt).unwrap() - final_magnetization(m, &q, dt).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let n: f64 = b.iter().map(|y| y * y).sum();
        (e / n).sqrt()
    }

    #[test]
    fn zero_coupling_gradient_vanishes() {
        let m = ModeDiscretization { couplings: vec![0.0; 3], frequencies: vec![1.0, 2.0, 3.0] };
        let w = vec![0.5; 20];
        let traj = integrate(&m, &w, 0.05).unwrap();
        let (_, g) = adjoint_gradient(&traj, &m, &w, 0.05, &|x| (x, 1.0)).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let m = ohmic_modes(30);
        let dt = 0.02;
        let w: Vec<f64> = (0..200).map(|k| 1.0 + 0.5 * (0.05 * k as f64).sin()).collect();
        let traj = integrate(&m, &w, dt).unwrap();
        let (_, g) = adjoint_gradient(&traj, &m, &w, dt, &|x| (x, 1.0)).unwrap();
        let fd = fd_gradient(&m, &w, dt, 1e-6);
        let e = rel_l2(&g, &fd);
        assert!(e <= 1e-6, "relative error {e:.3e}");
    }

    #[test]
    fn adjoint_at_symmetric_point() {
        let m = ohmic_modes(30);
        let dt = 0.02;
        let w = vec![0.0; 200];
        let traj = integrate(&m, &w, dt).unwrap();
        let (z, g) = adjoint_gradient(&traj, &m, &w, dt, &|x| (x, 1.0)).unwrap();
        assert!((z - magnetization(traj.last().unwrap())).abs() < 1e-15);
        let fd = fd_gradient(&m, &w, dt, 1e-6);
        let e = rel_l2(&g, &fd);
        assert!(e <= 1e-6, "relative error {e:.3e}");
    }

    #[test]
    fn mismatched_trajectory_is_rejected() {
        let m = ohmic_modes(4);
        let traj = integrate(&m, &[0.0; 3], 0.1).unwrap();
        assert!(adjoint_gradient(&traj, &m, &[0.0; 4], 0.1, &|x| (x, 1.0)).is_err());
    }
}
