// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Adaptive quadrature for complex-valued integrands.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-14, max_intervals: 4000 }
    }
}

fn kronrod<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

struct Piece {
    a: f64,
    b: f64,
    val: C64,
    err: f64,
}

/// Globally adaptive Gauss–Kronrod integration of `f` on `[a, b]`.
pub fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<C64> {
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let (v, e) = kronrod(&f, a, b);
    let mut pieces = vec![Piece { a, b, val: v, err: e }];
    loop {
        let total: C64 = pieces.iter().map(|p| p.val).sum();
        let err: f64 = pieces.iter().map(|p| p.err).sum();
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::Divergent("non-finite integrand".into()));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.norm()) {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Divergent(format!(
                "quadrature did not converge: error estimate {err:.3e} on {:.3e}",
                total.norm()
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = kronrod(&f, p.a, m);
        let (v2, e2) = kronrod(&f, m, p.b);
        pieces.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        pieces.push(Piece { a: m, b: p.b, val: v2, err: e2 });
    }
}

/// `int_a^inf f` through the substitution `x = a + s/(1-s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> C64>(f: F, a: f64, opts: &QuadOptions) -> Result<C64> {
    let g = |s: f64| {
        let one_minus = 1.0 - s;
        let x = a + s / one_minus;
        let jac = 1.0 / (one_minus * one_minus);
        let v = f(x) * jac;
        if v.re.is_finite() && v.im.is_finite() {
            v
        } else {
            C64::new(0.0, 0.0)
        }
    };
    integrate(g, 0.0, 1.0, opts)
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
pub fn wynn_epsilon(seq: &[C64]) -> C64 {
    let n = seq.len();
    if n < 3 {
        return *seq.last().unwrap_or(&C64::new(0.0, 0.0));
    }
    let mut prev = vec![C64::new(0.0, 0.0); n + 1];
    let mut cur: Vec<C64> = seq.to_vec();
    let mut best = seq[n - 1];
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d.norm() < 1e-300 {
                return if col % 2 == 0 { cur[i + 1] } else { best };
            }
            next.push(prev[i + 1] + 1.0 / d);
        }
        col += 1;
        prev = cur;
        cur = next;
        if col % 2 == 0 {
            best = *cur.last().unwrap();
        }
    }
    best
}

/// `int_a^inf f(w) dw` for an integrand oscillating like `exp(-i w t)`.
///
/// The range `[a, a + span]` is integrated directly; the remainder is split
/// into half periods whose partial sums are accelerated with Wynn's epsilon.
pub fn fourier_tail<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    span: f64,
    t: f64,
    opts: &QuadOptions,
) -> Result<C64> {
    if t == 0.0 {
        return integrate_to_infinity(f, a, opts);
    }
    let head = integrate(&f, a, a + span, opts)?;
    let half = std::f64::consts::PI / t.abs();
    let mut partial = Vec::new();
    let mut sum = head;
    let mut lo = a + span;
    let mut last_est = sum;
    let mut stable = 0;
    for cycle in 0..400 {
        let piece = integrate(&f, lo, lo + half, opts)?;
        lo += half;
        sum += piece;
        partial.push(sum);
        if piece.norm() <= opts.abs_tol.max(1e-3 * opts.rel_tol * sum.norm()) {
            return Ok(sum);
        }
        if cycle >= 4 {
            let tail = &partial[partial.len().saturating_sub(24)..];
            let est = wynn_epsilon(tail);
            if (est - last_est).norm() <= opts.rel_tol * 1e-1 * est.norm().max(opts.abs_tol) {
                stable += 1;
                if stable >= 3 {
                    return Ok(est);
                }
            } else {
                stable = 0;
            }
            last_est = est;
        }
    }
    Err(Error::Divergent(format!("oscillatory tail did not converge at t = {t}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|x| C64::new(x * x, x), 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((v - C64::new(8.0 / 3.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn semi_infinite_exponential() {
        let v = integrate_to_infinity(|x| C64::new((-x).exp(), 0.0), 0.0, &QuadOptions::default())
            .unwrap();
        assert!((v.re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fourier_tail_of_lorentzian_kernel() {
        // int_0^inf cos(w t)/(1 + w^2) dw = (pi/2) exp(-t)
        let t = 1.5;
        let v = fourier_tail(
            |w| C64::new((w * t).cos() / (1.0 + w * w), 0.0),
            0.0,
            20.0,
            t,
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((v.re - std::f64::consts::FRAC_PI_2 * (-t).exp()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // partial sums of ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let seq: Vec<C64> = (1..=15)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                C64::new(s, 0.0)
            })
            .collect();
        assert!((wynn_epsilon(&seq).re - 2f64.ln()).abs() < 1e-10);
    }
}
