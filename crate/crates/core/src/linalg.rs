// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Small dense complex linear-algebra helpers shared by the builders.

use ndarray::{s, Array1, Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Eigh, Inverse, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, ONE)
}

/// Kronecker product with the left factor as the slow index.
pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            let mut block = out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.zip_mut_with(b, |o, &bv| *o = aij * bv);
        }
    }
    out
}

pub fn one_norm(a: &ArrayView2<C64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn vec_max_abs_diff(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn all_finite(a: &ArrayView2<C64>) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest singular value.
pub fn spectral_norm(a: &ArrayView2<C64>) -> Result<f64> {
    let (_, sv, _) = a.to_owned().svd(false, false)?;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix, `A V = V diag(w)`.
pub fn hermitian_eig(a: &ArrayView2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::NonSquare { rows: n, cols: m });
    }
    // LAPACK receives the column-major copy; a row-major buffer would be read as the transpose.
    let mut f = Array2::<C64>::zeros((n, n).f());
    f.assign(a);
    let (w, v) = f.eigh(UPLO::Lower)?;
    let dw = w.mapv(|x| C64::new(x, 0.0)).insert_axis(ndarray::Axis(0));
    let res = max_abs_diff(&a.dot(&v).view(), &(&v * &dw).view());
    let scale = one_norm(a).max(1.0);
    if res > 1e-8 * scale {
        return Err(Error::Linalg(format!("Hermitian eigensolver residual {res:.3e}")));
    }
    Ok((w, v))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// Backward-error bounds for each Padé degree in double precision.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn scaled_sum(terms: &[(f64, &Array2<C64>)], n: usize) -> Array2<C64> {
    let mut out = Array2::<C64>::zeros((n, n));
    for (c, m) in terms {
        out.scaled_add(C64::new(*c, 0.0), *m);
    }
    out
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(a: &ArrayView2<C64>) -> Result<Array2<C64>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::NonSquare { rows: n, cols: m });
    }
    if !all_finite(a) {
        return Err(Error::NonFinite { step: 0, what: "generator entries".into() });
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let id = identity(n);
    let norm = one_norm(a);
    if norm == 0.0 {
        return Ok(id);
    }

    for &(deg, theta) in THETA.iter() {
        if norm <= theta {
            let a = a.to_owned();
            let b: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let a2 = a.dot(&a);
            let mut powers = vec![id.clone(), a2.clone()];
            for _ in 2..=deg / 2 {
                let next = powers.last().unwrap().dot(&a2);
                powers.push(next);
            }
            let even: Vec<(f64, &Array2<C64>)> =
                (0..=deg / 2).map(|j| (b[2 * j], &powers[j])).collect();
            let odd: Vec<(f64, &Array2<C64>)> =
                (0..=deg / 2).map(|j| (b[2 * j + 1], &powers[j])).collect();
            let v = scaled_sum(&even, n);
            let u = a.dot(&scaled_sum(&odd, n));
            return pade_quotient(&u, &v);
        }
    }

    let squarings = (norm / THETA13).log2().ceil().max(0.0) as u32;
    let scale = 0.5f64.powi(squarings as i32);
    let a = a.mapv(|z| z * scale);
    let b = &PADE13;
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = scaled_sum(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let u = a.dot(
        &(a6.dot(&inner_u) + scaled_sum(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &id)], n)),
    );
    let inner_v = scaled_sum(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let v = a6.dot(&inner_v) + scaled_sum(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &id)], n);
    let mut r = pade_quotient(&u, &v)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    if !all_finite(&r.view()) {
        return Err(Error::NonFinite { step: 0, what: "matrix exponential overflow".into() });
    }
    Ok(r)
}

fn pade_quotient(u: &Array2<C64>, v: &Array2<C64>) -> Result<Array2<C64>> {
    let q = v - u;
    let p = v + u;
    let qinv = q.inv()?;
    Ok(qinv.dot(&p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eig_of_complex_matrix() {
        let y = ndarray::array![[ZERO, -I], [I, ZERO]];
        let (w, v) = hermitian_eig(&y.view()).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
        let col = v.column(0);
        let yv = y.dot(&col);
        for k in 0..2 {
            assert!((yv[k] + col[k]).norm() < 1e-14);
        }
    }
    use ndarray::array;

    /// Truncated Taylor series with many terms; fine for small-norm inputs.
    fn taylor_expm(a: &Array2<C64>) -> Array2<C64> {
        let n = a.nrows();
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..60 {
            term = term.dot(a).mapv(|z| z / k as f64);
            sum = sum + &term;
        }
        sum
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Array2::<C64>::zeros((3, 3));
        assert_eq!(expm(&z.view()).unwrap(), identity(3));
    }

    #[test]
    fn expm_matches_taylor_across_pade_degrees() {
        let base = array![
            [C64::new(0.1, 0.3), C64::new(-0.2, 0.05), C64::new(0.0, 0.4)],
            [C64::new(0.3, 0.0), C64::new(-0.1, -0.2), C64::new(0.2, 0.1)],
            [C64::new(-0.05, 0.1), C64::new(0.15, 0.0), C64::new(0.3, -0.3)]
        ];
        for scale in [0.01, 0.2, 1.0, 3.0, 8.0] {
            let a = base.mapv(|z| z * scale);
            let got = expm(&a.view()).unwrap();
            let want = taylor_expm(&a);
            let err = max_abs_diff(&got.view(), &want.view());
            assert!(err < 1e-12 * frobenius(&want.view()).max(1.0), "scale {scale}: {err}");
        }
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(theta * [[0,-1],[1,0]]) is a rotation by theta.
        let theta = 20.0;
        let a = array![[ZERO, C64::new(-theta, 0.0)], [C64::new(theta, 0.0), ZERO]];
        let r = expm(&a.view()).unwrap();
        assert!((r[[0, 0]].re - theta.cos()).abs() < 1e-12);
        assert!((r[[1, 0]].re - theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn expm_rejects_nan() {
        let mut a = Array2::<C64>::zeros((2, 2));
        a[[0, 1]] = C64::new(f64::NAN, 0.0);
        assert!(expm(&a.view()).is_err());
    }

    #[test]
    fn kron_layout() {
        let a = array![[ONE, C64::new(2.0, 0.0)], [ZERO, ONE]];
        let b = array![[ZERO, ONE], [ONE, ZERO]];
        let k = kron(&a.view(), &b.view());
        assert_eq!(k[[0, 3]], C64::new(2.0, 0.0));
        assert_eq!(k[[1, 0]], ONE);
        assert_eq!(k[[3, 2]], ONE);
        assert_eq!(k[[2, 0]], ZERO);
    }
}
