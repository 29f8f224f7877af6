// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Liouville-space algebra.
//!
//! Density matrices are stacked column-major, `vec(rho)[i + S*j] = rho[i, j]`,
//! so that `vec(A rho B) = (B^T ⊗ A) vec(rho)`. Generators follow
//! `d vec(rho)/dt = L vec(rho)`.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64 as C64;

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::linalg::{self, identity, kron, I, ONE, ZERO};

/// Square operator on the system Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct QOperator {
    pub data: Array2<C64>,
}

/// Vectorized density matrix of length `S^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityVec {
    pub data: Array1<C64>,
}

/// `L x L` superoperator with `L = S^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    pub data: Array2<C64>,
}

impl QOperator {
    pub fn new(data: Array2<C64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::NonSquare { rows: r, cols: c });
        }
        if !linalg::all_finite(&data.view()) {
            return Err(Error::NonFinite { step: 0, what: "operator entries".into() });
        }
        Ok(Self { data })
    }

    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut data = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare { rows: n, cols: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                data[[i, j]] = C64::new(v, 0.0);
            }
        }
        Self::new(data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self { data: Array2::zeros((dim, dim)) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { data: identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn sigma_x() -> Self {
        Self::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn sigma_y() -> Self {
        let mut data = Array2::zeros((2, 2));
        data[[0, 1]] = -I;
        data[[1, 0]] = I;
        Self { data }
    }

    pub fn sigma_z() -> Self {
        Self::from_real(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap()
    }

    /// Bosonic annihilation operator truncated to `dim` Fock states.
    pub fn annihilation(dim: usize) -> Self {
        let mut data = Array2::zeros((dim, dim));
        for n in 1..dim {
            data[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
        }
        Self { data }
    }

    pub fn dagger(&self) -> Self {
        Self { data: self.data.t().mapv(|z| z.conj()) }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { data: self.data.mapv(|z| z * c) }
    }

    /// Anti-Hermitian part relative to the operator norm.
    pub fn hermiticity_defect(&self) -> f64 {
        let diff = &self.data - &self.data.t().mapv(|z| z.conj());
        let n = linalg::frobenius(&self.data.view());
        if n == 0.0 {
            0.0
        } else {
            linalg::frobenius(&diff.view()) / n
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= 1e-12
    }

    pub fn is_diagonal(&self) -> bool {
        self.data.indexed_iter().all(|((i, j), z)| i == j || *z == ZERO)
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }
}

impl DensityVec {
    pub fn new(data: Array1<C64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn system_dim(&self) -> usize {
        (self.data.len() as f64).sqrt().round() as usize
    }

    /// Pure state `|k><k|` of an `s`-level system.
    pub fn basis(s: usize, k: usize) -> Self {
        let mut data = Array1::zeros(s * s);
        data[k + s * k] = ONE;
        Self { data }
    }

    pub fn maximally_mixed(s: usize) -> Self {
        vectorize(&QOperator { data: identity(s).mapv(|z| z / s as f64) }).unwrap()
    }

    /// `Tr[A rho]`.
    pub fn expectation(&self, op: &QOperator) -> C64 {
        let s = op.dim();
        let mut acc = ZERO;
        for j in 0..s {
            for i in 0..s {
                acc += op.data[[j, i]] * self.data[i + s * j];
            }
        }
        acc
    }

    pub fn trace(&self) -> C64 {
        let s = self.system_dim();
        (0..s).map(|k| self.data[k + s * k]).sum()
    }
}

impl SuperOp {
    pub fn new(data: Array2<C64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::NonSquare { rows: r, cols: c });
        }
        Ok(Self { data })
    }

    pub fn zeros(l: usize) -> Self {
        Self { data: Array2::zeros((l, l)) }
    }

    pub fn identity(l: usize) -> Self {
        Self { data: identity(l) }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn apply(&self, rho: &DensityVec) -> DensityVec {
        DensityVec { data: self.data.dot(&rho.data) }
    }

    pub fn compose(&self, other: &SuperOp) -> SuperOp {
        SuperOp { data: self.data.dot(&other.data) }
    }
}

impl std::ops::Add for &SuperOp {
    type Output = SuperOp;
    fn add(self, rhs: &SuperOp) -> SuperOp {
        SuperOp { data: &self.data + &rhs.data }
    }
}

pub fn vectorize(rho: &QOperator) -> Result<DensityVec> {
    let (r, c) = rho.data.dim();
    if r != c {
        return Err(Error::NonSquare { rows: r, cols: c });
    }
    let data = rho.data.t().iter().cloned().collect::<Array1<C64>>();
    Ok(DensityVec { data })
}

pub fn unvectorize(v: &ArrayView1<C64>) -> Result<QOperator> {
    let l = v.len();
    let s = (l as f64).sqrt().round() as usize;
    if s * s != l {
        return Err(Error::Dimension(format!("vector of length {l} is not a square")));
    }
    let mut data = Array2::zeros((s, s));
    for j in 0..s {
        for i in 0..s {
            data[[i, j]] = v[i + s * j];
        }
    }
    Ok(QOperator { data })
}

/// Superoperator of `rho -> A rho`.
pub fn left_mul(a: &QOperator) -> SuperOp {
    SuperOp { data: kron(&identity(a.dim()).view(), &a.data.view()) }
}

/// Superoperator of `rho -> rho B`.
pub fn right_mul(b: &QOperator) -> SuperOp {
    SuperOp { data: kron(&b.data.t(), &identity(b.dim()).view()) }
}

/// Superoperator of `rho -> [A, rho]`.
pub fn commutator(a: &QOperator) -> SuperOp {
    SuperOp { data: left_mul(a).data - right_mul(a).data }
}

/// Superoperator of `rho -> {A, rho}`.
pub fn anticommutator(a: &QOperator) -> SuperOp {
    SuperOp { data: left_mul(a).data + right_mul(a).data }
}

/// Generator of `-i[H, rho]`. A non-Hermitian `H` is accepted with a warning.
pub fn hamiltonian_superop(h: &QOperator) -> SuperOp {
    if !h.is_hermitian() {
        log::warn!("Hamiltonian is not Hermitian (relative defect {:.3e})", h.hermiticity_defect());
    }
    SuperOp { data: commutator(h).data.mapv(|z| -I * z) }
}

/// GKSL dissipator `sum_k r_k (J rho J^dagger - {J^dagger J, rho}/2)`.
pub fn lindblad_superop(jump_ops: &[QOperator], rates: &[f64]) -> Result<SuperOp> {
    if jump_ops.len() != rates.len() {
        return Err(Error::Dimension(format!(
            "{} jump operators but {} rates",
            jump_ops.len(),
            rates.len()
        )));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParameter(format!("Lindblad rate must be nonnegative, got {r}")));
    }
    let Some(first) = jump_ops.first() else {
        return Ok(SuperOp::zeros(0));
    };
    let s = first.dim();
    let mut out = Array2::<C64>::zeros((s * s, s * s));
    for (j, &rate) in jump_ops.iter().zip(rates) {
        if j.dim() != s {
            return Err(Error::Dimension("jump operators differ in dimension".into()));
        }
        if rate == 0.0 {
            continue;
        }
        let jd = j.dagger();
        let jdj = QOperator { data: jd.data.dot(&j.data) };
        let sandwich = kron(&j.data.mapv(|z| z.conj()).view(), &j.data.view());
        out.scaled_add(C64::new(rate, 0.0), &sandwich);
        out.scaled_add(C64::new(-0.5 * rate, 0.0), &anticommutator(&jdj).data);
    }
    Ok(SuperOp { data: out })
}

/// `exp(gen * dt)`.
pub fn step_propagator(gen: &SuperOp, dt: f64) -> Result<SuperOp> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let scaled = gen.data.mapv(|z| z * dt);
    Ok(SuperOp { data: linalg::expm(&scaled.view())? })
}

/// Control-dependent system Hamiltonian.
pub trait HamiltonianBuilder: Sync {
    fn system_dim(&self) -> usize;
    fn n_controls(&self) -> usize;
    fn hamiltonian(&self, controls: &[f64]) -> Result<QOperator>;

    /// System generator; defaults to the pure commutator.
    fn generator(&self, controls: &[f64]) -> Result<SuperOp> {
        Ok(hamiltonian_superop(&self.hamiltonian(controls)?))
    }
}

/// `H(u) = H_0 + sum_m u_m H_m`, optionally with a fixed dissipator.
#[derive(Clone, Debug)]
pub struct LinearControlHamiltonian {
    pub drift: QOperator,
    pub controls: Vec<QOperator>,
    pub dissipator: Option<SuperOp>,
}

impl LinearControlHamiltonian {
    pub fn new(drift: QOperator, controls: Vec<QOperator>) -> Result<Self> {
        let s = drift.dim();
        if controls.iter().any(|c| c.dim() != s) {
            return Err(Error::Dimension("control operators differ from drift dimension".into()));
        }
        Ok(Self { drift, controls, dissipator: None })
    }

    pub fn with_dissipator(mut self, d: SuperOp) -> Result<Self> {
        let s = self.drift.dim();
        if d.dim() != s * s {
            return Err(Error::Dimension("dissipator dimension".into()));
        }
        self.dissipator = Some(d);
        Ok(self)
    }
}

impl HamiltonianBuilder for LinearControlHamiltonian {
    fn system_dim(&self) -> usize {
        self.drift.dim()
    }

    fn n_controls(&self) -> usize {
        self.controls.len()
    }

    fn hamiltonian(&self, u: &[f64]) -> Result<QOperator> {
        if u.len() != self.controls.len() {
            return Err(Error::Dimension(format!(
                "{} control values for {} channels",
                u.len(),
                self.controls.len()
            )));
        }
        let mut h = self.drift.data.clone();
        for (c, &v) in self.controls.iter().zip(u) {
            h.scaled_add(C64::new(v, 0.0), &c.data);
        }
        QOperator::new(h)
    }

    fn generator(&self, u: &[f64]) -> Result<SuperOp> {
        let gen = hamiltonian_superop(&self.hamiltonian(u)?);
        Ok(match &self.dissipator {
            Some(d) => &gen + d,
            None => gen,
        })
    }
}

/// One propagator `exp(L_S(u_k) dt)` per row of the schedule.
pub fn system_propagators(
    builder: &dyn HamiltonianBuilder,
    schedule: &ControlSchedule,
) -> Result<Vec<SuperOp>> {
    if schedule.n_controls() != builder.n_controls() {
        return Err(Error::Dimension(format!(
            "schedule has {} channels, Hamiltonian expects {}",
            schedule.n_controls(),
            builder.n_controls()
        )));
    }
    (0..schedule.steps())
        .map(|k| {
            let row = schedule.values.row(k).to_vec();
            step_propagator(&builder.generator(&row)?, schedule.dt)
        })
        .collect()
}
