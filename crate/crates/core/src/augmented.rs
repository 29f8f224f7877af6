// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Pseudomode embedding: the system couples to damped bosonic modes through
//! `S ⊗ g (b + b^dagger)` and the modes are traced out at the end.
//!
//! Joint vectors use the index `alpha * L + mu`, with `alpha` running over the
//! auxiliary Liouville space (product of per-mode vectorizations, the first
//! mode slowest) and `mu` over the system Liouville space.

use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::bath::SpectralDensity;
use crate::error::{Error, Result};
use crate::linalg::{self, kron, ONE, ZERO};
use crate::liouville::{hamiltonian_superop, left_mul, lindblad_superop, right_mul, QOperator};
use crate::ptmpo::{ProcessTensor, PtNode};

/// Edge population above which the Fock truncation is considered too small.
pub const FOCK_LEAKAGE_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxMode {
    pub g: f64,
    pub omega0: f64,
    pub kappa: f64,
    /// Fock truncation.
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryModel {
    pub modes: Vec<AuxMode>,
}

impl AuxiliaryModel {
    pub fn new(modes: Vec<AuxMode>) -> Result<Self> {
        for (k, m) in modes.iter().enumerate() {
            if m.d == 0 {
                return Err(Error::InvalidParameter(format!("mode {k} has Fock truncation 0")));
            }
            if !(m.kappa >= 0.0) || !m.g.is_finite() || !m.omega0.is_finite() || !m.kappa.is_finite() {
                return Err(Error::InvalidParameter(format!("mode {k} has invalid parameters {m:?}")));
            }
        }
        Ok(Self { modes })
    }

    /// Single mode whose zero-temperature correlation equals that of a Lorentzian density.
    pub fn from_lorentzian(j: &SpectralDensity, d: usize) -> Result<Self> {
        match *j {
            SpectralDensity::Lorentzian { coupling, center, width } => {
                Self::new(vec![AuxMode { g: coupling, omega0: center, kappa: width, d }])
            }
            _ => Err(Error::InvalidParameter("pseudomode matching needs a Lorentzian density".into())),
        }
    }

    /// Same model with every truncation replaced by `d`.
    pub fn with_truncation(&self, d: usize) -> Result<Self> {
        Self::new(self.modes.iter().map(|m| AuxMode { d, ..*m }).collect())
    }

    /// Auxiliary Hilbert dimension `prod d_i`.
    pub fn hilbert_dim(&self) -> usize {
        self.modes.iter().map(|m| m.d).product()
    }

    /// Auxiliary Liouville dimension `A = prod d_i^2`.
    pub fn liouville_dim(&self) -> usize {
        self.modes.iter().map(|m| m.d * m.d).product()
    }

    /// Embeds a single-mode superoperator at position `k` of the product space.
    fn embed(&self, k: usize, op: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::from_elem((1, 1), ONE);
        for (i, m) in self.modes.iter().enumerate() {
            let f = if i == k { op.clone() } else { linalg::identity(m.d * m.d) };
            out = kron(&out.view(), &f.view());
        }
        out
    }

    /// Mode generator: `omega0 b^dagger b` plus damping `kappa D[b]`.
    pub fn mode_generator(&self) -> Result<Array2<C64>> {
        let a = self.liouville_dim();
        let mut out = Array2::<C64>::zeros((a, a));
        for (k, m) in self.modes.iter().enumerate() {
            let b = QOperator::annihilation(m.d);
            let n = QOperator { data: b.dagger().data.dot(&b.data) };
            let mut single = hamiltonian_superop(&n.scaled(m.omega0)).data;
            single = single + lindblad_superop(&[b], &[m.kappa])?.data;
            out = out + self.embed(k, &single);
        }
        Ok(out)
    }

    fn quadratures(&self) -> Vec<QOperator> {
        self.modes
            .iter()
            .map(|m| {
                let b = QOperator::annihilation(m.d);
                QOperator { data: &b.data + &b.dagger().data }
            })
            .collect()
    }

    /// Full generator on the joint space, without the system Hamiltonian.
    pub fn joint_generator(&self, s_op: &QOperator) -> Result<Array2<C64>> {
        let l = s_op.dim() * s_op.dim();
        let la = left_mul(s_op).data;
        let ra = right_mul(s_op).data;
        let mut gen = kron(&self.mode_generator()?.view(), &linalg::identity(l).view());
        for (k, (m, x)) in self.modes.iter().zip(self.quadratures()).enumerate() {
            let lx = self.embed(k, &left_mul(&x).data);
            let rx = self.embed(k, &right_mul(&x).data);
            let coupling = kron(&lx.view(), &la.view()) - kron(&rx.view(), &ra.view());
            gen.scaled_add(C64::new(0.0, -m.g), &coupling);
        }
        Ok(gen)
    }

    /// `vec(|0><0|)` over the auxiliary Liouville space.
    pub fn vacuum(&self) -> Array1<C64> {
        let mut v = Array1::zeros(self.liouville_dim());
        v[0] = ONE;
        v
    }

    /// Trace functional over the auxiliary Liouville space.
    pub fn trace_functional(&self) -> Array1<C64> {
        let mut out = Array1::from_elem(1, ONE);
        for m in &self.modes {
            let t = Array1::from_shape_fn(m.d * m.d, |idx| if idx % m.d == idx / m.d { ONE } else { ZERO });
            out = Array1::from_iter(out.iter().flat_map(|&a| t.iter().map(move |&b| a * b)));
        }
        out
    }

    /// Largest normalized population of the top Fock level over all modes, for a
    /// joint state `sigma[alpha, mu]`.
    pub fn edge_population(&self, sigma: &Array2<C64>) -> f64 {
        let sdim = (sigma.ncols() as f64).sqrt().round() as usize;
        let sys_trace = Array1::from_shape_fn(sigma.ncols(), |mu| if mu % sdim == mu / sdim { ONE } else { ZERO });
        let rho_a = sigma.dot(&sys_trace);
        let total = self.trace_functional().dot(&rho_a).norm();
        if total == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for k in 0..self.modes.len() {
            if self.modes[k].d == 1 {
                // The coupling vanishes on a vacuum-only mode, so nothing can leak.
                continue;
            }
            let mut edge = C64::new(0.0, 0.0);
            for (alpha, v) in rho_a.iter().enumerate() {
                // Every mode must be on its diagonal; mode k must sit at the top level.
                let mut rem = alpha;
                let mut diag = true;
                let mut top = false;
                for (i, m) in self.modes.iter().enumerate().rev() {
                    let local = rem % (m.d * m.d);
                    rem /= m.d * m.d;
                    let (r, c) = (local % m.d, local / m.d);
                    diag &= r == c;
                    if i == k {
                        top = r == m.d - 1;
                    }
                }
                if diag && top {
                    edge += v;
                }
            }
            worst = worst.max(edge.norm() / total);
        }
        worst
    }

    /// `g^2 Tr[X exp(L_A t) (X rho_vac)]` for the first mode, computed in the
    /// truncated auxiliary space.
    pub fn correlation(&self, t: f64) -> Result<C64> {
        let m = self.modes.first().ok_or_else(|| Error::InvalidParameter("model has no modes".into()))?;
        if t < 0.0 {
            return Ok(self.correlation(-t)?.conj());
        }
        let x = &self.quadratures()[0];
        let lx = self.embed(0, &left_mul(x).data);
        let start = lx.dot(&self.vacuum());
        let evolved = if t == 0.0 {
            start
        } else {
            let e = linalg::expm(&self.mode_generator()?.mapv(|z| z * t).view())?;
            e.dot(&start)
        };
        Ok(self.trace_functional().dot(&lx.dot(&evolved)) * (m.g * m.g))
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn joint_exponential(model: &AuxiliaryModel, s_op: &QOperator, dt: f64) -> Result<Array2<C64>> {
    check_dt(dt)?;
    if !s_op.is_hermitian() {
        log::warn!("coupling operator is not Hermitian");
    }
    let gen = model.joint_generator(s_op)?.mapv(|z| z * dt);
    let e = linalg::expm(&gen.view())?;
    if !linalg::all_finite(&e.view()) {
        return Err(Error::NonFinite { step: 0, what: "auxiliary propagator".into() });
    }
    Ok(e)
}

/// Checks the edge population along `steps` environment-only steps from the vacuum.
fn leakage_probe(model: &AuxiliaryModel, e: &Array2<C64>, l: usize, steps: usize) -> Result<()> {
    let a = model.liouville_dim();
    let sdim = (l as f64).sqrt().round() as usize;
    for basis in 0..sdim {
        let mut v = Array1::<C64>::zeros(a * l);
        v[basis * sdim + basis] = ONE;
        for _ in 0..steps.max(1) {
            v = e.dot(&v);
            let sigma = v.clone().into_shape_with_order((a, l)).expect("joint state");
            let p = model.edge_population(&sigma);
            if p > FOCK_LEAKAGE_LIMIT {
                return Err(Error::FockOverflow { population: p, limit: FOCK_LEAKAGE_LIMIT });
            }
        }
    }
    Ok(())
}

/// Interior node `exp(dt (L_A + L_SA))` with bond dimension `A`.
pub fn augmented_step_tensor(model: &AuxiliaryModel, s_op: &QOperator, dt: f64) -> Result<PtNode> {
    let l = s_op.dim() * s_op.dim();
    let a = model.liouville_dim();
    let e = joint_exponential(model, s_op, dt)?;
    leakage_probe(model, &e, l, 1)?;
    PtNode::dense(a, a, l, e)
}

/// Process tensor of the pseudomode environment with the modes starting in the vacuum.
///
/// The leakage check follows the environment for the full horizon with the
/// system frozen in each of its basis populations.
pub fn augmented_pt(model: &AuxiliaryModel, s_op: &QOperator, dt: f64, steps: usize) -> Result<ProcessTensor> {
    let l = s_op.dim() * s_op.dim();
    let a = model.liouville_dim();
    let e = joint_exponential(model, s_op, dt)?;
    leakage_probe(model, &e, l, steps)?;
    let tr = model.trace_functional();
    // vacuum is the first auxiliary basis vector, so the first node keeps the leading L columns
    let head = e.slice(s![.., ..l]).to_owned();
    let trace_rows = |m: &Array2<C64>| -> Array2<C64> {
        let cols = m.ncols();
        let mut out = Array2::<C64>::zeros((l, cols));
        for (alpha, &w) in tr.iter().enumerate() {
            if w != ZERO {
                out.scaled_add(w, &m.slice(s![alpha * l..(alpha + 1) * l, ..]));
            }
        }
        out
    };
    let mut nodes = Vec::with_capacity(steps);
    if steps == 1 {
        nodes.push(Arc::new(PtNode::dense(1, 1, l, trace_rows(&head))?));
    } else if steps > 1 {
        let interior = Arc::new(PtNode::dense(a, a, l, e.clone())?);
        nodes.push(Arc::new(PtNode::dense(a, 1, l, head)?));
        for _ in 1..steps - 1 {
            nodes.push(interior.clone());
        }
        nodes.push(Arc::new(PtNode::dense(1, a, l, trace_rows(&e))?));
    }
    let mut caps = Vec::with_capacity(steps + 1);
    caps.push(Array1::from_elem(1, ONE));
    for _ in 1..steps {
        caps.push(tr.clone());
    }
    if steps > 0 {
        caps.push(Array1::from_elem(1, ONE));
    }
    let desc: Vec<String> = model.modes.iter().map(|m| format!("d={}", m.d)).collect();
    ProcessTensor::new(nodes, dt, s_op.dim(), Some(caps), format!("pseudomode({})", desc.join(",")))
}
