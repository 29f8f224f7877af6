// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Transfer tensors extracted from a sequence of dynamical maps.
//!
//! With stationary memory, `rho_k = sum_{m=1}^{k} T_m rho_{k-m}`, and the tensors
//! follow from the maps by `T_k = E_k - sum_{m=1}^{k-1} T_m E_{k-m}`.

use std::collections::VecDeque;
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::liouville::{DensityVec, SuperOp};
use crate::ptmpo::ProcessTensor;

/// Largest tolerated trace defect of a dynamical map.
pub const TRACE_TOL: f64 = 1e-8;

/// Relative deviation between propagators treated as the same system step.
pub const PROPAGATOR_TOL: f64 = 1e-12;

/// `E_1..E_K`, each mapping `rho_0` to `rho_k` under a fixed system step.
#[derive(Clone, Debug)]
pub struct DynamicalMapSeq {
    pub maps: Vec<SuperOp>,
    pub dt: f64,
    pub propagator: SuperOp,
    pub provenance: String,
}

impl DynamicalMapSeq {
    pub fn new(maps: Vec<SuperOp>, dt: f64, propagator: SuperOp, provenance: impl Into<String>) -> Result<Self> {
        let l = propagator.dim();
        let s = (l as f64).sqrt().round() as usize;
        if s * s != l {
            return Err(Error::Dimension(format!("Liouville dimension {l} is not a square")));
        }
        for (k, e) in maps.iter().enumerate() {
            if e.dim() != l {
                return Err(Error::Dimension(format!("map {} has dimension {}, expected {l}", k + 1, e.dim())));
            }
            let defect = trace_defect(e, s);
            if defect > TRACE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "map {} is not trace preserving (defect {defect:.3e})",
                    k + 1
                )));
            }
        }
        Ok(Self { maps, dt, propagator, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// `max_j |sum_i E[i + s i, j] - tr(e_j)|`.
fn trace_defect(e: &SuperOp, s: usize) -> f64 {
    let l = s * s;
    (0..l)
        .map(|j| {
            let tr: C64 = (0..s).map(|i| e.data[[i + s * i, j]]).sum();
            let want = if j % (s + 1) == 0 { 1.0 } else { 0.0 };
            (tr - want).norm()
        })
        .fold(0.0, f64::max)
}

/// Maps obtained by running the process tensor from each Liouville basis vector
/// with `prop` applied at every step.
pub fn maps_from_pt(pt: &ProcessTensor, prop: &SuperOp) -> Result<DynamicalMapSeq> {
    let l = pt.liouville_dim();
    if prop.dim() != l {
        return Err(Error::Dimension(format!("propagator has dimension {}, expected {l}", prop.dim())));
    }
    let props = vec![prop.clone(); pt.steps()];
    let mut maps = vec![Array2::<C64>::zeros((l, l)); pt.steps()];
    for j in 0..l {
        let mut e = Array1::zeros(l);
        e[j] = linalg::ONE;
        let traj = pt.trajectory(&props, &DensityVec::new(e))?;
        for (k, r) in traj.iter().skip(1).enumerate() {
            maps[k].column_mut(j).assign(&r.data);
        }
    }
    let maps = maps.into_iter().map(|m| SuperOp { data: m }).collect();
    DynamicalMapSeq::new(maps, pt.dt, prop.clone(), pt.provenance.clone())
}

/// `y += a x`.
fn accumulate(a: &Array2<C64>, x: &Array1<C64>, y: &mut Array1<C64>) {
    match (a.as_slice(), x.as_slice(), y.as_slice_mut()) {
        (Some(a), Some(x), Some(y)) => {
            let n = x.len();
            for (row, yi) in a.chunks_exact(n).zip(y.iter_mut()) {
                *yi += row.iter().zip(x).map(|(p, q)| p * q).sum::<C64>();
            }
        }
        _ => *y += &a.dot(x),
    }
}

#[derive(Clone, Debug)]
pub struct TransferTensorSet {
    pub tensors: Vec<SuperOp>,
    pub dt: f64,
    /// System step the tensors were extracted with.
    pub propagator: SuperOp,
}

/// First `cutoff` transfer tensors. Requires `cutoff <= maps.len()`.
pub fn extract(maps: &DynamicalMapSeq, cutoff: usize) -> Result<TransferTensorSet> {
    if cutoff == 0 || cutoff > maps.len() {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} outside 1..={} available maps",
            maps.len()
        )));
    }
    let mut tensors: Vec<SuperOp> = Vec::with_capacity(cutoff);
    for k in 1..=cutoff {
        let mut t = maps.maps[k - 1].data.clone();
        for m in 1..k {
            t = t - tensors[m - 1].data.dot(&maps.maps[k - m - 1].data);
        }
        tensors.push(SuperOp { data: t });
    }
    Ok(TransferTensorSet { tensors, dt: maps.dt, propagator: maps.propagator.clone() })
}

impl TransferTensorSet {
    pub fn cutoff(&self) -> usize {
        self.tensors.len()
    }

    pub fn liouville_dim(&self) -> usize {
        self.propagator.dim()
    }

    /// Same set restricted to the first `cutoff` tensors.
    pub fn truncated(&self, cutoff: usize) -> Result<Self> {
        if cutoff == 0 || cutoff > self.cutoff() {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff} outside 1..={}", self.cutoff())));
        }
        Ok(Self { tensors: self.tensors[..cutoff].to_vec(), dt: self.dt, propagator: self.propagator.clone() })
    }

    /// Frobenius norms `||T_1||..||T_C||`.
    pub fn norm_profile(&self) -> Vec<f64> {
        self.tensors.iter().map(|t| linalg::frobenius(&t.data.view())).collect()
    }

    /// Last `k` with `||T_k|| >= rel * ||T_1||`, or `None` when that is the final tensor.
    pub fn memory_time(&self, rel: f64) -> Option<usize> {
        let norms = self.norm_profile();
        let thr = rel * norms[0];
        let mut k = norms.len();
        while k > 1 && norms[k - 1] < thr {
            k -= 1;
        }
        (k < norms.len()).then_some(k)
    }

    /// Errors unless `prop` is the system step used for training.
    pub fn check_propagator(&self, prop: &SuperOp) -> Result<()> {
        if prop.dim() != self.liouville_dim() {
            return Err(Error::Dimension(format!(
                "propagator has dimension {}, expected {}",
                prop.dim(),
                self.liouville_dim()
            )));
        }
        let scale = linalg::one_norm(&self.propagator.data.view()).max(1.0);
        let deviation = linalg::max_abs_diff(&prop.data.view(), &self.propagator.data.view()) / scale;
        if deviation > PROPAGATOR_TOL {
            return Err(Error::PropagatorMismatch { deviation });
        }
        Ok(())
    }

    /// `rho_0..rho_steps` with `rho_{k+1} = sum_{m=1}^{min(k+1, C)} T_m rho_{k+1-m}`.
    pub fn propagate(&self, rho0: &DensityVec, steps: usize) -> Result<Vec<DensityVec>> {
        let l = self.liouville_dim();
        if rho0.len() != l {
            return Err(Error::Dimension(format!("initial state has length {}, expected {l}", rho0.len())));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("at least one step is required".into()));
        }
        let c = self.cutoff();
        let mut history: VecDeque<Array1<C64>> = VecDeque::with_capacity(c);
        history.push_front(rho0.data.clone());
        let mut out = Vec::with_capacity(steps + 1);
        out.push(rho0.clone());
        for k in 1..=steps {
            // history[m - 1] holds rho_{k-m}
            let mut next = Array1::<C64>::zeros(l);
            for (t, r) in self.tensors.iter().zip(history.iter()) {
                accumulate(&t.data, r, &mut next);
            }
            if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite { step: k, what: "transfer tensor propagation".into() });
            }
            if history.len() == c {
                history.pop_back();
            }
            history.push_front(next.clone());
            out.push(DensityVec::new(next));
        }
        Ok(out)
    }

    /// As [`propagate`](Self::propagate), refusing a system step other than the training one.
    pub fn propagate_with(&self, prop: &SuperOp, rho0: &DensityVec, steps: usize) -> Result<Vec<DensityVec>> {
        self.check_propagator(prop)?;
        self.propagate(rho0, steps)
    }

    /// Reverse sweep for the terminal cost `Z = Re(c . rho_steps)`.
    ///
    /// Returns `lambda_0..lambda_steps` with `lambda_j = dZ/drho_j` (holomorphic
    /// row convention) and the gradient with respect to each tensor,
    /// `dZ/dT_m = sum_k lambda_k^T rho_{k-m}^T`.
    pub fn adjoint(
        &self,
        trajectory: &[DensityVec],
        c: &Array1<C64>,
    ) -> Result<(Vec<Array1<C64>>, Vec<Array2<C64>>)> {
        let l = self.liouville_dim();
        if trajectory.len() < 2 {
            return Err(Error::InvalidParameter("trajectory needs at least one step".into()));
        }
        if c.len() != l {
            return Err(Error::Dimension(format!("cost vector has length {}, expected {l}", c.len())));
        }
        let steps = trajectory.len() - 1;
        let mut lam = vec![Array1::<C64>::zeros(l); steps + 1];
        lam[steps] = c.clone();
        let mut grads = vec![Array2::<C64>::zeros((l, l)); self.cutoff()];
        for k in (1..=steps).rev() {
            let lk = lam[k].clone();
            for m in 1..=self.cutoff().min(k) {
                let t = &self.tensors[m - 1].data;
                lam[k - m] = &lam[k - m] + &lk.dot(t);
                let r = &trajectory[k - m].data;
                let g = &mut grads[m - 1];
                for a in 0..l {
                    for b in 0..l {
                        g[[a, b]] += lk[a] * r[b];
                    }
                }
            }
        }
        Ok((lam, grads))
    }

    /// Writes `k,t,norm` rows.
    pub fn write_norm_profile_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
        w.write_record(["k", "t", "norm"]).map_err(|e| Error::Format(e.to_string()))?;
        for (k, n) in self.norm_profile().iter().enumerate() {
            let k = k + 1;
            w.write_record([k.to_string(), (k as f64 * self.dt).to_string(), n.to_string()])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
