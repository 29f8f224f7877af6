// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Adjoint gradients through a process tensor and terminal-cost optimization.
//!
//! The cost is `Z = 1 - Re <<target|rho_T>>`. Costates pair bilinearly with
//! extended states, `Z - 1 = Re sum lambda_k[a, mu] sigma_k[a, mu]` at every
//! step, so that `dZ/dU_q = Re sum G_q * dU_q` with `G_q = w_q^T sigma_{q-1}`
//! and `w_q = O_q^T lambda_q`.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::liouville::{step_propagator, system_propagators, DensityVec, HamiltonianBuilder};
use crate::ptmpo::{step_backward, ExtendedState, ProcessTensor};

/// Piecewise-constant controls, one row per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSchedule {
    pub values: Array2<f64>,
    pub dt: f64,
    pub labels: Vec<String>,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl ControlSchedule {
    pub fn new(values: Array2<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0, what: "control values".into() });
        }
        let labels = (0..values.ncols()).map(|m| format!("u{m}")).collect();
        Ok(Self { values, dt, labels, bounds: None })
    }

    pub fn zeros(steps: usize, channels: usize, dt: f64) -> Self {
        Self::new(Array2::zeros((steps, channels)), dt).unwrap()
    }

    pub fn constant(steps: usize, row: &[f64], dt: f64) -> Self {
        let values = Array2::from_shape_fn((steps, row.len()), |(_, m)| row[m]);
        Self::new(values, dt).unwrap()
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.n_controls() {
            return Err(Error::Dimension(format!(
                "{} bounds for {} channels",
                bounds.len(),
                self.n_controls()
            )));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidParameter(format!("empty bound interval [{lo}, {hi}]")));
        }
        self.bounds = Some(bounds);
        self.project();
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_controls() {
            return Err(Error::Dimension(format!("{} labels for {} channels", labels.len(), self.n_controls())));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.values.ncols()
    }

    /// Clamps every value into its channel's box.
    pub fn project(&mut self) {
        if let Some(b) = &self.bounds {
            for mut row in self.values.rows_mut() {
                for (v, (lo, hi)) in row.iter_mut().zip(b) {
                    *v = v.clamp(*lo, *hi);
                }
            }
        }
    }

    /// Writes `step,t,<labels...>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (k, row) in self.values.rows().into_iter().enumerate() {
            let mut rec = vec![k.to_string(), format!("{}", k as f64 * self.dt)];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// `lambda[a, mu]` at step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Costate {
    pub data: Array2<C64>,
    pub step: usize,
}

#[derive(Clone, Debug)]
pub struct GradientReport {
    /// `dZ/dU_q` for `q = 1..T`, indexed `[output, input]`.
    pub d_z_d_props: Vec<Array2<C64>>,
    /// `dZ/du`, one row per step.
    pub d_z_du: Array2<f64>,
    pub cost: f64,
}

fn check_states(rho: &DensityVec, target: &DensityVec) -> Result<()> {
    if rho.len() != target.len() {
        return Err(Error::Dimension(format!(
            "state has length {}, target has length {}",
            rho.len(),
            target.len()
        )));
    }
    Ok(())
}

/// `Z = 1 - Re <<target|rho_T>>`.
pub fn terminal_cost(rho_t: &DensityVec, target: &DensityVec) -> Result<f64> {
    check_states(rho_t, target)?;
    let overlap: C64 = target.data.iter().zip(rho_t.data.iter()).map(|(t, r)| t.conj() * r).sum();
    Ok(1.0 - overlap.re)
}

/// Terminal costate `-conj(target)` as a `1 x L` row, so that `Z = 1 + Re lambda_T . rho_T`.
pub fn terminal_costate(target: &DensityVec, steps: usize) -> Costate {
    let l = target.len();
    let data = target.data.mapv(|z| -z.conj()).into_shape_with_order((1, l)).expect("row");
    Costate { data, step: steps }
}

/// Bilinear pairing `sum lambda[a, mu] sigma[a, mu]`.
pub fn pairing(lambda: &Costate, sigma: &ExtendedState) -> Result<C64> {
    if lambda.data.dim() != sigma.data.dim() {
        return Err(Error::Dimension(format!(
            "costate {:?} and extended state {:?} differ in shape",
            lambda.data.dim(),
            sigma.data.dim()
        )));
    }
    Ok(lambda.data.iter().zip(sigma.data.iter()).map(|(a, b)| a * b).sum())
}

/// Backward sweep from `lambda_T`. The result is ordered by step, `lambda_0..lambda_T`.
pub fn backpropagate(
    pt: &ProcessTensor,
    props: &[crate::liouville::SuperOp],
    lambda_t: &Costate,
) -> Result<Vec<Costate>> {
    let t = pt.steps();
    let l = pt.liouville_dim();
    if props.len() != t {
        return Err(Error::Dimension(format!("{} propagators for {t} steps", props.len())));
    }
    if lambda_t.data.dim() != (1, l) {
        return Err(Error::Dimension(format!(
            "terminal costate has shape {:?}, expected (1, {l})",
            lambda_t.data.dim()
        )));
    }
    let mut out = vec![Costate { data: Array2::zeros((0, 0)), step: 0 }; t + 1];
    out[t] = Costate { data: lambda_t.data.clone(), step: t };
    let mut lam = lambda_t.data.clone();
    for k in (1..=t).rev() {
        let node = &pt.nodes[k - 1];
        let u = &props[k - 1];
        if u.dim() != l {
            return Err(Error::Dimension(format!("propagator {} has dimension {}, expected {l}", k - 1, u.dim())));
        }
        if lam.nrows() != node.chi_out() {
            return Err(Error::Dimension(format!(
                "costate at step {k} has bond {}, node expects {}",
                lam.nrows(),
                node.chi_out()
            )));
        }
        let (_, prev) = step_backward(node, &u.data, &lam);
        if prev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { step: k - 1, what: "costate".into() });
        }
        lam = prev;
        out[k - 1] = Costate { data: lam.clone(), step: k - 1 };
    }
    Ok(out)
}

/// `dZ/dU_q = w_q^T sigma_{q-1}` for every step.
pub fn gradient_wrt_propagators(
    states: &[ExtendedState],
    costates: &[Costate],
    pt: &ProcessTensor,
) -> Result<Vec<Array2<C64>>> {
    let t = pt.steps();
    if states.len() != t + 1 || costates.len() != t + 1 {
        return Err(Error::Dimension(format!(
            "{} states and {} costates for {t} steps",
            states.len(),
            costates.len()
        )));
    }
    (1..=t)
        .map(|q| {
            let node = &pt.nodes[q - 1];
            let lam = &costates[q].data;
            if lam.nrows() != node.chi_out() || states[q - 1].chi() != node.chi_in() {
                return Err(Error::Dimension(format!("bond mismatch at step {q}")));
            }
            let w = node.apply_transpose(lam);
            Ok(w.t().dot(&states[q - 1].data))
        })
        .collect()
}

fn fd_step_size(schedule: &ControlSchedule, fd_step: f64) -> f64 {
    let scale = schedule.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    fd_step * scale
}

/// Chain rule through central differences of the step propagators.
pub fn gradient_wrt_controls(
    grads: &[Array2<C64>],
    builder: &dyn HamiltonianBuilder,
    schedule: &ControlSchedule,
    fd_step: f64,
) -> Result<Array2<f64>> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {fd_step}")));
    }
    let (t, m) = (schedule.steps(), schedule.n_controls());
    if grads.len() != t {
        return Err(Error::Dimension(format!("{} gradient blocks for {t} steps", grads.len())));
    }
    if builder.n_controls() != m {
        return Err(Error::Dimension(format!(
            "schedule has {m} channels, Hamiltonian expects {}",
            builder.n_controls()
        )));
    }
    let h = fd_step_size(schedule, fd_step);
    let entries: Vec<f64> = (0..t * m)
        .into_par_iter()
        .map(|idx| {
            let (q, c) = (idx / m, idx % m);
            let mut row = schedule.values.row(q).to_vec();
            let base = row[c];
            row[c] = base + h;
            let plus = step_propagator(&builder.generator(&row)?, schedule.dt)?;
            row[c] = base - h;
            let minus = step_propagator(&builder.generator(&row)?, schedule.dt)?;
            let g = &grads[q];
            let mut acc = 0.0;
            for ((gv, p), mi) in g.iter().zip(plus.data.iter()).zip(minus.data.iter()) {
                acc += (gv * (p - mi)).re;
            }
            let v = acc / (2.0 * h);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { step: q, what: format!("control gradient of channel {c}") })
            }
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_vec((t, m), entries).expect("shape"))
}

/// Cost and gradients for one schedule.
pub fn evaluate(
    pt: &ProcessTensor,
    builder: &dyn HamiltonianBuilder,
    schedule: &ControlSchedule,
    rho0: &DensityVec,
    target: &DensityVec,
    fd_step: f64,
) -> Result<GradientReport> {
    check_states(rho0, target)?;
    let props = system_propagators(builder, schedule)?;
    let (fin, states) = pt.contract_forward(&props, rho0)?;
    let cost = terminal_cost(&fin, target)?;
    let costates = backpropagate(pt, &props, &terminal_costate(target, pt.steps()))?;
    let d_z_d_props = gradient_wrt_propagators(&states, &costates, pt)?;
    let d_z_du = gradient_wrt_controls(&d_z_d_props, builder, schedule, fd_step)?;
    Ok(GradientReport { d_z_d_props, d_z_du, cost })
}

/// Cost alone.
pub fn cost_only(
    pt: &ProcessTensor,
    builder: &dyn HamiltonianBuilder,
    schedule: &ControlSchedule,
    rho0: &DensityVec,
    target: &DensityVec,
) -> Result<f64> {
    let props = system_propagators(builder, schedule)?;
    terminal_cost(&pt.propagate(&props, rho0)?, target)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Step size; `None` means `0.05 * scale`.
    pub learning_rate: Option<f64>,
    /// Control scale; `None` derives it from the bounds or the initial schedule.
    pub scale: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub grad_tol: f64,
    pub cost_tol: f64,
    pub max_increases: usize,
    pub fd_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            learning_rate: None,
            scale: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_tol: 1e-8,
            cost_tol: 1e-10,
            max_increases: 20,
            fd_step: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

/// Adam on the schedule with box projection. Returns the lowest-cost schedule
/// seen and the per-iteration history.
pub fn optimize(
    pt: &ProcessTensor,
    builder: &dyn HamiltonianBuilder,
    schedule0: &ControlSchedule,
    rho0: &DensityVec,
    target: &DensityVec,
    opts: &OptimizeOptions,
) -> Result<(ControlSchedule, Vec<HistoryEntry>)> {
    if opts.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    let scale = opts.scale.unwrap_or_else(|| match &schedule0.bounds {
        Some(b) => b.iter().fold(0.0f64, |m, (lo, hi)| m.max(lo.abs()).max(hi.abs())).max(f64::MIN_POSITIVE),
        None => schedule0.values.iter().fold(1.0f64, |m, v| m.max(v.abs())),
    });
    let lr = opts.learning_rate.unwrap_or(0.05 * scale);
    let mut sched = schedule0.clone();
    sched.project();
    let shape = sched.values.dim();
    let mut m1 = Array2::<f64>::zeros(shape);
    let mut m2 = Array2::<f64>::zeros(shape);
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, sched.clone());
    let mut prev_cost = f64::INFINITY;
    let mut increases = 0;
    let start = Instant::now();
    for it in 0..opts.max_iters {
        let rep = evaluate(pt, builder, &sched, rho0, target, opts.fd_step)?;
        let gnorm = rep.d_z_du.iter().map(|g| g * g).sum::<f64>().sqrt();
        history.push(HistoryEntry {
            iteration: it,
            cost: rep.cost,
            grad_norm: gnorm,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        log::debug!("iteration {it}: cost {:.6e}, |grad| {gnorm:.3e}", rep.cost);
        if rep.cost < best.0 {
            best = (rep.cost, sched.clone());
        }
        if rep.cost > prev_cost {
            increases += 1;
            if increases >= opts.max_increases {
                return Err(Error::CostIncrease { iterations: increases, cost: rep.cost });
            }
        } else {
            increases = 0;
        }
        prev_cost = rep.cost;
        if rep.cost <= opts.cost_tol || gnorm < opts.grad_tol {
            break;
        }
        let k = (it + 1) as i32;
        let c1 = 1.0 - opts.beta1.powi(k);
        let c2 = 1.0 - opts.beta2.powi(k);
        for ((v, g), (a, b)) in sched
            .values
            .iter_mut()
            .zip(rep.d_z_du.iter())
            .zip(m1.iter_mut().zip(m2.iter_mut()))
        {
            *a = opts.beta1 * *a + (1.0 - opts.beta1) * g;
            *b = opts.beta2 * *b + (1.0 - opts.beta2) * g * g;
            *v -= lr * (*a / c1) / ((*b / c2).sqrt() + opts.epsilon);
        }
        sched.project();
    }
    Ok((best.1, history))
}

/// Writes `iteration,cost,grad_norm,wall_ms`.
pub fn write_history_csv(history: &[HistoryEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iteration", "cost", "grad_norm", "wall_ms"]).map_err(csv_err)?;
    for h in history {
        w.write_record(&[
            h.iteration.to_string(),
            format!("{}", h.cost),
            format!("{}", h.grad_norm),
            format!("{:.3}", h.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
