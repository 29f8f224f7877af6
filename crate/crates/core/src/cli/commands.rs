// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Subcommand implementations. Each `cmd_*` writes its files into the output
//! directory; the library-level helpers return the data instead.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::config::{MethodConfig, RunConfig, SpectralConfig};
use crate::bath::{correlation, correlation_samples, discretize, fit_exponentials, BathCorrelation, FitOptions};
use crate::control::{evaluate, optimize, write_history_csv, ControlSchedule, HistoryEntry, OptimizeOptions};
use crate::error::{Error, Result};
use crate::heom::{build_generator, heom_pt, DEFAULT_AUX_CEILING};
use crate::liouville::{
    hamiltonian_superop, step_propagator, DensityVec, LinearControlHamiltonian, QOperator, SuperOp,
};
use crate::ptmpo::{CompressionReport, ProcessTensor};
use crate::stochastic::{batch_estimate, sample_noise, stochastic_pt, NoiseEnsemble};
use crate::{augmented, tdvp, ttm};

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

pub(crate) fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Built process tensor together with what happened on the way.
pub struct BuiltPt {
    pub pt: ProcessTensor,
    pub profile_built: Vec<usize>,
    pub compression: Option<CompressionReport>,
    pub build_seconds: f64,
    /// Noise ensemble, kept for batch error estimates.
    pub ensemble: Option<NoiseEnsemble>,
}

fn bath_correlation(cfg: &RunConfig) -> Result<BathCorrelation> {
    let MethodConfig::Heom { terms, fit_mode, fit_window, fit_samples, fit_tolerance, .. } = cfg.method()? else {
        unreachable!("called for heom only")
    };
    let bath = cfg.bath()?;
    if let SpectralConfig::Lorentzian { coupling, center, width } = &bath.spectral {
        if bath.temperature == 0.0 {
            return BathCorrelation::lorentzian_exact(*coupling, *center, *width);
        }
    }
    let samples = correlation_samples(&bath.spectral()?, bath.temperature, *fit_window, *fit_samples)?;
    let opts = FitOptions { mode: *fit_mode, seed: cfg.seed, residual_ceiling: *fit_tolerance, ..FitOptions::default() };
    let (corr, report) = fit_exponentials(&samples, *terms, &opts)?;
    log::info!("fitted {terms} exponentials, relative RMS residual {:.3e}", report.relative_rms);
    Ok(corr)
}

/// Builds the process tensor for a heom, stochastic or augmented method and
/// applies the configured recompression.
pub fn build_pt(cfg: &RunConfig) -> Result<BuiltPt> {
    cfg.validate()?;
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let s_op = model.coupling()?;
    let start = Instant::now();
    let mut ensemble = None;
    let pt = match cfg.method()? {
        MethodConfig::Heom { depth, .. } => {
            let corr = bath_correlation(cfg)?;
            let gen = build_generator(&corr, &s_op, *depth, DEFAULT_AUX_CEILING)?;
            heom_pt(&gen, grid.dt, grid.steps)?
        }
        MethodConfig::Stochastic { n_traj, seed, .. } => {
            let bath = cfg.bath()?;
            let j = bath.spectral()?;
            let c_grid = (0..grid.steps)
                .map(|k| correlation(&j, k as f64 * grid.dt, bath.temperature))
                .collect::<Result<Vec<C64>>>()?;
            let e = sample_noise(&c_grid, *n_traj, grid.dt, grid.steps, seed.unwrap_or(cfg.seed))?;
            let pt = stochastic_pt(&e, &s_op, grid.dt)?;
            ensemble = Some(e);
            pt
        }
        MethodConfig::Augmented { d } => {
            let model = augmented::AuxiliaryModel::from_lorentzian(&cfg.bath()?.spectral()?, *d)?;
            augmented::augmented_pt(&model, &s_op, grid.dt, grid.steps)?
        }
        other => {
            return Err(Error::Config(format!("method {} does not build a process tensor", other.name())));
        }
    };
    let profile_built = pt.bond_profile();
    let (pt, compression) = match &cfg.compression {
        Some(c) => {
            let (small, rep) = pt.recompress(c.eps_rel)?;
            (small, Some(rep))
        }
        None => (pt, None),
    };
    Ok(BuiltPt { pt, profile_built, compression, build_seconds: start.elapsed().as_secs_f64(), ensemble })
}

fn profile_rows(profile: &[usize]) -> Vec<Vec<String>> {
    profile.iter().enumerate().map(|(k, c)| vec![k.to_string(), c.to_string()]).collect()
}

/// Writes the process tensor and `bond_profile.csv`; with recompression also
/// `bond_profile_uncompressed.csv`.
pub fn cmd_build_pt(cfg: &RunConfig) -> Result<BuiltPt> {
    let built = build_pt(cfg)?;
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    let path = cfg.output.pt_path();
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    built.pt.save(&path)?;
    let header = vec!["step".to_string(), "chi".to_string()];
    write_rows(&dir.join("bond_profile.csv"), &header, &profile_rows(&built.pt.bond_profile()))?;
    if built.compression.is_some() {
        write_rows(&dir.join("bond_profile_uncompressed.csv"), &header, &profile_rows(&built.profile_built))?;
    }
    log::info!("wrote {} (max bond {})", path.display(), built.pt.max_bond());
    Ok(built)
}

/// Observable time series.
#[derive(Clone, Debug)]
pub struct DynamicsTable {
    pub dt: f64,
    pub names: Vec<String>,
    /// `values[k][j]` is observable `j` at step `k`.
    pub values: Vec<Vec<C64>>,
    pub trace_defect: Vec<f64>,
    pub states: Option<Vec<DensityVec>>,
}

impl DynamicsTable {
    fn from_states(dt: f64, observables: &[(String, QOperator)], states: Vec<DensityVec>) -> Self {
        let values = states.iter().map(|r| observables.iter().map(|(_, o)| r.expectation(o)).collect()).collect();
        let trace_defect = states.iter().map(|r| (r.trace() - 1.0).norm()).collect();
        Self {
            dt,
            names: observables.iter().map(|(n, _)| n.clone()).collect(),
            values,
            trace_defect,
            states: Some(states),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<C64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[j]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["t".to_string()];
        for n in &self.names {
            header.push(format!("re_{n}"));
            header.push(format!("im_{n}"));
        }
        header.push("trace_defect".into());
        let rows: Vec<Vec<String>> = self
            .values
            .iter()
            .zip(&self.trace_defect)
            .enumerate()
            .map(|(k, (row, d))| {
                let mut r = vec![format!("{}", k as f64 * self.dt)];
                for z in row {
                    r.push(format!("{}", z.re));
                    r.push(format!("{}", z.im));
                }
                r.push(format!("{d}"));
                r
            })
            .collect();
        write_rows(path, &header, &rows)
    }
}

fn drift_step(cfg: &RunConfig) -> Result<SuperOp> {
    let model = cfg.model()?;
    step_propagator(&hamiltonian_superop(&model.drift()?), cfg.grid()?.dt)
}

fn check_pt(cfg: &RunConfig, pt: &ProcessTensor) -> Result<()> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    if pt.system_dim != model.dim {
        return Err(Error::Dimension(format!("process tensor has system dimension {}, model has {}", pt.system_dim, model.dim)));
    }
    if pt.steps() != grid.steps || (pt.dt - grid.dt).abs() > 1e-12 * grid.dt {
        return Err(Error::Dimension(format!(
            "process tensor has {} steps of {}, grid has {} steps of {}",
            pt.steps(),
            pt.dt,
            grid.steps,
            grid.dt
        )));
    }
    Ok(())
}

/// Dynamics under the drift Hamiltonian. `pt` is required for every method
/// except tdvp; for ttm it supplies the dynamical maps.
pub fn dynamics(cfg: &RunConfig, pt: Option<&ProcessTensor>) -> Result<DynamicsTable> {
    cfg.validate()?;
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let need_pt = || pt.ok_or_else(|| Error::Config("this method needs a process tensor file".into()));
    match cfg.method()? {
        MethodConfig::Tdvp { modes, omega_max } => {
            let wq = model.polaron_splitting()?;
            let m = discretize(&cfg.bath()?.spectral()?, *modes, *omega_max)?;
            let traj = tdvp::integrate(&m, &vec![wq; grid.steps], grid.dt)?;
            Ok(DynamicsTable {
                dt: grid.dt,
                names: vec!["x".into()],
                values: traj.iter().map(|s| vec![C64::new(tdvp::magnetization(s), 0.0)]).collect(),
                trace_defect: vec![0.0; traj.len()],
                states: None,
            })
        }
        MethodConfig::Ttm { cutoff, horizon } => {
            let pt = need_pt()?;
            check_pt(cfg, pt)?;
            let u = drift_step(cfg)?;
            let maps = ttm::maps_from_pt(pt, &u)?;
            let set = ttm::extract(&maps, *cutoff)?;
            let states = set.propagate_with(&u, &model.initial()?, horizon.unwrap_or(grid.steps))?;
            Ok(DynamicsTable::from_states(grid.dt, &model.observables()?, states))
        }
        _ => {
            let pt = need_pt()?;
            check_pt(cfg, pt)?;
            let props = vec![drift_step(cfg)?; grid.steps];
            let states = pt.trajectory(&props, &model.initial()?)?;
            Ok(DynamicsTable::from_states(grid.dt, &model.observables()?, states))
        }
    }
}

fn load_pt_if_needed(cfg: &RunConfig) -> Result<Option<ProcessTensor>> {
    if matches!(cfg.method()?, MethodConfig::Tdvp { .. }) {
        return Ok(None);
    }
    Ok(Some(ProcessTensor::load(&cfg.output.pt_path())?))
}

/// Writes `observables.csv`.
pub fn cmd_dynamics(cfg: &RunConfig) -> Result<DynamicsTable> {
    cfg.validate()?;
    let pt = load_pt_if_needed(cfg)?;
    let table = dynamics(cfg, pt.as_ref())?;
    ensure_dir(&cfg.output.dir)?;
    table.write_csv(&cfg.output.dir.join("observables.csv"))?;
    Ok(table)
}

fn control_problem(cfg: &RunConfig) -> Result<(LinearControlHamiltonian, ControlSchedule)> {
    let model = cfg.model()?;
    let opt = cfg.optimize()?;
    let grid = cfg.grid()?;
    let ops = opt.channels.iter().map(|c| c.operator.build(model.dim)).collect::<Result<Vec<_>>>()?;
    let builder = LinearControlHamiltonian::new(model.drift()?, ops)?;
    let row: Vec<f64> = opt.channels.iter().map(|c| c.initial).collect();
    let mut sched = ControlSchedule::constant(grid.steps, &row, grid.dt)
        .with_labels(opt.channels.iter().map(|c| c.label.clone()).collect())?;
    if opt.channels.iter().any(|c| c.bounds.is_some()) {
        let b = opt
            .channels
            .iter()
            .map(|c| c.bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        sched = sched.with_bounds(b)?;
    }
    Ok((builder, sched))
}

/// Optimizes the configured channels against the model target.
pub fn run_optimize(cfg: &RunConfig, pt: &ProcessTensor) -> Result<(ControlSchedule, Vec<HistoryEntry>)> {
    cfg.validate()?;
    check_pt(cfg, pt)?;
    let model = cfg.model()?;
    let target = model.target()?.ok_or_else(|| Error::Config("optimize needs model.target".into()))?;
    let (builder, sched) = control_problem(cfg)?;
    let o = cfg.optimize()?;
    let opts = OptimizeOptions {
        max_iters: o.max_iters,
        learning_rate: o.learning_rate,
        fd_step: o.fd_step,
        ..OptimizeOptions::default()
    };
    optimize(pt, &builder, &sched, &model.initial()?, &target, &opts)
}

/// Writes `schedule.csv` and `history.csv`.
pub fn cmd_optimize(cfg: &RunConfig) -> Result<(ControlSchedule, Vec<HistoryEntry>)> {
    cfg.validate()?;
    cfg.optimize()?;
    if !cfg.method()?.builds_pt() {
        return Err(Error::Config("optimize needs a heom, stochastic or augmented method".into()));
    }
    let pt = ProcessTensor::load(&cfg.output.pt_path())?;
    let (sched, history) = run_optimize(cfg, &pt)?;
    ensure_dir(&cfg.output.dir)?;
    sched.write_csv(&cfg.output.dir.join("schedule.csv"))?;
    write_history_csv(&history, &cfg.output.dir.join("history.csv"))?;
    if let Some(last) = history.last() {
        log::info!("{} iterations, final cost {:.6e}", history.len(), last.cost);
    }
    Ok((sched, history))
}

/// One row of the comparison report.
#[derive(Clone, Debug, Serialize)]
pub struct MethodComparison {
    pub method: String,
    pub config: Option<PathBuf>,
    pub max_bond_built: Option<usize>,
    pub max_bond_recompressed: Option<usize>,
    /// Largest absolute difference of final density-matrix entries from the reference.
    pub final_state_deviation: Option<f64>,
    /// Largest absolute difference of final observable values from the reference.
    pub observable_deviation: f64,
    /// Batch standard error of each final observable (stochastic only).
    pub observable_stderr: Option<Vec<f64>>,
    /// Whether every observable deviation lies within three standard errors.
    pub within_three_sigma: Option<bool>,
    pub build_seconds: f64,
    pub propagation_seconds: f64,
    pub gradient_seconds: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub reference: String,
    pub dt: f64,
    pub steps: usize,
    pub observables: Vec<String>,
    pub methods: Vec<MethodComparison>,
}

struct MethodRun {
    row: MethodComparison,
    final_state: Option<DensityVec>,
    final_observables: Vec<f64>,
}

fn run_method(cfg: &RunConfig, path: Option<&Path>, names: &[String]) -> Result<MethodRun> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let method = cfg.method()?;
    let observables = model.observables()?;
    if let MethodConfig::Tdvp { .. } = method {
        let start = Instant::now();
        let table = dynamics(cfg, None)?;
        let t = start.elapsed().as_secs_f64();
        let x = table.values.last().expect("nonempty")[0].re;
        let final_observables = names.iter().map(|n| if n == "x" { x } else { f64::NAN }).collect();
        return Ok(MethodRun {
            row: MethodComparison {
                method: method.name().into(),
                config: path.map(Path::to_path_buf),
                max_bond_built: None,
                max_bond_recompressed: None,
                final_state_deviation: None,
                observable_deviation: 0.0,
                observable_stderr: None,
                within_three_sigma: None,
                build_seconds: 0.0,
                propagation_seconds: t,
                gradient_seconds: None,
            },
            final_state: None,
            final_observables,
        });
    }
    let built = build_pt(cfg)?;
    let recompressed = match &built.compression {
        Some(_) => built.pt.clone(),
        None => built.pt.recompress(0.0)?.0,
    };
    let rho0 = model.initial()?;
    let props = vec![drift_step(cfg)?; grid.steps];
    let start = Instant::now();
    let fin = built.pt.propagate(&props, &rho0)?;
    let propagation_seconds = start.elapsed().as_secs_f64();
    let gradient_seconds = match model.target()? {
        Some(target) => {
            let (builder, sched) = if cfg.optimize.is_some() {
                control_problem(cfg)?
            } else {
                (LinearControlHamiltonian::new(model.drift()?, vec![])?, ControlSchedule::zeros(grid.steps, 0, grid.dt))
            };
            let start = Instant::now();
            evaluate(&built.pt, &builder, &sched, &rho0, &target, 1e-5)?;
            Some(start.elapsed().as_secs_f64())
        }
        None => None,
    };
    let observable_stderr = match (&built.ensemble, method) {
        (Some(e), MethodConfig::Stochastic { batches, .. }) => Some(
            observables
                .iter()
                .map(|(_, op)| {
                    let (_, se) = batch_estimate(e, &model.coupling()?, &props, &rho0, op, *batches)?;
                    Ok(*se.last().expect("nonempty"))
                })
                .collect::<Result<Vec<f64>>>()?,
        ),
        _ => None,
    };
    let final_observables = observables.iter().map(|(_, o)| fin.expectation(o).re).collect();
    Ok(MethodRun {
        row: MethodComparison {
            method: method.name().into(),
            config: path.map(Path::to_path_buf),
            max_bond_built: built.profile_built.iter().copied().max(),
            max_bond_recompressed: Some(recompressed.max_bond()),
            final_state_deviation: None,
            observable_deviation: 0.0,
            observable_stderr,
            within_three_sigma: None,
            build_seconds: built.build_seconds,
            propagation_seconds,
            gradient_seconds,
        },
        final_state: Some(fin),
        final_observables,
    })
}

fn same_problem(a: &RunConfig, b: &RunConfig) -> Result<()> {
    if a.grid()? != b.grid()? {
        return Err(Error::Config(format!("inconsistent grids: {:?} vs {:?}", a.grid()?, b.grid()?)));
    }
    let (ma, mb) = (a.model()?, b.model()?);
    if ma.dim != mb.dim
        || ma.drift()? != mb.drift()?
        || ma.coupling()? != mb.coupling()?
        || ma.initial()? != mb.initial()?
    {
        return Err(Error::Config("compared configurations describe different models".into()));
    }
    if a.bath()?.spectral()? != b.bath()?.spectral()? || a.bath()?.temperature != b.bath()?.temperature {
        return Err(Error::Config("compared configurations describe different baths".into()));
    }
    Ok(())
}

/// Runs every configuration; the first one is the reference.
pub fn compare(cfgs: &[(RunConfig, Option<PathBuf>)]) -> Result<CompareReport> {
    if cfgs.len() < 2 {
        return Err(Error::Config("compare needs at least two configurations".into()));
    }
    for (c, _) in cfgs {
        c.validate()?;
        if let MethodConfig::Ttm { .. } = c.method()? {
            return Err(Error::Config("ttm is not a process tensor builder and cannot be compared".into()));
        }
    }
    for (c, _) in &cfgs[1..] {
        same_problem(&cfgs[0].0, c)?;
    }
    let reference = &cfgs[0].0;
    let names: Vec<String> = reference.model()?.observables()?.into_iter().map(|(n, _)| n).collect();
    let runs = cfgs
        .iter()
        .map(|(c, p)| run_method(c, p.as_deref(), &names))
        .collect::<Result<Vec<MethodRun>>>()?;
    let ref_run = &runs[0];
    let mut methods = Vec::with_capacity(runs.len());
    for run in &runs {
        let mut row = run.row.clone();
        if let (Some(a), Some(b)) = (&run.final_state, &ref_run.final_state) {
            row.final_state_deviation =
                Some(a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
        }
        let diffs: Vec<f64> = run
            .final_observables
            .iter()
            .zip(&ref_run.final_observables)
            .map(|(a, b)| (a - b).abs())
            .collect();
        row.observable_deviation = diffs.iter().filter(|d| d.is_finite()).fold(0.0, |m, d| m.max(*d));
        if let Some(se) = &row.observable_stderr {
            row.within_three_sigma = Some(diffs.iter().zip(se).all(|(d, s)| !d.is_finite() || *d <= 3.0 * s));
        }
        methods.push(row);
    }
    let grid = reference.grid()?;
    Ok(CompareReport {
        reference: reference.method()?.name().into(),
        dt: grid.dt,
        steps: grid.steps,
        observables: names,
        methods,
    })
}

/// Writes `compare.json` into the first configuration's output directory.
pub fn cmd_compare(cfgs: &[(RunConfig, Option<PathBuf>)]) -> Result<CompareReport> {
    let report = compare(cfgs)?;
    let dir = &cfgs[0].0.output.dir;
    ensure_dir(dir)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("compare.json"), text + "\n")?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(method: &str, extra: &str) -> RunConfig {
        let text = format!(
            r#"
            [model]
            dim = 2
            drift = {{ x = 0.5 }}
            coupling = {{ z = 0.5 }}
            initial = {{ basis = 0 }}
            target = {{ basis = 1 }}
            [bath]
            spectral = {{ kind = "lorentzian", coupling = 0.5, center = 1.0, width = 1.0 }}
            [method]
            {method}
            [grid]
            dt = 0.1
            steps = 12
            {extra}
            "#
        );
        RunConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn heom_profile_counts_auxiliaries() {
        let mut c = config("kind = \"heom\"\nterms = 2\ndepth = 2\nfit_window = 4.0\nfit_tolerance = 0.1", "");
        c.bath = Some(RunConfig::from_toml("[bath]\nspectral = { kind = \"ohmic\", alpha = 0.1 }").unwrap().bath.unwrap());
        let b = build_pt(&c).unwrap();
        let p = b.pt.bond_profile();
        assert!(p[1..p.len() - 1].iter().all(|&x| x == 6), "{p:?}");
    }

    #[test]
    fn stochastic_and_augmented_profiles() {
        let b = build_pt(&config("kind = \"stochastic\"\nn_traj = 64", "")).unwrap();
        let p = b.pt.bond_profile();
        assert!(p[1..p.len() - 1].iter().all(|&x| x == 64));
        let b = build_pt(&config("kind = \"augmented\"\nd = 8", "[compression]\neps_rel = 1e-8")).unwrap();
        let before = &b.profile_built;
        assert!(before[1..before.len() - 1].iter().all(|&x| x == 64));
        assert!(b.pt.bond_profile().iter().all(|&x| x <= 64));
        assert!(b.compression.is_some());
    }

    #[test]
    fn zero_coupling_rabi() {
        let mut c = config("kind = \"augmented\"\nd = 2", "");
        c.model.as_mut().unwrap().coupling = super::super::config::OperatorSpec::Pauli(Default::default());
        let b = build_pt(&c).unwrap();
        let t = dynamics(&c, Some(&b.pt)).unwrap();
        for (k, z) in t.column("z").unwrap().iter().enumerate() {
            assert!((z.re - (k as f64 * 0.1).cos()).abs() <= 1e-10);
        }
        assert!(t.trace_defect.iter().all(|d| *d <= 1e-8));
    }

    #[test]
    fn compare_against_self_is_zero() {
        let c = config("kind = \"augmented\"\nd = 6", "");
        let r = compare(&[(c.clone(), None), (c, None)]).unwrap();
        assert_eq!(r.methods[1].final_state_deviation, Some(0.0));
        assert_eq!(r.methods[1].observable_deviation, 0.0);
        assert!(r.methods[1].gradient_seconds.is_some());
    }

    #[test]
    fn compare_rejects_inconsistent_grids() {
        let a = config("kind = \"augmented\"\nd = 6", "");
        let mut b = a.clone();
        b.grid.as_mut().unwrap().steps = 13;
        assert!(matches!(compare(&[(a, None), (b, None)]), Err(Error::Config(_))));
    }

    #[test]
    fn ttm_dynamics_reproduce_pt() {
        let base = config("kind = \"augmented\"\nd = 6", "");
        let b = build_pt(&base).unwrap();
        let direct = dynamics(&base, Some(&b.pt)).unwrap();
        let t = config("kind = \"ttm\"\ncutoff = 12", "");
        let via = dynamics(&t, Some(&b.pt)).unwrap();
        for (a, c) in direct.values.iter().zip(&via.values) {
            for (x, y) in a.iter().zip(c) {
                assert!((x - y).norm() <= 1e-10);
            }
        }
    }
}
