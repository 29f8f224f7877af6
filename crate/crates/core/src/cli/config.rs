// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration. Every table rejects unknown keys, and
//! [`RunConfig::validate`] runs before any computation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::bath::{FitMode, SpectralDensity};
use crate::error::{Error, Result};
use crate::liouville::{vectorize, DensityVec, QOperator};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Single seed for every random draw.
    #[serde(default)]
    pub seed: u64,
    pub model: Option<ModelConfig>,
    pub bath: Option<BathConfig>,
    pub method: Option<MethodConfig>,
    pub grid: Option<GridConfig>,
    pub compression: Option<CompressionConfig>,
    pub optimize: Option<OptimizeConfig>,
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A system operator: Pauli coefficients for a qubit, or an explicit matrix.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Pauli(PauliSpec),
    Matrix(MatrixSpec),
}

/// `x sigma_x + y sigma_y + z sigma_z + i identity`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliSpec {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    #[serde(default, rename = "i")]
    pub id: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum StateSpec {
    /// `|k><k|`.
    Basis(usize),
    /// Qubit Bloch vector.
    Bloch([f64; 3]),
    Matrix(MatrixSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub drift: OperatorSpec,
    pub coupling: OperatorSpec,
    pub initial: StateSpec,
    #[serde(default)]
    pub target: Option<StateSpec>,
    /// Named observables; defaults to the Pauli matrices for a qubit.
    #[serde(default)]
    pub observables: BTreeMap<String, OperatorSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SpectralConfig {
    /// Frequencies in units of the cutoff, which defaults to 1.
    Ohmic {
        alpha: f64,
        #[serde(default = "one")]
        cutoff: f64,
    },
    Lorentzian { coupling: f64, center: f64, width: f64 },
    /// Two-column CSV `omega,J`.
    Tabulated { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub temperature: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum MethodConfig {
    Heom {
        /// Number of fitted exponentials; ignored for a zero-temperature Lorentzian,
        /// whose two-term series is exact.
        terms: usize,
        depth: usize,
        #[serde(default = "default_fit_mode")]
        fit_mode: FitMode,
        #[serde(default = "default_fit_window")]
        fit_window: f64,
        #[serde(default = "default_fit_samples")]
        fit_samples: usize,
        /// Largest accepted relative RMS fit residual.
        #[serde(default = "default_fit_tolerance")]
        fit_tolerance: f64,
    },
    Stochastic {
        n_traj: usize,
        /// Overrides the top-level seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_batches")]
        batches: usize,
    },
    Augmented { d: usize },
    Tdvp { modes: usize, omega_max: f64 },
    Ttm {
        cutoff: usize,
        /// Steps to propagate; defaults to the grid.
        #[serde(default)]
        horizon: Option<usize>,
    },
}

fn default_fit_mode() -> FitMode {
    FitMode::Joint
}
fn default_fit_window() -> f64 {
    8.0
}
fn default_fit_samples() -> usize {
    161
}
fn default_fit_tolerance() -> f64 {
    1e-2
}
fn default_batches() -> usize {
    20
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Heom { .. } => "heom",
            MethodConfig::Stochastic { .. } => "stochastic",
            MethodConfig::Augmented { .. } => "augmented",
            MethodConfig::Tdvp { .. } => "tdvp",
            MethodConfig::Ttm { .. } => "ttm",
        }
    }

    pub fn builds_pt(&self) -> bool {
        matches!(self, MethodConfig::Heom { .. } | MethodConfig::Stochastic { .. } | MethodConfig::Augmented { .. })
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionConfig {
    pub eps_rel: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub label: String,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub initial: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub channels: Vec<ChannelConfig>,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_iters() -> usize {
    200
}
fn default_fd_step() -> f64 {
    1e-5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_chis")]
    pub chis: Vec<usize>,
    #[serde(default = "default_bench_steps")]
    pub steps: usize,
    #[serde(default = "default_bench_dim")]
    pub system_dim: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Transfer tensor cutoffs; empty skips that phase.
    #[serde(default)]
    pub ttm_cutoffs: Vec<usize>,
    #[serde(default = "default_ttm_steps")]
    pub ttm_steps: usize,
    #[serde(default = "default_ttm_dim")]
    pub ttm_system_dim: usize,
    /// Recompression slope uses the bond dimensions at or above this value.
    #[serde(default = "default_large_chi")]
    pub large_chi: usize,
}

fn default_chis() -> Vec<usize> {
    vec![16, 32, 64, 128, 256]
}
fn default_bench_steps() -> usize {
    20
}
fn default_bench_dim() -> usize {
    2
}
fn default_repeats() -> usize {
    5
}
fn default_ttm_steps() -> usize {
    2048
}
fn default_ttm_dim() -> usize {
    4
}
fn default_large_chi() -> usize {
    64
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            chis: default_chis(),
            steps: default_bench_steps(),
            system_dim: default_bench_dim(),
            repeats: default_repeats(),
            ttm_cutoffs: vec![],
            ttm_steps: default_ttm_steps(),
            ttm_system_dim: default_ttm_dim(),
            large_chi: default_large_chi(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Process tensor file; relative paths resolve against `dir`.
    #[serde(default = "default_pt")]
    pub pt: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_pt() -> PathBuf {
    PathBuf::from("pt.bin")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), pt: default_pt() }
    }
}

impl OutputConfig {
    pub fn pt_path(&self) -> PathBuf {
        if self.pt.is_absolute() {
            self.pt.clone()
        } else {
            self.dir.join(&self.pt)
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require<'a, T>(v: &'a Option<T>, section: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| config_err(format!("missing [{section}] section")))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn model(&self) -> Result<&ModelConfig> {
        require(&self.model, "model")
    }
    pub fn bath(&self) -> Result<&BathConfig> {
        require(&self.bath, "bath")
    }
    pub fn method(&self) -> Result<&MethodConfig> {
        require(&self.method, "method")
    }
    pub fn grid(&self) -> Result<GridConfig> {
        require(&self.grid, "grid").copied()
    }
    pub fn optimize(&self) -> Result<&OptimizeConfig> {
        require(&self.optimize, "optimize")
    }

    /// Checks everything a simulation subcommand needs without computing anything.
    pub fn validate(&self) -> Result<()> {
        let m = self.model()?;
        m.validate()?;
        let b = self.bath()?;
        b.spectral()?;
        if !(b.temperature >= 0.0) || !b.temperature.is_finite() {
            return Err(config_err(format!("temperature must be >= 0, got {}", b.temperature)));
        }
        let g = self.grid()?;
        if !(g.dt > 0.0) || !g.dt.is_finite() || g.steps == 0 {
            return Err(config_err(format!("grid needs dt > 0 and steps >= 1, got dt={} steps={}", g.dt, g.steps)));
        }
        if let Some(c) = &self.compression {
            if !(0.0..1.0).contains(&c.eps_rel) {
                return Err(config_err(format!("eps_rel must lie in [0, 1), got {}", c.eps_rel)));
            }
        }
        match self.method()? {
            MethodConfig::Heom { terms, depth, fit_window, fit_samples, fit_tolerance, .. } => {
                if !(*fit_tolerance > 0.0) {
                    return Err(config_err("fit_tolerance must be positive"));
                }
                if *terms == 0 || *depth == 0 {
                    return Err(config_err("heom needs terms >= 1 and depth >= 1"));
                }
                if !(*fit_window > 0.0) || *fit_samples < 2 * terms + 1 {
                    return Err(config_err("heom fit needs a positive window and at least 2*terms+1 samples"));
                }
            }
            MethodConfig::Stochastic { n_traj, batches, .. } => {
                if *n_traj == 0 {
                    return Err(config_err("stochastic needs n_traj >= 1"));
                }
                if *batches < 2 || *batches > *n_traj {
                    return Err(config_err(format!("batches must lie in 2..={n_traj}")));
                }
            }
            MethodConfig::Augmented { d } => {
                if *d == 0 {
                    return Err(config_err("augmented needs d >= 1"));
                }
                if !matches!(b.spectral, SpectralConfig::Lorentzian { .. }) {
                    return Err(config_err("augmented method needs a lorentzian bath"));
                }
                if b.temperature > 0.0 {
                    return Err(config_err("augmented method is zero-temperature only"));
                }
            }
            MethodConfig::Tdvp { modes, omega_max } => {
                if *modes == 0 || !(*omega_max > 0.0) {
                    return Err(config_err("tdvp needs modes >= 1 and omega_max > 0"));
                }
                m.polaron_splitting()?;
                if b.temperature > 0.0 {
                    return Err(config_err("tdvp method is zero-temperature only"));
                }
            }
            MethodConfig::Ttm { cutoff, horizon } => {
                if *cutoff == 0 || *cutoff > g.steps {
                    return Err(config_err(format!("ttm cutoff must lie in 1..={}", g.steps)));
                }
                if horizon == &Some(0) {
                    return Err(config_err("ttm horizon must be >= 1"));
                }
            }
        }
        if let Some(o) = &self.optimize {
            o.validate(m.dim)?;
        }
        Ok(())
    }
}

impl OperatorSpec {
    pub fn build(&self, dim: usize) -> Result<QOperator> {
        match self {
            OperatorSpec::Pauli(p) => {
                if dim != 2 {
                    return Err(config_err(format!("Pauli coefficients need dim = 2, got {dim}")));
                }
                let mut h = QOperator::sigma_x().data.mapv(|z| z * p.x);
                h.scaled_add(C64::new(p.y, 0.0), &QOperator::sigma_y().data);
                h.scaled_add(C64::new(p.z, 0.0), &QOperator::sigma_z().data);
                h.scaled_add(C64::new(p.id, 0.0), &QOperator::identity(2).data);
                QOperator::new(h)
            }
            OperatorSpec::Matrix(m) => QOperator::new(m.build(dim)?),
        }
    }
}

impl MatrixSpec {
    fn build(&self, dim: usize) -> Result<Array2<C64>> {
        let check = |rows: &Vec<Vec<f64>>, what: &str| -> Result<()> {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(config_err(format!("{what} part must be {dim}x{dim}")));
            }
            Ok(())
        };
        check(&self.re, "real")?;
        if let Some(im) = &self.im {
            check(im, "imaginary")?;
        }
        Ok(Array2::from_shape_fn((dim, dim), |(i, j)| {
            C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |m| m[i][j]))
        }))
    }
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<DensityVec> {
        match self {
            StateSpec::Basis(k) => {
                if *k >= dim {
                    return Err(config_err(format!("basis state {k} outside dimension {dim}")));
                }
                Ok(DensityVec::basis(dim, *k))
            }
            StateSpec::Bloch(r) => {
                if dim != 2 {
                    return Err(config_err("Bloch vectors need dim = 2"));
                }
                let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                if n > 1.0 + 1e-12 {
                    return Err(config_err(format!("Bloch vector has length {n} > 1")));
                }
                let h = PauliSpec { x: 0.5 * r[0], y: 0.5 * r[1], z: 0.5 * r[2], id: 0.5 };
                vectorize(&OperatorSpec::Pauli(h).build(2)?)
            }
            StateSpec::Matrix(m) => {
                let rho = QOperator::new(m.build(dim)?)?;
                if rho.hermiticity_defect() > 1e-10 || (rho.trace() - 1.0).norm() > 1e-10 {
                    return Err(config_err("density matrix must be Hermitian with unit trace"));
                }
                vectorize(&rho)
            }
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(config_err("model dim must be >= 2"));
        }
        for (what, op) in [("drift", &self.drift), ("coupling", &self.coupling)] {
            let o = op.build(self.dim)?;
            if !o.is_hermitian() {
                return Err(config_err(format!("{what} operator is not Hermitian")));
            }
        }
        self.initial.build(self.dim)?;
        if let Some(t) = &self.target {
            t.build(self.dim)?;
        }
        for op in self.observables.values() {
            op.build(self.dim)?;
        }
        Ok(())
    }

    pub fn drift(&self) -> Result<QOperator> {
        self.drift.build(self.dim)
    }
    pub fn coupling(&self) -> Result<QOperator> {
        self.coupling.build(self.dim)
    }
    pub fn initial(&self) -> Result<DensityVec> {
        self.initial.build(self.dim)
    }
    pub fn target(&self) -> Result<Option<DensityVec>> {
        self.target.as_ref().map(|t| t.build(self.dim)).transpose()
    }

    /// Named observables, with `x`, `y`, `z` as the qubit default.
    pub fn observables(&self) -> Result<Vec<(String, QOperator)>> {
        if self.observables.is_empty() && self.dim == 2 {
            return Ok(vec![
                ("x".into(), QOperator::sigma_x()),
                ("y".into(), QOperator::sigma_y()),
                ("z".into(), QOperator::sigma_z()),
            ]);
        }
        self.observables.iter().map(|(k, v)| Ok((k.clone(), v.build(self.dim)?))).collect()
    }

    /// `w_q` when the model is `(w_q/2) sigma_x` with coupling `sigma_z/2` starting from `|->`.
    pub fn polaron_splitting(&self) -> Result<f64> {
        let err = || config_err("tdvp needs drift = { x = w/2 }, coupling = { z = 0.5 } and initial = { bloch = [-1, 0, 0] }");
        match (&self.drift, &self.coupling, &self.initial) {
            (OperatorSpec::Pauli(d), OperatorSpec::Pauli(c), StateSpec::Bloch(r))
                if self.dim == 2
                    && d.y == 0.0
                    && d.z == 0.0
                    && d.id == 0.0
                    && c.x == 0.0
                    && c.y == 0.0
                    && c.id == 0.0
                    && c.z == 0.5
                    && *r == [-1.0, 0.0, 0.0] =>
            {
                Ok(2.0 * d.x)
            }
            _ => Err(err()),
        }
    }
}

impl BathConfig {
    pub fn spectral(&self) -> Result<SpectralDensity> {
        match &self.spectral {
            SpectralConfig::Ohmic { alpha, cutoff } => SpectralDensity::ohmic(*alpha, *cutoff),
            SpectralConfig::Lorentzian { coupling, center, width } => {
                SpectralDensity::lorentzian(*coupling, *center, *width)
            }
            SpectralConfig::Tabulated { path } => SpectralDensity::from_csv(path),
        }
        .map_err(|e| match e {
            Error::Io(_) => e,
            other => config_err(other.to_string()),
        })
    }
}

impl OptimizeConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.channels.is_empty() {
            return Err(config_err("optimize needs at least one channel"));
        }
        if self.max_iters == 0 {
            return Err(config_err("max_iters must be >= 1"));
        }
        if !(self.fd_step > 0.0) {
            return Err(config_err("fd_step must be positive"));
        }
        for c in &self.channels {
            if !c.operator.build(dim)?.is_hermitian() {
                return Err(config_err(format!("channel {} is not Hermitian", c.label)));
            }
            if let Some((lo, hi)) = c.bounds {
                if !(lo <= hi) {
                    return Err(config_err(format!("channel {} has empty bounds", c.label)));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        seed = 3
        [model]
        dim = 2
        drift = { x = 0.5 }
        coupling = { z = 0.5 }
        initial = { basis = 0 }
        target = { basis = 1 }
        [bath]
        spectral = { kind = "ohmic", alpha = 0.1 }
        [method]
        kind = "heom"
        terms = 2
        depth = 2
        [grid]
        dt = 0.1
        steps = 10
    "#;

    #[test]
    fn parses_and_validates() {
        let c = RunConfig::from_toml(BASE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.method().unwrap().name(), "heom");
        let m = c.model().unwrap();
        assert_eq!(m.drift().unwrap(), QOperator::sigma_x().scaled(0.5));
        assert_eq!(m.observables().unwrap().len(), 3);
        assert_eq!(c.output.pt_path(), PathBuf::from("out/pt.bin"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = BASE.replace("depth = 2", "depth = 2\nlevels = 3");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = BASE.replace("drift = { x = 0.5 }", "drift = { x = 0.5, w = 1.0 }");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = format!("{BASE}\n[extra]\na = 1\n");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        for (from, to) in [
            ("dt = 0.1", "dt = -0.1"),
            ("initial = { basis = 0 }", "initial = { basis = 5 }"),
            ("drift = { x = 0.5 }", "drift = { re = [[0.0, 1.0], [0.0, 0.0]] }"),
            ("terms = 2", "terms = 0"),
        ] {
            let c = RunConfig::from_toml(&BASE.replace(from, to)).unwrap();
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{to}");
        }
    }

    #[test]
    fn bloch_and_matrix_states() {
        let plus = StateSpec::Bloch([1.0, 0.0, 0.0]).build(2).unwrap();
        assert!((plus.expectation(&QOperator::sigma_x()).re - 1.0).abs() < 1e-15);
        let m = StateSpec::Matrix(MatrixSpec { re: vec![vec![0.5, 0.0], vec![0.0, 0.5]], im: None });
        assert_eq!(m.build(2).unwrap(), DensityVec::maximally_mixed(2));
        assert!(StateSpec::Bloch([1.0, 1.0, 0.0]).build(2).is_err());
    }

    #[test]
    fn polaron_model_detection() {
        let text = BASE
            .replace("initial = { basis = 0 }", "initial = { bloch = [-1.0, 0.0, 0.0] }")
            .replace("kind = \"heom\"\n        terms = 2\n        depth = 2", "kind = \"tdvp\"\n        modes = 30\n        omega_max = 10.0");
        let c = RunConfig::from_toml(&text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.model().unwrap().polaron_splitting().unwrap(), 1.0);
        let c = RunConfig::from_toml(&text.replace("coupling = { z = 0.5 }", "coupling = { z = 1.0 }")).unwrap();
        assert!(c.validate().is_err());
    }
}
