// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("SVD did not converge at node {node}: {msg}")]
    Svd { node: usize, msg: String },

    #[error("divergent integrand: {0}")]
    Divergent(String),

    #[error("exponential fit failed: residual {residual:.3e} exceeds ceiling {ceiling:.3e}")]
    FitFailed { residual: f64, ceiling: f64 },

    #[error("noise correlations not realizable on this grid: residual {residual:.3e}")]
    NoiseFactorization { residual: f64 },

    #[error("hierarchy has {n_aux} auxiliary densities, above the ceiling of {ceiling}")]
    HierarchyTooLarge { n_aux: usize, ceiling: usize },

    #[error("propagator overflow: spectral abscissa of the generator is {abscissa:.6e}")]
    Unstable { abscissa: f64 },

    #[error("Fock truncation overflow: edge population {population:.3e} exceeds {limit:.1e}")]
    FockOverflow { population: f64, limit: f64 },

    #[error("trajectory {index} diverged at step {step}: norm ratio {ratio:.3e} above ceiling {ceiling:.1e}")]
    TrajectoryDiverged { index: usize, step: usize, ratio: f64, ceiling: f64 },

    #[error("cost increased for {iterations} consecutive iterations (last cost {cost:.6e})")]
    CostIncrease { iterations: usize, cost: f64 },

    #[error("transfer tensors were trained with a different system propagator (deviation {deviation:.3e})")]
    PropagatorMismatch { deviation: f64 },

    #[error("corrupt process tensor file: {0}")]
    Format(String),

    #[error("process tensor file version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(err: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(err.to_string())
    }
}

impl From<ndarray::ShapeError> for Error {
    fn from(err: ndarray::ShapeError) -> Self {
        Error::Dimension(err.to_string())
    }
}
