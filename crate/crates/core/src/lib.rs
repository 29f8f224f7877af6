// Copyright 2026 The ptmpo Authors
// SPDX-License-Identifier: Apache-2.0

//! Process tensors in matrix-product-operator form.
//!
//! The crate builds process tensors for a system coupled to a Gaussian bosonic
//! bath by three independent routes (hierarchical equations of motion, a
//! stochastic Liouville–von Neumann average, and auxiliary pseudomodes),
//! contracts them against system propagators, and back-propagates costates to
//! obtain gradients of a terminal cost with respect to piecewise-constant
//! controls. A polaron-ansatz solver and transfer tensors are provided for
//! cross-checking dynamics.

pub mod augmented;
pub mod bath;
pub mod cli;
pub mod control;
pub mod error;
pub mod heom;
pub mod linalg;
pub mod liouville;
pub mod ptmpo;
pub mod quad;
pub mod stochastic;
pub mod tdvp;
pub mod ttm;

pub use error::{Error, Result};
