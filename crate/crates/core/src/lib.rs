//! Sparse ReLU network regression for temporally dependent data.
//!
//! The crate is organised by stage:
//!
//! - [`net`]: shifted-ReLU feed-forward networks, forward/backward passes,
//!   parameter projection and sparsity accounting.
//! - [`training`]: data splits, the L1-penalized squared loss, full-batch
//!   gradient descent with validation early stopping, dropout and risk.
//! - [`generators`]: VAR(1), iid Gaussian, linear/nonlinear AR and AR(∞)
//!   simulators plus lag embedding.
//! - [`selection`]: AIC and rate-driven lag choice, correlation screening
//!   and the theoretical rate function.
//! - [`ols`]: least-squares baseline.
//! - [`harness`]: replicated Monte Carlo convergence studies.
//! - [`forecasting`]: inflation transform, macro design matrices and
//!   rolling one-step-ahead forecasts.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forecasting;
pub mod generators;
pub mod harness;
pub mod net;
pub mod ols;
pub mod seed;
pub mod selection;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
pub use generators::{Dataset, GeneratorKind, GeneratorSpec};
pub use net::{Architecture, Gradient, Network};
pub use training::{Splits, TrainConfig, TrainReport};
