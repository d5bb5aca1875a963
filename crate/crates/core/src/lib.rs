//! Normalizing-constant estimation for black-box functions on the unit cube.
//!
//! Given a query oracle `y = f(x) + σz` on `[0,1]^d` and an inverse
//! temperature λ, the crate estimates `Z = ∫ exp(-λ f(x)) dx` with
//!
//! * plain Monte Carlo ([`estimators::estimate_mc`]),
//! * piecewise-constant grids with and without a sampled residual
//!   ([`estimators::estimate_pc`], [`estimators::estimate_pc_mc`]),
//! * a maximum-variance GP surrogate ([`estimators::estimate_mvs`]),
//! * the two-batch surrogate-plus-Langevin-residual estimator
//!   ([`estimators::estimate_mvs_lmc`]).
//!
//! The [`harness`] module runs experiment grids, writes CSV and fits
//! convergence rates.

pub mod error;
pub mod estimators;
pub mod gp;
pub mod hardclass;
pub mod harness;
pub mod kernel;
pub mod objectives;
pub mod quadrature;
pub mod samplers;

pub use error::{Error, Result};
pub use estimators::{estimate, Estimate, EstimateRecord, EstimatorConfig, Method};
pub use gp::GpState;
pub use kernel::{KernelSpec, Smoothness};
pub use objectives::{NoisyOracle, Objective, Oracle};
pub use samplers::RngStream;
