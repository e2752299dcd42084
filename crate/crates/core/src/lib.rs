//! Regularized Cox regression in the proportional regime (`p / n` fixed).
//!
//! The crate provides two solvers for the elastic-net penalized partial
//! likelihood (COX-AMP and coordinate descent), a replica-symmetric theory
//! solver driven by a Monte Carlo population, and estimators that recover the
//! six order parameters of that theory from a single fitted data set.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod observables;
pub mod prox;
pub mod rs;
pub mod scalar;
pub mod solvers;
pub mod survival;
pub mod synthgen;

pub use error::{CoxError, Result};
pub use prox::ElasticNetPenalty;
pub use survival::{StepHazard, SurvivalDataset};
