//! Admissibility tests for instrumental variables in additive structural
//! models, together with the nonparametric regression machinery they need.
//!
//! * [`smoothers`]: local polynomial regression in one or two predictors.
//! * [`additive`]: additive regression by backfitting or a direct spline
//!   least-squares solve.
//! * [`scoring`]: BIC, residual sums and the residual-permutation bootstrap.
//! * [`ivtest`]: control-function estimation, the semi-instrument test and
//!   the two double-instrument tests.
//! * [`simgen`]: seeded generators for structural simulation studies.
//! * [`tables`]: the simulation grids behind the `reproduce` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod additive;
pub mod data;
pub mod error;
mod linalg;
pub mod report;
pub mod scoring;
pub mod simgen;
pub mod smoothers;
pub mod tables;
pub mod ivtest;

pub use data::Dataset;
pub use error::{Error, Result};
