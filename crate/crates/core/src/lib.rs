#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Penalized GLM fitting and confidence intervals for the selected model.
//!
//! The crate fits lasso, ridge and elastic-net GLMs (gaussian, poisson,
//! negative binomial, tweedie) and builds coefficient intervals by de-biasing
//! and by four bootstrap schemes, including the paired lasso + partial ridge
//! (PLR) bootstrap.

pub mod bootstrap;
pub mod config;
pub mod data;
pub mod debias;
pub mod error;
pub mod families;
pub mod interval;
pub mod simbench;
pub mod solver;

pub use error::{Error, Result};
pub use families::{FamilyKind, FamilySpec, Link};
pub use interval::{CiMethod, CoefInterval, IntervalTable};
pub use solver::{CvConfig, CvResult, FitResult, PenaltySpec, SolverConfig};
