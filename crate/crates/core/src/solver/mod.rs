//! Penalized GLM fitting: IRLS outer loop around cyclic coordinate descent,
//! regularization paths and K-fold cross-validation.
//!
//! The objective is
//!
//! ```text
//! (1/n) sum_i rho(y_i, b0 + x_i' b) + lambda1 sum_j f_j |b_j| + lambda2 sum_j f_j b_j^2
//! ```
//!
//! with the intercept never penalized. The ridge term carries no 1/2 factor.
//! When standardization is on, `b` lives on the standardized column scale and
//! coefficients are reported on the original scale.

mod cv;
mod fit;
mod path;

pub use cv::{cross_validate, select_lambda_cv, select_tweedie_power, CvConfig, CvResult};
pub use fit::{
    fit_penalized_glm, kkt_stats, penalized_objective, FitResult, KktReport, PreparedProblem,
    SolverConfig, Standardization,
};
pub use path::{fit_path, lambda_max, lambda_path};
pub(crate) use fit::coordinate_descent;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sign(z) * max(|z| - gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Elastic-net penalty with per-coefficient multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub factors: Vec<f64>,
}

impl PenaltySpec {
    pub fn new(lambda1: f64, lambda2: f64, factors: Vec<f64>) -> Result<Self> {
        let s = Self {
            lambda1,
            lambda2,
            factors,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn none(p: usize) -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            factors: vec![1.0; p],
        }
    }

    pub fn lasso(lambda: f64, p: usize) -> Self {
        Self {
            lambda1: lambda,
            lambda2: 0.0,
            factors: vec![1.0; p],
        }
    }

    pub fn ridge(lambda2: f64, p: usize) -> Self {
        Self {
            lambda1: 0.0,
            lambda2,
            factors: vec![1.0; p],
        }
    }

    /// Ridge penalty restricted to the coordinates where `mask` is true.
    pub fn partial_ridge(lambda2: f64, mask: &[bool]) -> Self {
        Self {
            lambda1: 0.0,
            lambda2,
            factors: mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn with_lambda1(&self, lambda1: f64) -> Self {
        Self {
            lambda1,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(Error::Config(format!(
                "penalty magnitudes must be nonnegative (lambda1 = {}, lambda2 = {})",
                self.lambda1, self.lambda2
            )));
        }
        if let Some(j) = self.factors.iter().position(|&f| !(f >= 0.0) || !f.is_finite()) {
            return Err(Error::Config(format!(
                "penalty factor {j} must be finite and nonnegative"
            )));
        }
        Ok(())
    }

    /// Effective l1 threshold for coordinate `j`; zero factors stay exempt even for infinite lambda.
    #[inline]
    pub(crate) fn l1(&self, j: usize) -> f64 {
        let f = self.factors[j];
        if f == 0.0 {
            0.0
        } else {
            self.lambda1 * f
        }
    }

    #[inline]
    pub(crate) fn l2(&self, j: usize) -> f64 {
        let f = self.factors[j];
        if f == 0.0 {
            0.0
        } else {
            self.lambda2 * f
        }
    }

    pub(crate) fn value(&self, b: &[f64]) -> f64 {
        b.iter()
            .enumerate()
            .map(|(j, &v)| self.l1(j) * v.abs() + self.l2(j) * v * v)
            .sum()
    }
}
