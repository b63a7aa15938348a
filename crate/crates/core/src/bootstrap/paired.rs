use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{assemble_table, replicate_seed, rng_for, run_replicates, Attempt, BootstrapConfig, BootstrapRun, CiVariant};
use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilySpec};
use crate::interval::CiMethod;
use crate::solver::{select_lambda_cv, CvConfig, FitResult, PenaltySpec, PreparedProblem};

/// How the lasso penalty is chosen for paired resamples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LambdaRule {
    /// Cross-validate inside every replicate.
    PerReplicateCv { cv: CvConfig },
    /// Cross-validate once on the full data and reuse that value.
    FullDataCv { cv: CvConfig },
    Fixed { lambda: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::PerReplicateCv { cv: CvConfig::default() }
    }
}

/// Seed slot reserved for full-data cross-validation.
const FULL_DATA_SLOT: usize = usize::MAX;

fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateResponse | Error::FoldDegenerate { .. } | Error::ConstantColumn(_)
    )
}

fn constant_columns(x: &DMatrix<f64>) -> Vec<bool> {
    x.column_iter()
        .map(|c| {
            let first = c[0];
            c.iter().all(|&v| v == first)
        })
        .collect()
}

fn coefficients(fit: &FitResult) -> Vec<f64> {
    if fit.fit_intercept {
        fit.coefficients()
    } else {
        fit.beta.clone()
    }
}

struct Resampler<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    family: &'a FamilySpec,
    constant: Vec<bool>,
}

impl<'a> Resampler<'a> {
    fn new(x: &'a DMatrix<f64>, y: &'a [f64], family: &'a FamilySpec) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!("{} rows vs {} responses", x.nrows(), y.len())));
        }
        if y.len() < 2 {
            return Err(Error::InvalidInput("need at least two observations".into()));
        }
        Ok(Self {
            x,
            y,
            family,
            constant: constant_columns(x),
        })
    }

    /// Rows drawn with replacement, or the reason the draw is unusable.
    fn draw(&self, seed: u64) -> std::result::Result<(DMatrix<f64>, Vec<f64>), String> {
        let n = self.y.len();
        let mut rng = rng_for(seed);
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let xb = DMatrix::from_fn(n, self.x.ncols(), |r, c| self.x[(rows[r], c)]);
        let yb: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
        // a column that varies in the data but not in the resample cannot be estimated
        for (j, c) in constant_columns(&xb).into_iter().enumerate() {
            if c && !self.constant[j] {
                return Err(format!("column {j} is constant in the resample"));
            }
        }
        if self.family.kind != FamilyKind::Gaussian && yb.iter().all(|&v| v == 0.0) && self.y.iter().any(|&v| v != 0.0) {
            return Err("all resampled responses are zero".into());
        }
        Ok((xb, yb))
    }
}

fn resolve_lambda(
    rule: &LambdaRule,
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    seed: u64,
    cfg: &BootstrapConfig,
    full_data: Option<f64>,
) -> Result<(f64, usize)> {
    match rule {
        LambdaRule::Fixed { lambda } => {
            if !(*lambda >= 0.0) {
                return Err(Error::Config(format!("fixed lambda must be nonnegative, got {lambda}")));
            }
            Ok((*lambda, 0))
        }
        LambdaRule::FullDataCv { cv } | LambdaRule::PerReplicateCv { cv } => {
            if let (LambdaRule::FullDataCv { .. }, Some(l)) = (rule, full_data) {
                return Ok((l, 0));
            }
            let res = select_lambda_cv(x, y, family, cv, seed, &cfg.solver)?;
            Ok((res.best_lambda, cv.folds * cv.n_lambda + 1))
        }
    }
}

fn full_data_lambda(rule: &LambdaRule, x: &DMatrix<f64>, y: &[f64], family: &FamilySpec, cfg: &BootstrapConfig) -> Result<(f64, usize)> {
    let seed = replicate_seed(cfg.master_seed, FULL_DATA_SLOT, 0);
    resolve_lambda(rule, x, y, family, seed, cfg, None)
}

fn paired_engine<F>(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    config: &BootstrapConfig,
    rule: &LambdaRule,
    method: CiMethod,
    estimate: F,
) -> Result<BootstrapRun>
where
    F: Fn(&PreparedProblem, f64) -> Result<(FitResult, usize)> + Sync,
{
    config.validate()?;
    let sampler = Resampler::new(x, y, family)?;
    let (lambda, cv_fits) = full_data_lambda(rule, x, y, family, config)?;
    let full = PreparedProblem::new(x, y, family, &config.solver)?;
    let (point_fit, point_fits) = estimate(&full, lambda)?;
    let intercept = point_fit.fit_intercept;
    let point = coefficients(&point_fit);

    let (draws, _, fits) = run_replicates(config, |_, seed| {
        let (xb, yb) = match sampler.draw(seed) {
            Ok(d) => d,
            Err(reason) => return Ok(Attempt::Retry(reason)),
        };
        let attempt = || -> Result<(Vec<f64>, f64, usize)> {
            let (l, cvf) = resolve_lambda(rule, &xb, &yb, family, seed ^ 0x5DEE_CE66_D1CE_4E5B, config, Some(lambda))?;
            let prob = PreparedProblem::new(&xb, &yb, family, &config.solver)?;
            let (fit, f) = estimate(&prob, l)?;
            Ok((coefficients(&fit), l, f + cvf))
        };
        match attempt() {
            Ok((beta, lambda1, fits)) => Ok(Attempt::Done {
                beta,
                lambda1,
                clamped: 0,
                fits,
            }),
            Err(e) if is_degenerate(&e) => Ok(Attempt::Retry(e.to_string())),
            Err(e) => Err(e),
        }
    })?;
    let table = assemble_table(method, config, CiVariant::Percentile, &point, &point, &draws, intercept)?;
    Ok(BootstrapRun {
        table,
        point_estimate: point,
        modified: None,
        draws,
        lambda1: lambda,
        clamp_fraction: None,
        clamp_flagged: false,
        total_fits: fits + point_fits + cv_fits,
    })
}

/// Paired (row) bootstrap of the lasso with percentile intervals.
pub fn paired_bootstrap_glm(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    config: &BootstrapConfig,
    selector: &LambdaRule,
) -> Result<BootstrapRun> {
    let p = x.ncols();
    paired_engine(x, y, family, config, selector, CiMethod::PairedBoot, |prob, l| {
        Ok((prob.fit(&PenaltySpec::lasso(l, p), None)?, 1))
    })
}

/// Paired bootstrap lasso + partial ridge: each replicate fits the lasso,
/// then refits with a ridge penalty on the coefficients the lasso zeroed only.
/// `lambda_l2` defaults to `1 / n`.
pub fn plr_glm(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    config: &BootstrapConfig,
    lambda_l1: &LambdaRule,
    lambda_l2: Option<f64>,
) -> Result<BootstrapRun> {
    let p = x.ncols();
    let l2 = lambda_l2.unwrap_or(1.0 / y.len() as f64);
    if !(l2 >= 0.0) || !l2.is_finite() {
        return Err(Error::Config(format!("ridge lambda must be finite and nonnegative, got {l2}")));
    }
    paired_engine(x, y, family, config, lambda_l1, CiMethod::Plr, |prob, l| {
        let lasso = prob.fit(&PenaltySpec::lasso(l, p), None)?;
        let zeroed: Vec<bool> = lasso.beta.iter().map(|&b| b == 0.0).collect();
        let ridge = prob.fit(&PenaltySpec::partial_ridge(l2, &zeroed), Some(&lasso))?;
        Ok((ridge, 2))
    })
}
