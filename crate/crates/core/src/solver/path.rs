use nalgebra::DMatrix;

use super::{FitResult, PenaltySpec, PreparedProblem, SolverConfig};
use crate::error::{Error, Result};
use crate::families::FamilySpec;

/// Smallest l1 magnitude at which every penalized coefficient is zero,
/// computed from the gradient at the fit with all penalized coordinates held at zero.
pub fn lambda_max(prob: &PreparedProblem, factors: &[f64]) -> Result<f64> {
    let y = prob.response();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    if !(var > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    if factors.iter().all(|&f| f == 0.0) {
        return Err(Error::Config("no penalized coefficients".into()));
    }
    let null_pen = PenaltySpec::new(f64::INFINITY, 0.0, factors.to_vec())?;
    let null_fit = prob.fit(&null_pen, None)?;
    let grad = prob.standardized_gradient(&null_fit);
    let off = usize::from(prob.config().fit_intercept);
    let mut lmax = 0.0f64;
    for (j, &f) in factors.iter().enumerate() {
        if f > 0.0 {
            lmax = lmax.max(grad[j + off].abs() / f);
        }
    }
    Ok(lmax)
}

/// Log-spaced descending grid from `lambda_max` to `ratio * lambda_max`.
pub fn lambda_path(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    n_lambda: usize,
    ratio: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if n_lambda < 2 {
        return Err(Error::Config("lambda path needs at least two values".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("path ratio must be in (0, 1), got {ratio}")));
    }
    let prob = PreparedProblem::new(x, y, family, cfg)?;
    let lmax = lambda_max(&prob, &vec![1.0; prob.p()])?;
    Ok(log_grid(lmax, ratio, n_lambda))
}

pub(crate) fn log_grid(lmax: f64, ratio: f64, n_lambda: usize) -> Vec<f64> {
    let step = ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda)
        .map(|k| {
            if k == 0 {
                lmax
            } else if k == n_lambda - 1 {
                ratio * lmax
            } else {
                lmax * (step * k as f64).exp()
            }
        })
        .collect()
}

/// Fits along `grid` (descending) with warm starts. `base` supplies lambda2
/// and the penalty factors; its lambda1 is replaced by each grid value.
pub fn fit_path(prob: &PreparedProblem, grid: &[f64], base: &PenaltySpec) -> Result<Vec<FitResult>> {
    let mut out: Vec<FitResult> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let pen = base.with_lambda1(lambda);
        let fit = prob.fit(&pen, out.last())?;
        out.push(fit);
    }
    Ok(out)
}
