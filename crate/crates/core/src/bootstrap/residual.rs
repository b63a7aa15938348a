use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{
    assemble_table, modified_coefficients, rng_for, run_replicates, Attempt, BootstrapConfig,
    BootstrapRun, ResidualType,
};
use crate::debias::augmented;
use crate::error::{Error, Result};
use crate::families::{
    anscombe_residuals, deviance_residuals, pearson_residuals, FamilyKind, FamilySpec,
};
use crate::interval::CiMethod;
use crate::solver::{fit_penalized_glm, CvResult, FitResult, PenaltySpec};

fn centered(mut e: Vec<f64>) -> Vec<f64> {
    let m = e.iter().sum::<f64>() / e.len() as f64;
    e.iter_mut().for_each(|v| *v -= m);
    e
}

fn lasso_fit(x: &DMatrix<f64>, y: &[f64], family: &FamilySpec, lambda: f64, cfg: &BootstrapConfig) -> Result<FitResult> {
    fit_penalized_glm(x, y, family, &PenaltySpec::lasso(lambda, x.ncols()), &cfg.solver)
}

fn coefficients(fit: &FitResult) -> Vec<f64> {
    if fit.fit_intercept {
        fit.coefficients()
    } else {
        fit.beta.clone()
    }
}

/// Lasso residual bootstrap for the linear model.
///
/// Residuals of the modified (thresholded) estimate are centered and
/// resampled around `X b_mod`; each replicate is refit at the cross-validated
/// lambda.
pub fn residual_bootstrap_lm(x: &DMatrix<f64>, y: &[f64], config: &BootstrapConfig, cv: &CvResult) -> Result<BootstrapRun> {
    config.validate_tails()?;
    let n = y.len();
    let family = FamilySpec::gaussian();
    let lambda = cv.best_lambda;
    let fit = lasso_fit(x, y, &family, lambda, config)?;
    let intercept = fit.fit_intercept;
    let point = coefficients(&fit);
    let modified = modified_coefficients(&point, n, config, intercept);
    let xa = augmented(x, intercept);
    let mean: Vec<f64> = (&xa * DVector::from_column_slice(&modified)).iter().copied().collect();
    let resid = centered(y.iter().zip(&mean).map(|(a, b)| a - b).collect());

    let (draws, _, fits) = run_replicates(config, |_, seed| {
        let mut rng = rng_for(seed);
        let ystar: Vec<f64> = mean
            .iter()
            .map(|m| m + resid[rng.random_range(0..n)])
            .collect();
        let f = lasso_fit(x, &ystar, &family, lambda, config)?;
        Ok(Attempt::Done {
            beta: coefficients(&f),
            lambda1: lambda,
            clamped: 0,
            fits: 1,
        })
    })?;
    let table = assemble_table(CiMethod::ResidBoot, config, config.ci_variant, &point, &modified, &draws, intercept)?;
    Ok(BootstrapRun {
        table,
        point_estimate: point,
        modified: Some(modified),
        draws,
        lambda1: lambda,
        clamp_fraction: None,
        clamp_flagged: false,
        total_fits: fits + 1,
    })
}

/// `max(0, mu + sqrt(v) e)` for nonnegative families, `mu + sqrt(v) e` otherwise.
/// Returns the response and whether it was clamped.
pub fn reconstruct_response(mu: f64, sqrt_v: f64, e: f64, nonnegative: bool) -> (f64, bool) {
    let y = mu + sqrt_v * e;
    if nonnegative && y < 0.0 {
        (0.0, true)
    } else {
        (y, false)
    }
}

/// Lasso residual bootstrap for GLMs: residuals of the configured type are
/// centered, resampled and mapped back through `mu + sqrt(v) e`.
pub fn residual_bootstrap_glm(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    config: &BootstrapConfig,
    cv: &CvResult,
) -> Result<BootstrapRun> {
    config.validate_tails()?;
    if family.kind == FamilyKind::Gaussian {
        return Err(Error::Config(
            "the GLM residual bootstrap needs a poisson, negbin or tweedie family".into(),
        ));
    }
    let n = y.len();
    let lambda = cv.best_lambda;
    let fit = lasso_fit(x, y, family, lambda, config)?;
    let intercept = fit.fit_intercept;
    let point = coefficients(&fit);
    let modified = modified_coefficients(&point, n, config, intercept);
    let mu = fit.fitted_mean(x, family);

    let fam = if family.has_fixed_dispersion() {
        *family
    } else {
        family.with_dispersion(fit.dispersion)?
    };
    let raw = match config.residual_type {
        ResidualType::Pearson => pearson_residuals(&fam, y, &mu)?,
        ResidualType::Deviance => deviance_residuals(&fam, y, &mu)?,
        ResidualType::Anscombe => anscombe_residuals(&fam, y, &mu)?,
    };
    let resid = centered(raw);
    let sqrt_v: Vec<f64> = mu.iter().map(|&m| fam.pearson_variance(m).sqrt()).collect();
    let nonneg = fam.nonnegative_response();

    let (draws, clamped, fits) = run_replicates(config, |_, seed| {
        let mut rng = rng_for(seed);
        let mut hits = 0;
        let ystar: Vec<f64> = (0..n)
            .map(|i| {
                let (v, c) = reconstruct_response(mu[i], sqrt_v[i], resid[rng.random_range(0..n)], nonneg);
                hits += usize::from(c);
                v
            })
            .collect();
        if family.kind != FamilyKind::Gaussian && ystar.iter().all(|&v| v == 0.0) {
            return Ok(Attempt::Retry("all rebuilt responses are zero".into()));
        }
        let f = lasso_fit(x, &ystar, family, lambda, config)?;
        Ok(Attempt::Done {
            beta: coefficients(&f),
            lambda1: lambda,
            clamped: hits,
            fits: 1,
        })
    })?;
    let clamp_fraction = clamped as f64 / (n * config.n_replicates) as f64;
    let table = assemble_table(CiMethod::ResidBoot, config, config.ci_variant, &point, &modified, &draws, intercept)?;
    Ok(BootstrapRun {
        table,
        point_estimate: point,
        modified: Some(modified),
        draws,
        lambda1: lambda,
        clamp_fraction: Some(clamp_fraction),
        clamp_flagged: clamp_fraction >= 0.2,
        total_fits: fits + 1,
    })
}
