//! De-biased (de-sparsified) lasso estimators with normal-theory intervals.
//!
//! All matrices here act on the augmented coefficient vector `[b0, beta...]`
//! when the fit has an intercept, so the intercept gets an interval too.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::families::{estimate_dispersion, FamilySpec};
use crate::interval::{default_coef_name, CiMethod, IntervalTable};
use crate::solver::{
    coordinate_descent, fit_penalized_glm, select_lambda_cv, CvConfig, FitResult, PenaltySpec,
    SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMethod {
    Nodewise,
    Direct,
    /// Rows from the constrained variance program (the linear-model `M`).
    Program,
}

/// Approximate inverse of the (weighted) Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub theta: DMatrix<f64>,
    pub method: PrecisionMethod,
    pub tau_sq: Vec<f64>,
    pub lambda_js: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasResult {
    pub b_debiased: Vec<f64>,
    pub variance_diag: Vec<f64>,
    pub intervals: IntervalTable,
    pub m_matrix: Option<DMatrix<f64>>,
}

/// How the GLM interval variance is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmVariance {
    /// `phi * (Theta Sigma Theta')_jj / n` with `Sigma` the Hessian at the fit.
    #[default]
    Model,
    /// `Sigma` replaced by the empirical second moment of per-observation scores.
    Sandwich,
}

/// Two-sided standard normal quantile `z_{1 - (1 - level)/2}`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {level}")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    Ok(z)
}

/// `sqrt(log p / n)`.
pub fn default_mu(p: usize, n: usize) -> f64 {
    ((p.max(2) as f64).ln() / n as f64).sqrt()
}

pub(crate) fn augmented(x: &DMatrix<f64>, intercept: bool) -> DMatrix<f64> {
    if !intercept {
        return x.clone();
    }
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

fn fit_coefficients(fit: &FitResult) -> Vec<f64> {
    if fit.fit_intercept {
        fit.coefficients()
    } else {
        fit.beta.clone()
    }
}

fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.tr_mul(x) / x.nrows() as f64
}

fn check_rows(x: &DMatrix<f64>, y: &[f64], fit: &FitResult) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} responses", x.nrows(), y.len())));
    }
    if x.ncols() != fit.beta.len() {
        return Err(Error::Dimension(format!(
            "{} columns vs {} fitted coefficients",
            x.ncols(),
            fit.beta.len()
        )));
    }
    Ok(())
}

fn build_table(b: &[f64], var: &[f64], level: f64, intercept: bool) -> Result<IntervalTable> {
    let z = normal_quantile(level)?;
    let mut table = IntervalTable::new(CiMethod::Debias, level);
    for (j, (&bj, &vj)) in b.iter().zip(var).enumerate() {
        let half = z * vj.max(0.0).sqrt();
        table.push(default_coef_name(j, intercept), bj, bj - half, bj + half)?;
    }
    Ok(table)
}

/// Minimizes `u' S u` subject to `|S u - e_j|_inf <= mu`.
///
/// Solved through its dual `min 1/2 v'Sv - v_j + mu |v|_1`, whose minimizer is
/// primal optimal.
pub fn solve_u_column(sigma_hat: &DMatrix<f64>, j: usize, mu: f64) -> Result<DVector<f64>> {
    let p = sigma_hat.nrows();
    if sigma_hat.ncols() != p {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    if j >= p {
        return Err(Error::Dimension(format!("column {j} out of range for dimension {p}")));
    }
    if !(mu > 0.0) {
        return Err(Error::Config(format!("constraint slack must be positive, got {mu}")));
    }
    let mut c = vec![0.0; p];
    c[j] = 1.0;
    let pen = PenaltySpec::lasso(mu, p);
    let mut v = vec![0.0; p];
    let done = coordinate_descent(sigma_hat, &c, &pen, 0, &mut v, 20_000, 1e-14);
    let u = DVector::from_vec(v);
    let r = sigma_hat * &u;
    let worst = (0..p).fold(0.0f64, |a, k| a.max((r[k] - c[k]).abs()));
    if !done || !(worst <= mu + 1e-9) || u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Infeasible { column: j, mu });
    }
    Ok(u)
}

/// Residual standard error of a linear fit, corrected for the selected model size.
pub fn lm_sigma_hat(fit: &FitResult, x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    check_rows(x, y, fit)?;
    let n = y.len();
    let df = fit.active_set.len() + usize::from(fit.fit_intercept);
    if n <= df {
        return Err(Error::InsufficientDf { n, df });
    }
    let eta = fit.linear_predictor(x);
    let rss: f64 = y.iter().zip(&eta).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((rss / (n - df) as f64).sqrt())
}

/// De-biased lasso for the linear model: `b = beta + M X'(y - X beta) / n`.
pub fn debias_lm(
    fit: &FitResult,
    x: &DMatrix<f64>,
    y: &[f64],
    mu: f64,
    sigma_eps_hat: f64,
    level: f64,
) -> Result<DebiasResult> {
    check_rows(x, y, fit)?;
    if !(sigma_eps_hat > 0.0) {
        return Err(Error::Config(format!("noise scale must be positive, got {sigma_eps_hat}")));
    }
    let xa = augmented(x, fit.fit_intercept);
    let n = xa.nrows() as f64;
    let q = xa.ncols();
    let sigma = gram(&xa);
    let rows: Vec<Result<DVector<f64>>> = (0..q)
        .into_par_iter()
        .map(|j| solve_u_column(&sigma, j, mu))
        .collect();
    let mut m = DMatrix::zeros(q, q);
    for (j, r) in rows.into_iter().enumerate() {
        m.set_row(j, &r?.transpose());
    }

    let beta = DVector::from_vec(fit_coefficients(fit));
    let resid = DVector::from_column_slice(y) - &xa * &beta;
    let b = &beta + &m * (xa.tr_mul(&resid) / n);
    let msm = &m * &sigma * m.transpose();
    let var: Vec<f64> = (0..q)
        .map(|j| sigma_eps_hat * sigma_eps_hat * msm[(j, j)] / n)
        .collect();
    let b = b.as_slice().to_vec();
    let intervals = build_table(&b, &var, level, fit.fit_intercept)?;
    Ok(DebiasResult {
        b_debiased: b,
        variance_diag: var,
        intervals,
        m_matrix: Some(m),
    })
}

fn scaled_rows(x: &DMatrix<f64>, fit: &FitResult, w: &[f64]) -> Result<DMatrix<f64>> {
    let mut xa = augmented(x, fit.fit_intercept);
    for (i, &wi) in w.iter().enumerate() {
        if !(wi > 0.0) || !wi.is_finite() {
            return Err(Error::Domain {
                index: i,
                reason: format!("weight {wi} is not positive"),
            });
        }
        xa.row_mut(i).scale_mut(wi.sqrt());
    }
    Ok(xa)
}

/// Design with row `i` scaled by `sqrt(w_i)` (expected information), so that
/// `Xw'Xw / n` is the Hessian of the mean loss. Includes the intercept column
/// when the fit has one.
pub fn weighted_design(x: &DMatrix<f64>, fit: &FitResult, family: &FamilySpec) -> Result<DMatrix<f64>> {
    if x.ncols() != fit.beta.len() {
        return Err(Error::Dimension(format!("{} columns vs {} coefficients", x.ncols(), fit.beta.len())));
    }
    let w: Vec<f64> = fit
        .linear_predictor(x)
        .into_iter()
        .map(|e| family.expected_weight(family.inverse_link(e)))
        .collect();
    scaled_rows(x, fit, &w)
}

/// As [`weighted_design`] but with observed-information weights `rho''(y, eta)`.
pub fn observed_weighted_design(
    x: &DMatrix<f64>,
    y: &[f64],
    fit: &FitResult,
    family: &FamilySpec,
) -> Result<DMatrix<f64>> {
    check_rows(x, y, fit)?;
    let w: Vec<f64> = fit
        .linear_predictor(x)
        .into_iter()
        .zip(y)
        .map(|(e, &yi)| family.observed_weight(yi, e))
        .collect();
    scaled_rows(x, fit, &w)
}

fn drop_column(x: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    x.clone().remove_column(j)
}

/// Nodewise lasso: regress each column on the others and assemble rows
/// `(-gamma_j with 1 at j) / tau_j^2`.
pub fn nodewise_theta(xw: &DMatrix<f64>, lambda_js: &[f64]) -> Result<PrecisionEstimate> {
    let (n, q) = xw.shape();
    if lambda_js.len() != q {
        return Err(Error::Dimension(format!("{} penalties for {q} columns", lambda_js.len())));
    }
    if let Some(j) = lambda_js.iter().position(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::Config(format!("nodewise penalty {j} must be finite and nonnegative")));
    }
    if q < 2 {
        return direct_theta(xw).map(|mut e| {
            e.method = PrecisionMethod::Nodewise;
            e.lambda_js = lambda_js.to_vec();
            e
        });
    }
    if lambda_js.contains(&0.0) {
        if n < q {
            return Err(Error::InsufficientDf { n, df: q });
        }
        let eig = SymmetricEigen::new(gram(xw));
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v.abs())));
        if !(lo > 1e-12 * hi) {
            let k = eig.eigenvalues.imin();
            let dir = eig.eigenvectors.column(k);
            let j = (0..q)
                .find(|&j| lambda_js[j] == 0.0 && dir[j].abs() > 1e-6)
                .unwrap_or_else(|| lambda_js.iter().position(|&l| l == 0.0).unwrap_or(0));
            return Err(Error::Singular(j));
        }
    }
    let cfg = SolverConfig {
        standardize: false,
        fit_intercept: false,
        ..SolverConfig::default()
    };
    let fam = FamilySpec::gaussian();
    let rows: Vec<Result<(Vec<f64>, f64)>> = (0..q)
        .into_par_iter()
        .map(|j| {
            let others = drop_column(xw, j);
            let target: Vec<f64> = xw.column(j).iter().copied().collect();
            let fit = fit_penalized_glm(&others, &target, &fam, &PenaltySpec::lasso(lambda_js[j], q - 1), &cfg)?;
            let pred = fit.linear_predictor(&others);
            let rss: f64 = target.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
            let l1: f64 = fit.beta.iter().map(|v| v.abs()).sum();
            let tau_sq = rss / n as f64 + lambda_js[j] * l1;
            if !(tau_sq > 1e-14 * target.iter().map(|v| v * v).sum::<f64>() / n as f64) {
                return Err(Error::Singular(j));
            }
            Ok((fit.beta, tau_sq))
        })
        .collect();
    let mut theta = DMatrix::zeros(q, q);
    let mut tau = Vec::with_capacity(q);
    for (j, r) in rows.into_iter().enumerate() {
        let (gamma, t2) = r?;
        let mut k = 0;
        for c in 0..q {
            theta[(j, c)] = if c == j {
                1.0 / t2
            } else {
                k += 1;
                -gamma[k - 1] / t2
            };
        }
        tau.push(t2);
    }
    Ok(PrecisionEstimate {
        theta,
        method: PrecisionMethod::Nodewise,
        tau_sq: tau,
        lambda_js: lambda_js.to_vec(),
    })
}

/// Shared nodewise penalty: 5-fold CV on the regression of the first feature
/// column (column 1 when an intercept column leads) on the rest.
pub fn select_nodewise_lambda(xw: &DMatrix<f64>, intercept_first: bool, seed: u64) -> Result<f64> {
    let q = xw.ncols();
    if q < 2 {
        return Err(Error::Dimension("nodewise regression needs at least two columns".into()));
    }
    let j = usize::from(intercept_first && q > 2);
    let cfg = SolverConfig {
        standardize: false,
        fit_intercept: false,
        ..SolverConfig::default()
    };
    let target: Vec<f64> = xw.column(j).iter().copied().collect();
    let cv = select_lambda_cv(&drop_column(xw, j), &target, &FamilySpec::gaussian(), &CvConfig::default(), seed, &cfg)?;
    Ok(cv.best_lambda)
}

/// Direct inverse of `Xw'Xw / n`.
pub fn direct_theta(xw: &DMatrix<f64>) -> Result<PrecisionEstimate> {
    let (n, q) = xw.shape();
    if n < q {
        return Err(Error::InsufficientDf { n, df: q });
    }
    let sigma = gram(xw);
    let eig = SymmetricEigen::new(sigma.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= 1e12) {
        return Err(Error::IllConditioned(cond));
    }
    let theta = sigma.cholesky().ok_or(Error::IllConditioned(cond))?.inverse();
    let theta = (&theta + theta.transpose()) * 0.5;
    let tau_sq = (0..q).map(|j| 1.0 / theta[(j, j)]).collect();
    Ok(PrecisionEstimate {
        theta,
        method: PrecisionMethod::Direct,
        tau_sq,
        lambda_js: vec![0.0; q],
    })
}

/// One-step de-biased GLM estimator `b = beta - Theta grad(beta)` with
/// model-based variance.
pub fn debias_glm(
    fit: &FitResult,
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    theta: &PrecisionEstimate,
    level: f64,
) -> Result<DebiasResult> {
    debias_glm_with(fit, x, y, family, theta, level, GlmVariance::Model)
}

pub fn debias_glm_with(
    fit: &FitResult,
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    theta: &PrecisionEstimate,
    level: f64,
    variance: GlmVariance,
) -> Result<DebiasResult> {
    check_rows(x, y, fit)?;
    let xa = augmented(x, fit.fit_intercept);
    let (n, q) = xa.shape();
    if theta.theta.shape() != (q, q) {
        return Err(Error::Dimension(format!(
            "precision estimate is {:?} but the fit has {q} coefficients",
            theta.theta.shape()
        )));
    }
    let eta = fit.linear_predictor(x);
    let score = DVector::from_iterator(n, y.iter().zip(&eta).map(|(&yi, &e)| family.unit_gradient(yi, e)));
    let grad = xa.tr_mul(&score) / n as f64;
    let beta = DVector::from_vec(fit_coefficients(fit));
    let b = &beta - &theta.theta * grad;

    let (middle, phi) = match variance {
        GlmVariance::Model => {
            let xw = weighted_design(x, fit, family)?;
            let phi = if family.has_fixed_dispersion() {
                1.0
            } else {
                let mu: Vec<f64> = eta.iter().map(|&e| family.inverse_link(e)).collect();
                estimate_dispersion(family, y, &mu, fit.active_set.len() + usize::from(fit.fit_intercept))?
            };
            (gram(&xw), phi)
        }
        GlmVariance::Sandwich => {
            let mut xs = xa.clone();
            for (i, s) in score.iter().enumerate() {
                xs.row_mut(i).scale_mut(*s);
            }
            (gram(&xs), 1.0)
        }
    };
    let v = &theta.theta * middle * theta.theta.transpose();
    let var: Vec<f64> = (0..q).map(|j| phi * v[(j, j)] / n as f64).collect();
    let b = b.as_slice().to_vec();
    let intervals = build_table(&b, &var, level, fit.fit_intercept)?;
    Ok(DebiasResult {
        b_debiased: b,
        variance_diag: var,
        intervals,
        m_matrix: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::neg_log_lik;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    /// Brute-force QP oracle: enumerate sign patterns/active faces of the
    /// dual lasso for small p and keep the best KKT-consistent candidate.
    fn dual_oracle(s: &DMatrix<f64>, j: usize, mu: f64) -> DVector<f64> {
        let p = s.nrows();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for code in 0..3usize.pow(p as u32) {
            let mut signs = vec![0i32; p];
            let mut c = code;
            for sgn in signs.iter_mut() {
                *sgn = (c % 3) as i32 - 1;
                c /= 3;
            }
            let act: Vec<usize> = (0..p).filter(|&k| signs[k] != 0).collect();
            let mut v = DVector::zeros(p);
            if !act.is_empty() {
                let a = DMatrix::from_fn(act.len(), act.len(), |r, c| s[(act[r], act[c])]);
                let rhs = DVector::from_fn(act.len(), |r, _| {
                    f64::from(u8::from(act[r] == j)) - mu * signs[act[r]] as f64
                });
                let Some(sol) = a.lu().solve(&rhs) else { continue };
                if act.iter().enumerate().any(|(r, &k)| sol[r] * signs[k] as f64 <= 0.0) {
                    continue;
                }
                for (r, &k) in act.iter().enumerate() {
                    v[k] = sol[r];
                }
            }
            let g = s * &v;
            let ok = (0..p).all(|k| signs[k] != 0 || (g[k] - f64::from(u8::from(k == j))).abs() <= mu + 1e-12);
            if ok {
                let obj = 0.5 * v.dot(&g) - v[j] + mu * v.abs().sum();
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, v));
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn identity_covariance_gives_shrunk_unit_vector() {
        let s = DMatrix::identity(3, 3);
        for &mu in &[0.05, 0.3, 0.9] {
            let u = solve_u_column(&s, 1, mu).unwrap();
            let expect = DVector::from_vec(vec![0.0, 1.0 - mu, 0.0]);
            assert!((u - &expect).amax() < 1e-12);
            assert!((dual_oracle(&s, 1, mu) - expect).amax() < 1e-12);
        }
    }

    #[test]
    fn correlated_pair_matches_qp_oracle() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        for j in 0..2 {
            let u = solve_u_column(&s, j, 0.05).unwrap();
            let o = dual_oracle(&s, j, 0.05);
            assert!((u - o).amax() < 1e-6);
        }
    }

    #[test]
    fn random_columns_feasible_and_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x = randn(&mut rng, 30, 4);
            let s = gram(&x);
            for j in 0..4 {
                let u = solve_u_column(&s, j, 0.1).unwrap();
                let mut e = DVector::zeros(4);
                e[j] = 1.0;
                assert!((&s * &u - e).amax() <= 0.1 + 1e-9);
                assert!((&u - dual_oracle(&s, j, 0.1)).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn large_slack_returns_zero() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let u = solve_u_column(&s, 0, 1.0).unwrap();
        assert_eq!(u.amax(), 0.0);
    }

    #[test]
    fn singular_covariance_with_tight_slack_is_infeasible() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(solve_u_column(&s, 0, 0.1), Err(Error::Infeasible { column: 0, .. })));
    }

    fn centered_orthonormal(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        // columns orthogonal to 1 and each other with x_j'x_j = n
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = randn(&mut rng, n, p + 1);
        a.column_mut(0).fill(1.0);
        let q = a.qr().q();
        q.columns(1, p).into_owned() * (n as f64).sqrt()
    }

    #[test]
    fn orthogonal_design_debias_is_ols() {
        let (n, p) = (100, 5);
        let x = centered_orthonormal(n, p, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.8 * x[(i, 0)] - 0.5 * x[(i, 3)] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = fit_penalized_glm(&x, &y, &FamilySpec::gaussian(), &PenaltySpec::lasso(0.2, p), &SolverConfig::default()).unwrap();
        let res = debias_lm(&fit, &x, &y, 1e-9, 1.0, 0.95).unwrap();
        // Sigma = I so M = (1 - mu) I; OLS coordinates are x_j'y / n
        for j in 0..p {
            let ols: f64 = (0..n).map(|i| x[(i, j)] * y[i]).sum::<f64>() / n as f64;
            assert!((res.b_debiased[j + 1] - ols).abs() < 1e-7, "{j}");
        }
        let ybar = y.iter().sum::<f64>() / n as f64;
        assert!((res.b_debiased[0] - ybar).abs() < 1e-7);
    }

    #[test]
    fn unpenalized_fit_with_inverse_has_no_correction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = randn(&mut rng, 60, 3);
        let y: Vec<f64> = (0..60).map(|i| x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = fit_penalized_glm(&x, &y, &FamilySpec::gaussian(), &PenaltySpec::none(3), &SolverConfig::default()).unwrap();
        let xa = augmented(&x, true);
        let theta = direct_theta(&xa).unwrap();
        let res = debias_glm(&fit, &x, &y, &FamilySpec::gaussian(), &theta, 0.95).unwrap();
        for (a, b) in res.b_debiased.iter().zip(fit.coefficients()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_glm_path_agrees_with_lm_path() {
        let (n, p) = (80, 4);
        let x = centered_orthonormal(n, p, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y: Vec<f64> = (0..n).map(|i| 0.3 + x[(i, 2)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let fam = FamilySpec::gaussian();
        let fit = fit_penalized_glm(&x, &y, &fam, &PenaltySpec::lasso(0.1, p), &SolverConfig::default()).unwrap();
        let sigma = lm_sigma_hat(&fit, &x, &y).unwrap();
        let lm = debias_lm(&fit, &x, &y, 0.05, sigma, 0.9).unwrap();
        let theta = PrecisionEstimate {
            theta: lm.m_matrix.clone().unwrap(),
            method: PrecisionMethod::Program,
            tau_sq: vec![1.0; p + 1],
            lambda_js: vec![0.0; p + 1],
        };
        let glm = debias_glm(&fit, &x, &y, &fam, &theta, 0.9).unwrap();
        for j in 0..=p {
            assert!((lm.b_debiased[j] - glm.b_debiased[j]).abs() < 1e-12);
            assert!((lm.variance_diag[j] - glm.variance_diag[j]).abs() < 1e-12 * lm.variance_diag[j].max(1.0));
        }
    }

    #[test]
    fn weighted_design_examples() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let fit = fit_penalized_glm(&x, &[1.0, 4.0], &FamilySpec::poisson(), &PenaltySpec::none(1), &SolverConfig::default()).unwrap();
        // saturated two-point fit: mu = [1, 4]
        let xw = weighted_design(&x, &fit, &FamilySpec::poisson()).unwrap();
        assert!((xw[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((xw[(1, 0)] - 2.0).abs() < 1e-8);
        assert!((xw[(1, 1)] - 2.0).abs() < 1e-8);
        let g = FamilySpec::gaussian();
        let fit = fit_penalized_glm(&x, &[1.0, 4.0], &g, &PenaltySpec::none(1), &SolverConfig::default()).unwrap();
        assert_eq!(weighted_design(&x, &fit, &g).unwrap(), augmented(&x, true));
    }

    #[test]
    fn tweedie_hessian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, p) = (40, 3);
        let x = randn(&mut rng, n, p);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let m: f64 = (0.2 + 0.4 * x[(i, 0)]).exp();
                if rng.random::<f64>() < 0.3 { 0.0 } else { m * rng.random_range(0.3..2.0) }
            })
            .collect();
        let fam = FamilySpec::tweedie(1.5).unwrap();
        let fit = fit_penalized_glm(&x, &y, &fam, &PenaltySpec::lasso(0.02, p), &SolverConfig::default()).unwrap();
        let xa = augmented(&x, true);
        let xw = observed_weighted_design(&x, &y, &fit, &fam).unwrap();
        let h = gram(&xw);
        let b0 = DVector::from_vec(fit.coefficients());
        let loss = |b: &DVector<f64>| neg_log_lik(&fam, &y, (&xa * b).as_slice()).unwrap();
        let step = 1e-4;
        for a in 0..=p {
            for c in 0..=p {
                let e = |da: f64, dc: f64| {
                    let mut b = b0.clone();
                    b[a] += da;
                    b[c] += dc;
                    loss(&b)
                };
                let fd = (e(step, step) - e(step, -step) - e(-step, step) + e(-step, -step)) / (4.0 * step * step);
                assert!((fd - h[(a, c)]).abs() <= 1e-4 * h[(a, c)].abs().max(1e-2), "{a},{c}: {fd} vs {}", h[(a, c)]);
            }
        }
    }

    #[test]
    fn nodewise_orthogonal_columns_is_diagonal() {
        let x = centered_orthonormal(50, 3, 1) * 2.0;
        let est = nodewise_theta(&x, &[0.0; 3]).unwrap();
        for j in 0..3 {
            assert!((est.tau_sq[j] - 4.0).abs() < 1e-9);
            for c in 0..3 {
                let want = if c == j { 0.25 } else { 0.0 };
                assert!((est.theta[(j, c)] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn nodewise_unpenalized_equals_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = randn(&mut rng, 50, 4);
        for i in 0..50 {
            x[(i, 1)] += 0.6 * x[(i, 0)];
        }
        let nw = nodewise_theta(&x, &[0.0; 4]).unwrap();
        let inv = gram(&x).try_inverse().unwrap();
        assert!((nw.theta - inv).amax() < 1e-6);
    }

    #[test]
    fn nodewise_penalized_rows_are_kkt_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = randn(&mut rng, 40, 3);
        for i in 0..40 {
            x[(i, 2)] = 0.7 * x[(i, 0)] + 0.3 * x[(i, 2)];
        }
        let est = nodewise_theta(&x, &[0.1; 3]).unwrap();
        let s = gram(&x);
        for j in 0..3 {
            // recover gamma from the row and check the lasso subgradient conditions
            let t2 = est.tau_sq[j];
            for k in (0..3).filter(|&k| k != j) {
                let gamma: Vec<f64> = (0..3).map(|c| if c == j { 0.0 } else { -est.theta[(j, c)] * t2 }).collect();
                let grad = -(s[(k, j)] - (0..3).map(|c| s[(k, c)] * gamma[c]).sum::<f64>());
                if gamma[k] != 0.0 {
                    assert!((grad + 0.1 * gamma[k].signum()).abs() < 1e-6);
                } else {
                    assert!(grad.abs() <= 0.1 + 1e-6);
                }
            }
        }
    }

    #[test]
    fn collinear_columns_are_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x = randn(&mut rng, 30, 3);
        for i in 0..30 {
            x[(i, 2)] = x[(i, 0)] - x[(i, 1)];
        }
        assert!(matches!(nodewise_theta(&x, &[0.0; 3]), Err(Error::Singular(_))));
        assert!(matches!(direct_theta(&x), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn direct_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0 * 2f64.sqrt()]);
        // Sigma = X'X/2 = diag(2, 4)
        let t = direct_theta(&x).unwrap();
        assert!((t.theta[(0, 0)] - 0.5).abs() < 1e-14, "{}", t.theta);
        assert!((t.theta[(1, 1)] - 0.25).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = randn(&mut rng, 20, 5);
        let t = direct_theta(&x).unwrap();
        assert!((&t.theta * gram(&x) - DMatrix::identity(5, 5)).amax() < 1e-10);
    }

    fn newton_poisson(xa: &DMatrix<f64>, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let q = xa.ncols();
        let mut b = DVector::zeros(q);
        for _ in 0..50 {
            let mu = (xa * &b).map(f64::exp);
            let g = xa.tr_mul(&(mu.clone() - DVector::from_column_slice(y)));
            let mut h = DMatrix::zeros(q, q);
            for i in 0..xa.nrows() {
                let r = xa.row(i);
                h += r.transpose() * r * mu[i];
            }
            b -= h.clone().lu().solve(&g).unwrap();
        }
        let mu = (xa * &b).map(f64::exp);
        let mut h = DMatrix::zeros(q, q);
        for i in 0..xa.nrows() {
            let r = xa.row(i);
            h += r.transpose() * r * mu[i];
        }
        (b, h.try_inverse().unwrap())
    }

    #[test]
    fn unpenalized_poisson_reduces_to_wald() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = randn(&mut rng, 120, 2);
        let y: Vec<f64> = (0..120)
            .map(|i| Poisson::new((0.4f64 + 0.3 * x[(i, 0)]).exp()).unwrap().sample(&mut rng))
            .collect();
        let fam = FamilySpec::poisson();
        let fit = fit_penalized_glm(&x, &y, &fam, &PenaltySpec::none(2), &SolverConfig::default()).unwrap();
        let theta = direct_theta(&weighted_design(&x, &fit, &fam).unwrap()).unwrap();
        let res = debias_glm(&fit, &x, &y, &fam, &theta, 0.95).unwrap();
        let (b, cov) = newton_poisson(&augmented(&x, true), &y);
        for j in 0..3 {
            let half = 1.959963984540054 * cov[(j, j)].sqrt();
            let r = &res.intervals.rows[j];
            assert!((r.lower - (b[j] - half)).abs() < 1e-8);
            assert!((r.upper - (b[j] + half)).abs() < 1e-8);
        }
    }

    #[test]
    fn intervals_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = randn(&mut rng, 50, 3);
        let y: Vec<f64> = (0..50).map(|i| x[(i, 0)] + rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = fit_penalized_glm(&x, &y, &FamilySpec::gaussian(), &PenaltySpec::lasso(0.1, 3), &SolverConfig::default()).unwrap();
        let res = debias_lm(&fit, &x, &y, 0.1, 1.0, 0.95).unwrap();
        for r in &res.intervals.rows {
            assert!(((r.upper - r.point_estimate) - (r.point_estimate - r.lower)).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_matches_reference() {
        assert!((normal_quantile(0.95).unwrap() - 1.959963984540054).abs() < 1e-9);
        assert!(normal_quantile(1.0).is_err());
    }
}
