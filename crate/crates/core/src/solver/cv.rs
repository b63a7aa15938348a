use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{fit_path, lambda_path};
use super::{PenaltySpec, PreparedProblem, SolverConfig};
use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilySpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub n_lambda: usize,
    pub ratio: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            n_lambda: 40,
            ratio: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    pub mean_cv_loss: Vec<f64>,
    pub se_cv_loss: Vec<f64>,
    pub best_lambda: f64,
    pub best_index: usize,
    pub fold_assignment: Vec<usize>,
}

impl CvResult {
    /// Wraps a single pre-chosen lambda.
    pub fn fixed(lambda: f64) -> Self {
        Self {
            lambda_grid: vec![lambda],
            mean_cv_loss: vec![f64::NAN],
            se_cv_loss: vec![f64::NAN],
            best_lambda: lambda,
            best_index: 0,
            fold_assignment: Vec::new(),
        }
    }
}

fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}

/// K-fold cross-validation of the lasso over `grid`, scored by held-out mean deviance.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    k: usize,
    grid: &[f64],
    seed: u64,
    cfg: &SolverConfig,
    base: Option<&PenaltySpec>,
) -> Result<CvResult> {
    let n = y.len();
    if k < 2 || k > n {
        return Err(Error::Config(format!(
            "fold count must satisfy 2 <= K <= n, got K = {k}, n = {n}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if x.nrows() != n {
        return Err(Error::Dimension(format!("{} rows vs {n} responses", x.nrows())));
    }
    let default_base = PenaltySpec::lasso(0.0, x.ncols());
    let base = base.unwrap_or(&default_base);
    let folds = fold_assignment(n, k, seed);

    let per_fold: Vec<Result<Vec<f64>>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let degenerate = |e: Error| Error::FoldDegenerate {
                fold: f,
                reason: e.to_string(),
            };
            let xt = select_rows(x, &train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            if family.kind != FamilyKind::Gaussian && yt.iter().all(|&v| v == 0.0) {
                return Err(Error::FoldDegenerate {
                    fold: f,
                    reason: "all training responses are zero".into(),
                });
            }
            let prob = PreparedProblem::new(&xt, &yt, family, cfg).map_err(degenerate)?;
            let path = fit_path(&prob, grid, base).map_err(degenerate)?;
            let xv = select_rows(x, &test);
            path.iter()
                .map(|fit| {
                    let mu = fit.fitted_mean(&xv, family);
                    let dev = test
                        .iter()
                        .zip(&mu)
                        .map(|(&i, &m)| family.unit_deviance(y[i], m))
                        .sum::<f64>()
                        / test.len() as f64;
                    if dev.is_finite() {
                        Ok(dev)
                    } else {
                        Err(Error::FoldDegenerate {
                            fold: f,
                            reason: "held-out deviance is not finite".into(),
                        })
                    }
                })
                .collect()
        })
        .collect();

    let mut losses = Vec::with_capacity(k);
    for r in per_fold {
        losses.push(r?);
    }
    let m = grid.len();
    let mut mean = vec![0.0; m];
    let mut se = vec![0.0; m];
    for l in 0..m {
        let vals: Vec<f64> = losses.iter().map(|v| v[l]).collect();
        let mu = vals.iter().sum::<f64>() / k as f64;
        let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (k - 1) as f64;
        mean[l] = mu;
        se[l] = (var / k as f64).sqrt();
    }
    // ties resolve to the smallest lambda
    let mut best = 0;
    for l in 0..m {
        let better = if grid[l] <= grid[best] {
            mean[l] <= mean[best]
        } else {
            mean[l] < mean[best]
        };
        if better {
            best = l;
        }
    }
    Ok(CvResult {
        lambda_grid: grid.to_vec(),
        mean_cv_loss: mean,
        se_cv_loss: se,
        best_lambda: grid[best],
        best_index: best,
        fold_assignment: folds,
    })
}

/// Builds the lambda path on the full data and cross-validates over it.
pub fn select_lambda_cv(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    cv: &CvConfig,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<CvResult> {
    let grid = lambda_path(x, y, family, cv.n_lambda, cv.ratio, cfg)?;
    cross_validate(x, y, family, cv.folds, &grid, seed, cfg, None)
}

/// Profiles the Tweedie power over `powers`, returning the power with the
/// smallest cross-validated deviance and every profile point.
pub fn select_tweedie_power(
    x: &DMatrix<f64>,
    y: &[f64],
    powers: &[f64],
    cv: &CvConfig,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<(f64, Vec<(f64, CvResult)>)> {
    if powers.is_empty() {
        return Err(Error::Config("empty tweedie power grid".into()));
    }
    let mut profile = Vec::with_capacity(powers.len());
    for &p in powers {
        let fam = FamilySpec::tweedie(p)?;
        profile.push((p, select_lambda_cv(x, y, &fam, cv, seed, cfg)?));
    }
    let best = profile
        .iter()
        .min_by(|a, b| {
            let la = a.1.mean_cv_loss[a.1.best_index];
            let lb = b.1.mean_cv_loss[b.1.best_index];
            la.total_cmp(&lb)
        })
        .map(|(p, _)| *p)
        .expect("non-empty profile");
    Ok((best, profile))
}
