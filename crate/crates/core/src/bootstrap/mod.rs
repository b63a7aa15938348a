//! Resampling interval engines: residual bootstrap for linear models and
//! GLMs, the paired lasso bootstrap, and the paired lasso + partial ridge
//! (PLR) bootstrap.
//!
//! Every replicate draws from its own generator seeded by
//! `(master_seed, replicate_index)` and results are reduced in replicate
//! order, so output does not depend on the number of workers.

mod paired;
mod residual;

pub use paired::{paired_bootstrap_glm, plr_glm, LambdaRule};
pub use residual::{reconstruct_response, residual_bootstrap_glm, residual_bootstrap_lm};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{default_coef_name, CiMethod, IntervalTable};
use crate::solver::SolverConfig;

/// Residual flavour resampled by the GLM residual bootstrap. Responses are
/// always rebuilt through the Pearson linearization `mu + sqrt(v) e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualType {
    #[default]
    Pearson,
    Deviance,
    Anscombe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiVariant {
    /// `[b + b_mod - q_hi, b + b_mod - q_lo]`.
    #[default]
    Hybrid,
    /// `[2b - q_hi, 2b - q_lo]`.
    Basic,
    /// `[q_lo, q_hi]`.
    Percentile,
}

/// Which coefficients the modified estimator zeroes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// `|b_j| <= a_n` becomes 0.
    #[default]
    Small,
    /// `b_j * 1{|b_j| < a_n}`: keeps only the small coefficients.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_replicates: usize,
    pub level: f64,
    pub master_seed: u64,
    pub a_n_constant: f64,
    pub residual_type: ResidualType,
    pub ci_variant: CiVariant,
    pub threshold: ThresholdRule,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
    pub solver: SolverConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_replicates: 50,
            level: 0.95,
            master_seed: 0,
            a_n_constant: 1.0,
            residual_type: ResidualType::Pearson,
            ci_variant: CiVariant::Hybrid,
            threshold: ThresholdRule::Small,
            workers: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates < 2 {
            return Err(Error::Config(format!(
                "need at least 2 replicates, got {}",
                self.n_replicates
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if !(self.a_n_constant >= 0.0) || !self.a_n_constant.is_finite() {
            return Err(Error::Config(format!(
                "threshold constant must be finite and nonnegative, got {}",
                self.a_n_constant
            )));
        }
        Ok(())
    }

    /// Residual bootstraps need `B * alpha / 2 >= 1` to resolve the tail quantiles.
    fn validate_tails(&self) -> Result<()> {
        self.validate()?;
        let tail = self.n_replicates as f64 * (1.0 - self.level) / 2.0;
        if tail < 1.0 - 1e-9 {
            return Err(Error::Config(format!(
                "{} replicates cannot resolve the {:.4} tail quantile (B * alpha / 2 = {tail:.3} < 1)",
                self.n_replicates,
                (1.0 - self.level) / 2.0
            )));
        }
        Ok(())
    }
}

/// One bootstrap replicate's coefficient estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDraw {
    pub replicate_index: usize,
    /// Seed of the attempt that produced `beta_star`.
    pub seed: u64,
    pub attempts: u32,
    pub beta_star: Vec<f64>,
    pub lambda1: f64,
}

/// A finished bootstrap run: the interval table plus everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRun {
    pub table: IntervalTable,
    pub point_estimate: Vec<f64>,
    pub modified: Option<Vec<f64>>,
    pub draws: Vec<ReplicateDraw>,
    /// Lambda used for the full-data fit.
    pub lambda1: f64,
    /// Fraction of rebuilt responses clamped at zero (GLM residual bootstrap only).
    pub clamp_fraction: Option<f64>,
    /// Set when the clamp fraction reaches 20%.
    pub clamp_flagged: bool,
    pub total_fits: usize,
}

impl BootstrapRun {
    /// Draws of coefficient `j` across replicates, in replicate order.
    pub fn coefficient_draws(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.beta_star[j]).collect()
    }
}

pub(crate) const MAX_RETRIES: u32 = 10;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` on retry `attempt`; a pure function of its inputs.
pub fn replicate_seed(master_seed: u64, index: usize, attempt: u32) -> u64 {
    let a = splitmix64(master_seed);
    let b = splitmix64(a ^ (index as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ u64::from(attempt).rotate_left(40))
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Interval from bootstrap draws at `level`, using the bracket formula of `variant`.
pub fn percentile_interval(
    draws: &[f64],
    level: f64,
    variant: CiVariant,
    point: f64,
    modified: f64,
) -> Result<(f64, f64)> {
    if draws.is_empty() {
        return Err(Error::InvalidInput("no bootstrap draws".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {level}")));
    }
    if draws.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidInput("bootstrap draws contain NaN".into()));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let q_lo = quantile_type7(&s, alpha / 2.0);
    let q_hi = quantile_type7(&s, 1.0 - alpha / 2.0);
    let (lo, hi) = match variant {
        CiVariant::Percentile => (q_lo, q_hi),
        CiVariant::Hybrid => (point + modified - q_hi, point + modified - q_lo),
        CiVariant::Basic => (2.0 * point - q_hi, 2.0 * point - q_lo),
    };
    Ok((lo, hi.max(lo)))
}

/// `a_n = c * n^(-1/4)`.
pub fn threshold_a_n(n: usize, a_n_constant: f64) -> f64 {
    a_n_constant * (n as f64).powf(-0.25)
}

/// Thresholded lasso estimate under the default rule (`|b_j| <= a_n` zeroed).
pub fn modified_estimator(beta_hat: &[f64], n: usize, a_n_constant: f64) -> Vec<f64> {
    modified_estimator_with(beta_hat, n, a_n_constant, ThresholdRule::Small)
}

pub fn modified_estimator_with(
    beta_hat: &[f64],
    n: usize,
    a_n_constant: f64,
    rule: ThresholdRule,
) -> Vec<f64> {
    let a_n = threshold_a_n(n, a_n_constant);
    beta_hat
        .iter()
        .map(|&b| match rule {
            ThresholdRule::Small if b.abs() <= a_n => 0.0,
            ThresholdRule::Printed if b.abs() >= a_n => 0.0,
            _ => b,
        })
        .collect()
}

/// Modified estimator on `[b0, beta...]`; the intercept is never thresholded.
pub(crate) fn modified_coefficients(coef: &[f64], n: usize, cfg: &BootstrapConfig, intercept: bool) -> Vec<f64> {
    let off = usize::from(intercept);
    let mut out = coef.to_vec();
    let m = modified_estimator_with(&coef[off..], n, cfg.a_n_constant, cfg.threshold);
    out[off..].copy_from_slice(&m);
    out
}

/// Outcome of one replicate attempt.
pub(crate) enum Attempt {
    Done { beta: Vec<f64>, lambda1: f64, clamped: usize, fits: usize },
    /// The resample is degenerate; draw again with a fresh seed.
    Retry(String),
}

/// Runs `body(index, seed)` for every replicate, retrying degenerate draws,
/// and returns draws in replicate order.
pub(crate) fn run_replicates<F>(cfg: &BootstrapConfig, body: F) -> Result<(Vec<ReplicateDraw>, usize, usize)>
where
    F: Fn(usize, u64) -> Result<Attempt> + Sync,
{
    let one = |index: usize| -> Result<(ReplicateDraw, usize, usize)> {
        let mut reason = String::new();
        for attempt in 0..=MAX_RETRIES {
            let seed = replicate_seed(cfg.master_seed, index, attempt);
            match body(index, seed)? {
                Attempt::Done {
                    beta,
                    lambda1,
                    clamped,
                    fits: f,
                } => {
                    let draw = ReplicateDraw {
                        replicate_index: index,
                        seed,
                        attempts: attempt + 1,
                        beta_star: beta,
                        lambda1,
                    };
                    return Ok((draw, clamped, f));
                }
                Attempt::Retry(r) => reason = r,
            }
        }
        Err(Error::ReplicateFailure {
            replicate: index,
            attempts: MAX_RETRIES as usize + 1,
            reason,
        })
    };
    let work = || -> Vec<Result<(ReplicateDraw, usize, usize)>> {
        (0..cfg.n_replicates).into_par_iter().map(one).collect()
    };
    let results = if cfg.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(work)
    };
    let mut draws = Vec::with_capacity(cfg.n_replicates);
    let (mut clamped, mut fits) = (0, 0);
    for r in results {
        let (d, c, f) = r?;
        draws.push(d);
        clamped += c;
        fits += f;
    }
    Ok((draws, clamped, fits))
}

pub(crate) fn assemble_table(
    method: CiMethod,
    cfg: &BootstrapConfig,
    variant: CiVariant,
    point: &[f64],
    modified: &[f64],
    draws: &[ReplicateDraw],
    intercept: bool,
) -> Result<IntervalTable> {
    let mut table = IntervalTable::new(method, cfg.level);
    for j in 0..point.len() {
        let col: Vec<f64> = draws.iter().map(|d| d.beta_star[j]).collect();
        let (lo, hi) = percentile_interval(&col, cfg.level, variant, point[j], modified[j])?;
        table.push(default_coef_name(j, intercept), point[j], lo, hi)?;
    }
    Ok(table)
}
