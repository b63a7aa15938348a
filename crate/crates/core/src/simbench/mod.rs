//! Synthetic coverage experiments: scenario construction, data generation,
//! the Monte-Carlo driver and coverage/width reports.

mod experiment;
mod report;

pub use experiment::{
    run_coverage_experiment, run_coverage_experiment_logged, run_methods, width_comparison,
    ExperimentConfig, RepetitionRecord, SimMethod, WidthComparison,
};
pub use report::{recount_from_log, CoverageReport, CoverageRow, RunManifest};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::replicate_seed;
use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilySpec, Link};

/// Complete description of a synthetic experiment.
///
/// The design has `p` columns, the first of which is the constant 1, so
/// `beta_true[0]` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub n: usize,
    pub p: usize,
    pub beta_true: Vec<f64>,
    pub family: FamilySpec,
    pub feature_mean_range: (f64, f64),
    /// Bootstrap replicates per dataset.
    pub n_replicates: usize,
    /// Independent datasets.
    pub repetitions: usize,
    pub master_seed: u64,
}

/// `beta_0 = 0.5`, `beta_i = i / 15` for `1 <= i <= 10`, zero afterwards.
pub fn reference_beta(p: usize) -> Vec<f64> {
    (0..p)
        .map(|i| match i {
            0 => 0.5,
            1..=10 => i as f64 / 15.0,
            _ => 0.0,
        })
        .collect()
}

impl SimScenario {
    /// The reference scenario: n = 2000, 41 columns, B = 50, R = 50.
    pub fn reference(family: FamilySpec, master_seed: u64) -> Self {
        Self {
            n: 2000,
            p: 41,
            beta_true: reference_beta(41),
            family,
            feature_mean_range: (-2.0, 2.0),
            n_replicates: 50,
            repetitions: 50,
            master_seed,
        }
    }

    pub fn reference_poisson(master_seed: u64) -> Self {
        Self::reference(FamilySpec::poisson(), master_seed)
    }

    pub fn reference_negbin(master_seed: u64) -> Self {
        Self::reference(
            FamilySpec::negbin(4.5).expect("4.5 is a valid size"),
            master_seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if self.p < 2 {
            return Err(Error::Config(format!("need at least 2 columns, got {}", self.p)));
        }
        if self.beta_true.len() != self.p {
            return Err(Error::Config(format!(
                "beta_true has {} entries for {} columns",
                self.beta_true.len(),
                self.p
            )));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta_true must be finite".into()));
        }
        if self.n < 4 {
            return Err(Error::Config(format!("need at least 4 rows, got {}", self.n)));
        }
        let (lo, hi) = self.feature_mean_range;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("bad feature mean range ({lo}, {hi})")));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("need at least one repetition".into()));
        }
        if self.n_replicates < 2 {
            return Err(Error::Config(format!(
                "need at least 2 bootstrap replicates, got {}",
                self.n_replicates
            )));
        }
        if self.family.kind == FamilyKind::Tweedie {
            return Err(Error::Config("tweedie responses are not simulated".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the scenario's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Per-feature means, fixed by the master seed.
    pub fn feature_means(&self) -> Vec<f64> {
        let (lo, hi) = self.feature_mean_range;
        let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(self.master_seed, usize::MAX, 0));
        (1..self.p)
            .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
            .collect()
    }

    /// Data seed of repetition `r`.
    pub fn repetition_seed(&self, r: usize) -> u64 {
        replicate_seed(self.master_seed ^ 0xD1B5_4A32_D192_ED03, r, 0)
    }

    /// Indices of nonzero non-intercept coefficients.
    pub fn nonzero_indices(&self) -> Vec<usize> {
        (1..self.p).filter(|&j| self.beta_true[j] != 0.0).collect()
    }

    /// Indices of zero non-intercept coefficients.
    pub fn zero_indices(&self) -> Vec<usize> {
        (1..self.p).filter(|&j| self.beta_true[j] == 0.0).collect()
    }
}

/// `n x p` design: a column of ones, then `N(m_j, 1)` features.
pub fn generate_design(scenario: &SimScenario, seed: u64) -> Result<DMatrix<f64>> {
    scenario.validate()?;
    let means = scenario.feature_means();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::from_element(scenario.n, scenario.p, 1.0);
    for i in 0..scenario.n {
        for j in 1..scenario.p {
            x[(i, j)] = means[j - 1] + rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(x)
}

/// Simulated responses and how many linear predictors hit the clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedResponse {
    pub y: Vec<f64>,
    pub clamped: usize,
}

impl GeneratedResponse {
    pub fn clamp_rate(&self) -> f64 {
        self.clamped as f64 / self.y.len() as f64
    }
}

/// Draws `y_i` with mean `g^-1(x_i' beta)`. Negative-binomial counts are
/// drawn as a gamma-Poisson mixture.
pub fn generate_response(x: &DMatrix<f64>, scenario: &SimScenario, seed: u64) -> Result<GeneratedResponse> {
    scenario.validate()?;
    if x.ncols() != scenario.p {
        return Err(Error::Dimension(format!(
            "design has {} columns, scenario has {}",
            x.ncols(),
            scenario.p
        )));
    }
    let fam = &scenario.family;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut clamped = 0;
    let mut y = Vec::with_capacity(x.nrows());
    for row in x.row_iter() {
        let eta: f64 = row.iter().zip(&scenario.beta_true).map(|(a, b)| a * b).sum();
        let (eta, hit) = fam.clamp_eta(eta);
        clamped += usize::from(hit);
        let mu = match fam.link {
            Link::Log => eta.exp(),
            Link::Identity => eta,
        };
        let v = match fam.kind {
            FamilyKind::Gaussian => {
                let sd = fam.dispersion_phi.sqrt();
                Normal::new(mu, sd).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(&mut rng)
            }
            FamilyKind::Poisson => poisson_draw(mu, &mut rng)?,
            FamilyKind::NegBin => {
                let k = fam.negbin_size;
                let rate = Gamma::new(k, mu / k)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?
                    .sample(&mut rng);
                poisson_draw(rate, &mut rng)?
            }
            FamilyKind::Tweedie => unreachable!("rejected by validate"),
        };
        y.push(v);
    }
    Ok(GeneratedResponse { y, clamped })
}

/// Compound Poisson-gamma draw with mean `mu` and variance `phi * mu^p`,
/// `1 < p < 2`.
pub fn sample_tweedie<R: Rng + ?Sized>(mu: f64, phi: f64, p: f64, rng: &mut R) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) || !(phi > 0.0) || !(mu >= 0.0) {
        return Err(Error::InvalidFamily(format!("tweedie draw needs 1 < p < 2, phi > 0, mu >= 0 (p = {p}, phi = {phi}, mu = {mu})")));
    }
    if mu == 0.0 {
        return Ok(0.0);
    }
    let rate = mu.powf(2.0 - p) / (phi * (2.0 - p));
    let count = Poisson::new(rate)
        .map_err(|e| Error::InvalidInput(format!("poisson rate {rate}: {e}")))?
        .sample(rng);
    if count == 0.0 {
        return Ok(0.0);
    }
    let shape = (2.0 - p) / (p - 1.0);
    let scale = phi * (p - 1.0) * mu.powf(p - 1.0);
    // a sum of `count` iid gamma(shape, scale) terms
    Ok(Gamma::new(count * shape, scale)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .sample(rng))
}

fn poisson_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    if rate <= 0.0 {
        return Ok(0.0);
    }
    Ok(Poisson::new(rate)
        .map_err(|e| Error::InvalidInput(format!("poisson rate {rate}: {e}")))?
        .sample(rng))
}
