//! GLM families: losses, derivatives with respect to the linear predictor,
//! working weights and residuals.
//!
//! Every loss is the per-observation negative log-likelihood up to terms that
//! do not depend on the coefficients. Under the log link the linear predictor
//! is clamped to `[-ETA_CLAMP, ETA_CLAMP]` before exponentiation.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Bound applied to the linear predictor before `exp`.
pub const ETA_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian,
    Poisson,
    #[serde(alias = "nb", alias = "negative-binomial")]
    NegBin,
    Tweedie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Log,
}

/// Distribution family together with its fixed nuisance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Tweedie power, only read when `kind` is tweedie.
    pub power_p: f64,
    pub dispersion_phi: f64,
    /// Negative-binomial size (often written theta or kappa).
    pub negbin_size: f64,
    pub link: Link,
}

impl FamilySpec {
    pub fn new(
        kind: FamilyKind,
        power_p: f64,
        dispersion_phi: f64,
        negbin_size: f64,
        link: Link,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            power_p,
            dispersion_phi,
            negbin_size,
            link,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian() -> Self {
        Self {
            kind: FamilyKind::Gaussian,
            power_p: 0.0,
            dispersion_phi: 1.0,
            negbin_size: 1.0,
            link: Link::Identity,
        }
    }

    pub fn poisson() -> Self {
        Self {
            kind: FamilyKind::Poisson,
            power_p: 1.0,
            dispersion_phi: 1.0,
            negbin_size: 1.0,
            link: Link::Log,
        }
    }

    pub fn negbin(size: f64) -> Result<Self> {
        Self::new(FamilyKind::NegBin, 1.0, 1.0, size, Link::Log)
    }

    pub fn tweedie(power_p: f64) -> Result<Self> {
        Self::new(FamilyKind::Tweedie, power_p, 1.0, 1.0, Link::Log)
    }

    /// Tweedie family without the `p in (1, 2)` guard. Only used to probe
    /// the variance-power family at its boundary.
    #[doc(hidden)]
    pub fn tweedie_unchecked(power_p: f64) -> Self {
        Self {
            kind: FamilyKind::Tweedie,
            power_p,
            dispersion_phi: 1.0,
            negbin_size: 1.0,
            link: Link::Log,
        }
    }

    pub fn with_dispersion(mut self, phi: f64) -> Result<Self> {
        self.dispersion_phi = phi;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dispersion_phi > 0.0 && self.dispersion_phi.is_finite()) {
            return Err(Error::InvalidFamily(format!(
                "dispersion must be positive, got {}",
                self.dispersion_phi
            )));
        }
        if !(self.negbin_size > 0.0 && self.negbin_size.is_finite()) {
            return Err(Error::InvalidFamily(format!(
                "negative-binomial size must be positive, got {}",
                self.negbin_size
            )));
        }
        if self.kind == FamilyKind::Tweedie && !(self.power_p > 1.0 && self.power_p < 2.0) {
            return Err(Error::InvalidFamily(format!(
                "tweedie power must lie in (1, 2), got {}",
                self.power_p
            )));
        }
        if self.link == Link::Identity && self.kind != FamilyKind::Gaussian {
            return Err(Error::InvalidFamily(
                "identity link is only supported for the gaussian family".into(),
            ));
        }
        Ok(())
    }

    /// Whether responses must be nonnegative.
    pub fn nonnegative_response(&self) -> bool {
        self.kind != FamilyKind::Gaussian
    }

    /// Poisson and negative binomial (with fixed size) have unit dispersion.
    pub fn has_fixed_dispersion(&self) -> bool {
        matches!(self.kind, FamilyKind::Poisson | FamilyKind::NegBin)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Poisson => "poisson",
            FamilyKind::NegBin => "negbin",
            FamilyKind::Tweedie => "tweedie",
        }
    }

    /// Clamped linear predictor and whether clamping was needed.
    #[inline]
    pub fn clamp_eta(&self, eta: f64) -> (f64, bool) {
        match self.link {
            Link::Identity => (eta, false),
            Link::Log => {
                let c = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
                (c, c != eta)
            }
        }
    }

    #[inline]
    pub fn inverse_link(&self, eta: f64) -> f64 {
        match self.link {
            Link::Identity => eta,
            Link::Log => self.clamp_eta(eta).0.exp(),
        }
    }

    #[inline]
    pub fn link(&self, mu: f64) -> f64 {
        match self.link {
            Link::Identity => mu,
            Link::Log => mu.ln(),
        }
    }

    /// Variance function V(mu), without dispersion.
    #[inline]
    pub fn variance(&self, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Poisson => mu,
            FamilyKind::NegBin => mu + mu * mu / self.negbin_size,
            FamilyKind::Tweedie => mu.powf(self.power_p),
        }
    }

    /// Per-observation loss at linear predictor `eta`.
    pub fn unit_loss(&self, y: f64, eta: f64) -> f64 {
        let (eta, _) = self.clamp_eta(eta);
        match self.kind {
            FamilyKind::Gaussian => {
                let mu = self.inverse_link(eta);
                0.5 * (y - mu) * (y - mu)
            }
            FamilyKind::Poisson => {
                let base = eta.exp() - y * eta;
                if is_integral(y) {
                    base + ln_gamma(y + 1.0)
                } else {
                    base
                }
            }
            FamilyKind::NegBin => {
                let k = self.negbin_size;
                let mu = eta.exp();
                let log_k_mu = (k + mu).ln();
                let kernel = k * (k.ln() - log_k_mu) + y * (eta - log_k_mu);
                let constant = if is_integral(y) {
                    ln_gamma(y + k) - ln_gamma(k) - ln_gamma(y + 1.0)
                } else {
                    0.0
                };
                -(constant + kernel)
            }
            FamilyKind::Tweedie => {
                let p = self.power_p;
                -y * ((1.0 - p) * eta).exp() / (1.0 - p) + ((2.0 - p) * eta).exp() / (2.0 - p)
            }
        }
    }

    /// First derivative of `unit_loss` with respect to `eta`.
    pub fn unit_gradient(&self, y: f64, eta: f64) -> f64 {
        let (eta, _) = self.clamp_eta(eta);
        match self.kind {
            FamilyKind::Gaussian => self.inverse_link(eta) - y,
            FamilyKind::Poisson => eta.exp() - y,
            FamilyKind::NegBin => {
                let k = self.negbin_size;
                let mu = eta.exp();
                k * (mu - y) / (k + mu)
            }
            FamilyKind::Tweedie => {
                let p = self.power_p;
                -y * ((1.0 - p) * eta).exp() + ((2.0 - p) * eta).exp()
            }
        }
    }

    /// Second derivative of `unit_loss` with respect to `eta` (observed information).
    pub fn observed_weight(&self, y: f64, eta: f64) -> f64 {
        let (eta, _) = self.clamp_eta(eta);
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Poisson => eta.exp(),
            FamilyKind::NegBin => {
                let k = self.negbin_size;
                let mu = eta.exp();
                k * mu * (k + y) / ((k + mu) * (k + mu))
            }
            FamilyKind::Tweedie => {
                let p = self.power_p;
                -y * (1.0 - p) * ((1.0 - p) * eta).exp() + (2.0 - p) * ((2.0 - p) * eta).exp()
            }
        }
    }

    /// Expected information weight at mean `mu`; `unit_gradient / weight`
    /// gives the IRLS working-response step.
    #[inline]
    pub fn expected_weight(&self, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Poisson => mu,
            FamilyKind::NegBin => {
                let k = self.negbin_size;
                mu * k / (k + mu)
            }
            FamilyKind::Tweedie => mu.powf(2.0 - self.power_p),
        }
    }

    /// Unit deviance d(y, mu).
    pub fn unit_deviance(&self, y: f64, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => (y - mu) * (y - mu),
            FamilyKind::Poisson => 2.0 * (xlogy(y, y / mu) - (y - mu)),
            FamilyKind::NegBin => {
                let k = self.negbin_size;
                2.0 * (xlogy(y, y / mu) - (y + k) * ((y + k) / (mu + k)).ln())
            }
            FamilyKind::Tweedie => tweedie_deviance(y, mu, self.power_p),
        }
    }

    /// Pearson variance v_i used to standardize residuals.
    pub fn pearson_variance(&self, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => self.dispersion_phi,
            FamilyKind::Poisson | FamilyKind::NegBin => self.variance(mu),
            FamilyKind::Tweedie => self.dispersion_phi * self.variance(mu),
        }
    }

    fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if self.kind == FamilyKind::Gaussian {
            return Ok(());
        }
        for (i, &m) in mu.iter().enumerate() {
            if !(m > 0.0) {
                return Err(Error::Domain {
                    index: i,
                    reason: format!("mean must be positive, got {m}"),
                });
            }
        }
        Ok(())
    }

    fn check_response(&self, y: &[f64]) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite response at {i}")));
            }
            if self.nonnegative_response() && v < 0.0 {
                return Err(Error::Domain {
                    index: i,
                    reason: format!("{} response must be nonnegative, got {v}", self.name()),
                });
            }
        }
        Ok(())
    }
}

fn is_integral(y: f64) -> bool {
    y.fract() == 0.0
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn tweedie_deviance(y: f64, mu: f64, p: f64) -> f64 {
    2.0 * (y.powf(2.0 - p) / ((1.0 - p) * (2.0 - p)) - y * mu.powf(1.0 - p) / (1.0 - p)
        + mu.powf(2.0 - p) / (2.0 - p))
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Linear predictor with the implied mean and working weights.
#[derive(Debug, Clone)]
pub struct LinearPredictorState {
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
    pub clamped: bool,
}

impl LinearPredictorState {
    pub fn new(family: &FamilySpec, eta: Vec<f64>) -> Self {
        let mut clamped = false;
        let mu: Vec<f64> = eta
            .iter()
            .map(|&e| {
                let (c, hit) = family.clamp_eta(e);
                clamped |= hit;
                family.inverse_link(c)
            })
            .collect();
        let weights = mu.iter().map(|&m| family.expected_weight(m)).collect();
        Self {
            eta,
            mu,
            weights,
            clamped,
        }
    }
}

/// Mean loss `(1/n) sum rho(y_i, eta_i)`.
pub fn neg_log_lik(family: &FamilySpec, y: &[f64], eta: &[f64]) -> Result<f64> {
    check_len(y.len(), eta.len(), "response vs linear predictor")?;
    if y.is_empty() {
        return Err(Error::InvalidInput("empty response".into()));
    }
    family.check_response(y)?;
    let mut total = 0.0;
    for (i, (&yi, &ei)) in y.iter().zip(eta).enumerate() {
        let l = family.unit_loss(yi, ei);
        if !l.is_finite() {
            return Err(Error::NumericOverflow { index: i });
        }
        total += l;
    }
    Ok(total / y.len() as f64)
}

/// Gradient of `neg_log_lik` composed with `eta = X beta`.
pub fn nll_gradient(
    family: &FamilySpec,
    x: &nalgebra::DMatrix<f64>,
    y: &[f64],
    beta: &nalgebra::DVector<f64>,
) -> Result<nalgebra::DVector<f64>> {
    check_len(x.nrows(), y.len(), "design rows vs response")?;
    check_len(x.ncols(), beta.len(), "design columns vs coefficients")?;
    family.check_response(y)?;
    let eta = x * beta;
    let mut g = nalgebra::DVector::zeros(y.len());
    for i in 0..y.len() {
        let gi = family.unit_gradient(y[i], eta[i]);
        if !gi.is_finite() {
            return Err(Error::NumericOverflow { index: i });
        }
        g[i] = gi;
    }
    Ok(x.tr_mul(&g) / y.len() as f64)
}

pub fn irls_weights(family: &FamilySpec, mu: &[f64]) -> Result<Vec<f64>> {
    family.check_mu(mu)?;
    Ok(mu.iter().map(|&m| family.expected_weight(m)).collect())
}

pub fn pearson_residuals(family: &FamilySpec, y: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    check_len(y.len(), mu.len(), "response vs mean")?;
    family.check_mu(mu)?;
    y.iter()
        .zip(mu)
        .enumerate()
        .map(|(i, (&yi, &mi))| {
            if yi == mi {
                return Ok(0.0);
            }
            let v = family.pearson_variance(mi);
            if !(v > 0.0) {
                return Err(Error::Domain {
                    index: i,
                    reason: format!("nonpositive variance {v}"),
                });
            }
            Ok((yi - mi) / v.sqrt())
        })
        .collect()
}

pub fn deviance_residuals(family: &FamilySpec, y: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    check_len(y.len(), mu.len(), "response vs mean")?;
    family.check_mu(mu)?;
    family.check_response(y)?;
    y.iter()
        .zip(mu)
        .enumerate()
        .map(|(i, (&yi, &mi))| {
            if yi == mi {
                return Ok(0.0);
            }
            let mut d = family.unit_deviance(yi, mi);
            // rounding can push a near-zero radicand slightly negative
            let scale = yi.abs().max(mi.abs()).max(1.0);
            if d < 0.0 && d > -1e-10 * scale {
                d = 0.0;
            }
            if d < 0.0 || !d.is_finite() {
                return Err(Error::Domain {
                    index: i,
                    reason: format!("negative deviance radicand {d}"),
                });
            }
            Ok((yi - mi).signum() * d.sqrt())
        })
        .collect()
}

pub fn anscombe_residuals(family: &FamilySpec, y: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    if family.kind != FamilyKind::Tweedie {
        return Err(Error::UnsupportedFamily("anscombe"));
    }
    check_len(y.len(), mu.len(), "response vs mean")?;
    family.check_mu(mu)?;
    family.check_response(y)?;
    let p = family.power_p;
    let a = 1.0 - p / 3.0;
    Ok(y.iter()
        .zip(mu)
        .map(|(&yi, &mi)| {
            if yi == mi {
                0.0
            } else {
                3.0 / (3.0 - p) * (yi.powf(a) - mi.powf(a)) / mi.powf(p / 6.0)
            }
        })
        .collect())
}

/// Pearson chi-square dispersion estimate. Poisson and negative binomial
/// report the fixed value 1.
pub fn estimate_dispersion(
    family: &FamilySpec,
    y: &[f64],
    mu: &[f64],
    df_used: usize,
) -> Result<f64> {
    check_len(y.len(), mu.len(), "response vs mean")?;
    let n = y.len();
    if family.has_fixed_dispersion() {
        return Ok(1.0);
    }
    if n <= df_used {
        return Err(Error::InsufficientDf { n, df: df_used });
    }
    family.check_mu(mu)?;
    let chi2: f64 = y
        .iter()
        .zip(mu)
        .map(|(&yi, &mi)| (yi - mi) * (yi - mi) / family.variance(mi))
        .sum();
    Ok(chi2 / (n - df_used) as f64)
}
