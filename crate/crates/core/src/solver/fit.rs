use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{soft_threshold, PenaltySpec};
use crate::error::{Error, Result};
use crate::families::{estimate_dispersion, FamilyKind, FamilySpec, Link};

static KKT_CHECKED: AtomicUsize = AtomicUsize::new(0);
static KKT_FAILED: AtomicUsize = AtomicUsize::new(0);

/// Process-wide count of `(checked, failed)` KKT certificates. A failure is a
/// fit whose coefficients stopped moving but whose certificate never held.
pub fn kkt_stats() -> (usize, usize) {
    (
        KKT_CHECKED.load(Ordering::Relaxed),
        KKT_FAILED.load(Ordering::Relaxed),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_irls: usize,
    pub max_sweeps: usize,
    /// Convergence threshold on the largest coefficient change (standardized scale).
    pub tol: f64,
    pub standardize: bool,
    pub fit_intercept: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_irls: 100,
            max_sweeps: 1000,
            tol: 1e-7,
            standardize: true,
            fit_intercept: true,
        }
    }
}

/// Column centering and scaling applied before penalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// KKT certificate of a fit, evaluated on the standardized problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub max_violation: f64,
    pub tolerance: f64,
}

impl KktReport {
    pub fn holds(&self) -> bool {
        self.max_violation <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: f64,
    /// Coefficients on the original column scale.
    pub beta: Vec<f64>,
    pub lambda_used: PenaltySpec,
    pub dispersion: f64,
    pub active_set: Vec<usize>,
    pub n_iterations: usize,
    pub converged: bool,
    pub clamped: bool,
    pub objective: f64,
    pub kkt: KktReport,
    pub standardization: Standardization,
    pub fit_intercept: bool,
}

impl FitResult {
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let b = DVector::from_column_slice(&self.beta);
        (x * b).iter().map(|&e| e + self.intercept).collect()
    }

    pub fn fitted_mean(&self, x: &DMatrix<f64>, family: &FamilySpec) -> Vec<f64> {
        self.linear_predictor(x)
            .into_iter()
            .map(|e| family.inverse_link(e))
            .collect()
    }

    /// `[intercept, beta...]`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.beta.len() + 1);
        v.push(self.intercept);
        v.extend_from_slice(&self.beta);
        v
    }

    fn standardized(&self) -> Vec<f64> {
        let s = &self.standardization;
        let mut b0 = self.intercept;
        let mut out = Vec::with_capacity(self.beta.len() + 1);
        out.push(0.0);
        for (j, &bj) in self.beta.iter().enumerate() {
            b0 += bj * s.means[j];
            out.push(bj * s.scales[j]);
        }
        out[0] = b0;
        out
    }
}

/// A design and response prepared for repeated fits (paths, CV, warm starts).
#[derive(Debug, Clone)]
pub struct PreparedProblem {
    family: FamilySpec,
    y: Vec<f64>,
    /// `[1 | standardized X]` when fitting an intercept, otherwise standardized X.
    xa: DMatrix<f64>,
    std: Standardization,
    /// Zero-variance columns, whose coefficients are fixed at zero.
    degenerate: Vec<bool>,
    cfg: SolverConfig,
    kkt_tol: f64,
}

impl PreparedProblem {
    pub fn new(
        x: &DMatrix<f64>,
        y: &[f64],
        family: &FamilySpec,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        family.validate()?;
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "design has {n} rows but response has {}",
                y.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput("need at least two observations".into()));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite design entry at row {}, column {}",
                i % n,
                i / n
            )));
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite response at {i}")));
            }
            if family.nonnegative_response() && v < 0.0 {
                return Err(Error::Domain {
                    index: i,
                    reason: format!("{} response must be nonnegative", family.name()),
                });
            }
        }

        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        let mut degenerate = vec![false; p];
        for j in 0..p {
            let col = x.column(j);
            let m = if cfg.fit_intercept { col.mean() } else { 0.0 };
            let ms = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let spread = ms.sqrt();
            let magnitude = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            means[j] = m;
            if !(spread > 1e-12 * magnitude) || spread == 0.0 {
                // no information beyond the intercept: held at zero
                degenerate[j] = true;
                continue;
            }
            if cfg.standardize {
                scales[j] = spread;
            }
        }

        let off = usize::from(cfg.fit_intercept);
        let q = p + off;
        let mut xa = DMatrix::zeros(n, q);
        if cfg.fit_intercept {
            xa.column_mut(0).fill(1.0);
        }
        for j in 0..p {
            if degenerate[j] {
                continue;
            }
            let (m, s) = (means[j], scales[j]);
            for i in 0..n {
                xa[(i, j + off)] = (x[(i, j)] - m) / s;
            }
        }

        let mut prob = Self {
            family: *family,
            y: y.to_vec(),
            xa,
            std: Standardization { means, scales },
            degenerate,
            cfg: *cfg,
            kkt_tol: 0.0,
        };
        let zero = vec![0.0; q];
        let g0 = prob.gradient(&prob.eta(&zero));
        let g0_inf = g0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prob.kkt_tol = 1e-6 * g0_inf.max(1.0);
        Ok(prob)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.std.means.len()
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn standardization(&self) -> &Standardization {
        &self.std
    }

    /// Columns without variance (beyond the intercept); their coefficients are always zero.
    pub fn degenerate_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.degenerate[j]).collect()
    }

    fn offset(&self) -> usize {
        usize::from(self.cfg.fit_intercept)
    }

    fn eta(&self, b: &[f64]) -> DVector<f64> {
        &self.xa * DVector::from_column_slice(b)
    }

    fn loss(&self, eta: &DVector<f64>) -> Result<f64> {
        let mut total = 0.0;
        for (i, (&yi, &ei)) in self.y.iter().zip(eta.iter()).enumerate() {
            let l = self.family.unit_loss(yi, ei);
            if !l.is_finite() {
                return Err(Error::NumericOverflow { index: i });
            }
            total += l;
        }
        Ok(total / self.n() as f64)
    }

    /// Gradient of the mean loss with respect to the working coefficients.
    fn gradient(&self, eta: &DVector<f64>) -> DVector<f64> {
        let g = DVector::from_iterator(
            self.n(),
            self.y
                .iter()
                .zip(eta.iter())
                .map(|(&yi, &ei)| self.family.unit_gradient(yi, ei)),
        );
        self.xa.tr_mul(&g) / self.n() as f64
    }

    fn objective(&self, b: &[f64], pen: &PenaltySpec) -> Result<f64> {
        let off = self.offset();
        Ok(self.loss(&self.eta(b))? + pen.value(&b[off..]))
    }

    /// Maximum KKT violation at working coefficients `b`.
    pub(crate) fn kkt_violation(&self, b: &[f64], pen: &PenaltySpec) -> f64 {
        let off = self.offset();
        let grad = self.gradient(&self.eta(b));
        let mut worst = 0.0f64;
        for (k, &g) in grad.iter().enumerate() {
            let v = if k < off {
                g.abs()
            } else {
                let j = k - off;
                let (l1, l2) = (pen.l1(j), pen.l2(j));
                let bj = b[k];
                if bj != 0.0 {
                    (g + 2.0 * l2 * bj + l1 * bj.signum()).abs()
                } else {
                    (g.abs() - l1).max(0.0)
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Gradient of the mean loss at a fit, on the standardized scale (intercept first).
    pub fn standardized_gradient(&self, fit: &FitResult) -> Vec<f64> {
        let b = self.working_from_fit(fit);
        self.gradient(&self.eta(&b)).as_slice().to_vec()
    }

    pub fn kkt_report(&self, fit: &FitResult) -> KktReport {
        let b = self.working_from_fit(fit);
        KktReport {
            max_violation: self.kkt_violation(&b, &fit.lambda_used),
            tolerance: self.kkt_tol,
        }
    }

    fn working_from_fit(&self, fit: &FitResult) -> Vec<f64> {
        let full = fit.standardized();
        if self.cfg.fit_intercept {
            full
        } else {
            full[1..].to_vec()
        }
    }

    fn initial_point(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.p() + self.offset()];
        if self.cfg.fit_intercept {
            let ybar = self.y.iter().sum::<f64>() / self.n() as f64;
            b[0] = match self.family.link {
                Link::Identity => ybar,
                Link::Log => ybar.max(1e-10).ln(),
            };
        }
        b
    }

    /// Fit at `penalty`, optionally warm-started from a previous fit on the same data.
    pub fn fit(&self, penalty: &PenaltySpec, warm: Option<&FitResult>) -> Result<FitResult> {
        penalty.validate()?;
        if penalty.factors.len() != self.p() {
            return Err(Error::Dimension(format!(
                "penalty has {} factors for {} columns",
                penalty.factors.len(),
                self.p()
            )));
        }
        let mut b = match warm {
            Some(f) if f.beta.len() == self.p() => self.working_from_fit(f),
            _ => self.initial_point(),
        };
        let gaussian = self.family.kind == FamilyKind::Gaussian && self.family.link == Link::Identity;
        let slack_for = |obj: f64| 1e-12 * obj.abs().max(1.0);

        let mut obj = self.objective(&b, penalty)?;
        let mut iterations = 0;
        let mut converged = false;
        let mut stalled = false;
        let mut inner_tol = self.cfg.tol * 1e-3;

        for it in 0..self.cfg.max_irls {
            iterations = it + 1;
            let eta = self.eta(&b);
            let n = self.n() as f64;
            let mut sw = DVector::zeros(self.n());
            let mut swz = DVector::zeros(self.n());
            for i in 0..self.n() {
                let mu = self.family.inverse_link(eta[i]);
                let w = self.family.expected_weight(mu).max(1e-300);
                let g = self.family.unit_gradient(self.y[i], eta[i]);
                let z = eta[i] - g / w;
                let s = w.sqrt();
                sw[i] = s;
                swz[i] = s * z;
            }
            let mut xw = self.xa.clone();
            for mut col in xw.column_iter_mut() {
                col.component_mul_assign(&sw);
            }
            let gram = xw.tr_mul(&xw) / n;
            let c = xw.tr_mul(&swz) / n;

            let mut b_new = b.clone();
            coordinate_descent(
                &gram,
                c.as_slice(),
                penalty,
                self.offset(),
                &mut b_new,
                self.cfg.max_sweeps,
                inner_tol,
            );

            let mut obj_new = self.objective(&b_new, penalty)?;
            let mut halvings = 0;
            while obj_new > obj + slack_for(obj) && halvings < 30 {
                for (bn, &bo) in b_new.iter_mut().zip(&b) {
                    *bn = 0.5 * (*bn + bo);
                }
                obj_new = self.objective(&b_new, penalty)?;
                halvings += 1;
            }
            if obj_new > obj + slack_for(obj) {
                return Err(Error::ObjectiveIncrease {
                    iteration: iterations,
                    before: obj,
                    after: obj_new,
                });
            }
            let delta = b_new
                .iter()
                .zip(&b)
                .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            b = b_new;
            obj = obj_new;

            if gaussian || delta < self.cfg.tol {
                stalled = true;
                if self.kkt_violation(&b, penalty) <= self.kkt_tol {
                    converged = true;
                    break;
                }
                inner_tol = (inner_tol * 1e-2).max(1e-15);
            }
        }

        let kkt = KktReport {
            max_violation: self.kkt_violation(&b, penalty),
            tolerance: self.kkt_tol,
        };
        if stalled {
            KKT_CHECKED.fetch_add(1, Ordering::Relaxed);
            if !converged {
                KKT_FAILED.fetch_add(1, Ordering::Relaxed);
            }
        }
        debug_assert!(!converged || kkt.holds());
        Ok(self.finish(b, penalty.clone(), obj, iterations, converged, kkt))
    }

    fn finish(
        &self,
        b: Vec<f64>,
        penalty: PenaltySpec,
        objective: f64,
        n_iterations: usize,
        converged: bool,
        kkt: KktReport,
    ) -> FitResult {
        let off = self.offset();
        let p = self.p();
        let mut beta = vec![0.0; p];
        let mut intercept = if off == 1 { b[0] } else { 0.0 };
        for j in 0..p {
            beta[j] = b[j + off] / self.std.scales[j];
            intercept -= beta[j] * self.std.means[j];
        }
        if off == 0 {
            intercept = 0.0;
        }
        let eta = self.eta(&b);
        let clamped = eta.iter().any(|&e| self.family.clamp_eta(e).1);
        let mu: Vec<f64> = eta.iter().map(|&e| self.family.inverse_link(e)).collect();
        let active_set: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        let df = active_set.len() + off;
        let dispersion = estimate_dispersion(&self.family, &self.y, &mu, df).unwrap_or(f64::NAN);
        FitResult {
            intercept,
            beta,
            lambda_used: penalty,
            dispersion,
            active_set,
            n_iterations,
            converged,
            clamped,
            objective,
            kkt,
            standardization: self.std.clone(),
            fit_intercept: self.cfg.fit_intercept,
        }
    }
}

/// Cyclic coordinate descent on `1/2 b'Gb - c'b + penalty`, with an exact
/// solve on the current active set whenever it certifies optimality.
pub(crate) fn coordinate_descent(
    gram: &DMatrix<f64>,
    c: &[f64],
    pen: &PenaltySpec,
    off: usize,
    b: &mut [f64],
    max_sweeps: usize,
    tol: f64,
) -> bool {
    let q = b.len();
    let pen_at = |k: usize| -> (f64, f64) {
        if k < off {
            (0.0, 0.0)
        } else {
            (pen.l1(k - off), pen.l2(k - off))
        }
    };
    let mut gb: Vec<f64> = (0..q)
        .map(|i| (0..q).map(|k| gram[(i, k)] * b[k]).sum())
        .collect();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let mut max_delta = 0.0f64;
        for k in 0..q {
            let (l1, l2) = pen_at(k);
            let gkk = gram[(k, k)];
            let denom = gkk + 2.0 * l2;
            let r = c[k] - gb[k] + gkk * b[k];
            // ties at the threshold (up to rounding) stay at zero
            let new = if denom > 0.0 && r.abs() > l1 * (1.0 + 1e-10) {
                soft_threshold(r, l1) / denom
            } else {
                0.0
            };
            let d = new - b[k];
            if d != 0.0 {
                for (i, g) in gb.iter_mut().enumerate() {
                    *g += d * gram[(i, k)];
                }
                b[k] = new;
                max_delta = max_delta.max(d.abs());
            }
        }
        sweeps += 1;
        if max_delta < tol {
            return true;
        }
        if sweeps % 5 == 0 && active_set_solve(gram, c, pen, off, b) {
            return true;
        }
    }
    false
}

/// Solves the quadratic exactly on the support of `b` (plus unpenalized
/// coordinates) with signs fixed. Accepts the solution only if signs are kept
/// and every excluded coordinate satisfies its subgradient condition.
fn active_set_solve(
    gram: &DMatrix<f64>,
    c: &[f64],
    pen: &PenaltySpec,
    off: usize,
    b: &mut [f64],
) -> bool {
    let q = b.len();
    let pen_at = |k: usize| -> (f64, f64) {
        if k < off {
            (0.0, 0.0)
        } else {
            (pen.l1(k - off), pen.l2(k - off))
        }
    };
    let active: Vec<usize> = (0..q)
        .filter(|&k| gram[(k, k)] > 0.0 && (b[k] != 0.0 || pen_at(k).0 == 0.0))
        .collect();
    if active.is_empty() {
        return false;
    }
    let m = active.len();
    let mut a = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for (r, &i) in active.iter().enumerate() {
        let (l1, l2) = pen_at(i);
        for (s, &k) in active.iter().enumerate() {
            a[(r, s)] = gram[(i, k)];
        }
        a[(r, r)] += 2.0 * l2;
        rhs[r] = c[i] - l1 * b[i].signum();
    }
    let Some(chol) = a.cholesky() else {
        return false;
    };
    let sol = chol.solve(&rhs);
    let mut cand = vec![0.0; q];
    for (r, &i) in active.iter().enumerate() {
        let (l1, _) = pen_at(i);
        if l1 > 0.0 && (sol[r] == 0.0 || sol[r].signum() != b[i].signum()) {
            return false;
        }
        cand[i] = sol[r];
    }
    for k in 0..q {
        if cand[k] != 0.0 || active.contains(&k) {
            continue;
        }
        let (l1, _) = pen_at(k);
        let r: f64 = c[k] - (0..q).map(|i| gram[(k, i)] * cand[i]).sum::<f64>();
        if r.abs() > l1 * (1.0 + 1e-12) {
            return false;
        }
    }
    b.copy_from_slice(&cand);
    true
}

pub fn fit_penalized_glm(
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    penalty: &PenaltySpec,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    PreparedProblem::new(x, y, family, cfg)?.fit(penalty, None)
}

/// Penalized objective of `fit` on `(x, y)`, using the fit's own standardization.
pub fn penalized_objective(
    family: &FamilySpec,
    x: &DMatrix<f64>,
    y: &[f64],
    fit: &FitResult,
) -> Result<f64> {
    let eta = fit.linear_predictor(x);
    let loss = crate::families::neg_log_lik(family, y, &eta)?;
    let b = fit.standardized();
    Ok(loss + fit.lambda_used.value(&b[1..]))
}
