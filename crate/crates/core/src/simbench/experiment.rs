use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{read_log, write_header, CoverageReport};
use super::{generate_design, generate_response, SimScenario};
use crate::bootstrap::{
    paired_bootstrap_glm, plr_glm, replicate_seed, residual_bootstrap_glm, residual_bootstrap_lm,
    BootstrapConfig, LambdaRule,
};
use crate::debias::{
    debias_glm, debias_lm, default_mu, lm_sigma_hat, nodewise_theta, select_nodewise_lambda,
    weighted_design,
};
use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilySpec};
use crate::interval::{default_coef_name, CiMethod, IntervalTable};
use crate::solver::{fit_penalized_glm, select_lambda_cv, CvResult, PenaltySpec};

/// Interval method run by the simulation driver. The two stubs emit fixed
/// intervals and are used to check the coverage arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    Plr,
    ResidBoot,
    PairedBoot,
    Debias,
    /// `(-inf, inf)` for every coefficient.
    StubUniversal,
    /// `[0, 0]` for every coefficient.
    StubPoint,
}

impl SimMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimMethod::Plr => "plr",
            SimMethod::ResidBoot => "resid-boot",
            SimMethod::PairedBoot => "paired-boot",
            SimMethod::Debias => "debias",
            SimMethod::StubUniversal => "stub-universal",
            SimMethod::StubPoint => "stub-point",
        }
    }

    pub fn ci_method(&self) -> CiMethod {
        match self {
            SimMethod::Plr => CiMethod::Plr,
            SimMethod::ResidBoot => CiMethod::ResidBoot,
            SimMethod::PairedBoot => CiMethod::PairedBoot,
            SimMethod::Debias => CiMethod::Debias,
            SimMethod::StubUniversal | SimMethod::StubPoint => CiMethod::Stub,
        }
    }
}

impl fmt::Display for SimMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "plr" => Ok(SimMethod::Plr),
            "resid-boot" => Ok(SimMethod::ResidBoot),
            "paired-boot" => Ok(SimMethod::PairedBoot),
            "debias" => Ok(SimMethod::Debias),
            "stub-universal" => Ok(SimMethod::StubUniversal),
            "stub-point" => Ok(SimMethod::StubPoint),
            other => Err(Error::Config(format!("unknown simulation method '{other}'"))),
        }
    }
}

/// Method settings shared by every repetition. The replicate count comes
/// from the scenario; each repetition derives its own bootstrap seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub bootstrap: BootstrapConfig,
    pub lambda: LambdaRule,
    /// Partial-ridge penalty for PLR; `None` means `1 / n`.
    pub lambda_l2: Option<f64>,
    /// Threads across repetitions; 0 uses the ambient pool.
    pub workers: usize,
}

/// One repetition's intervals for one method, as persisted in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub scenario_hash: String,
    pub method: SimMethod,
    pub repetition: usize,
    pub data_seed: u64,
    pub clamp_rate: f64,
    pub fits: usize,
    pub table: IntervalTable,
}

fn stub_table(method: SimMethod, p: usize, level: f64) -> IntervalTable {
    let mut t = IntervalTable::new(CiMethod::Stub, level);
    let (lo, hi) = match method {
        SimMethod::StubUniversal => (f64::NEG_INFINITY, f64::INFINITY),
        _ => (0.0, 0.0),
    };
    for j in 0..p {
        t.push(default_coef_name(j, true), 0.0, lo, hi).expect("stub endpoints are ordered");
    }
    t
}

fn lambda_for(
    rule: &LambdaRule,
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    seed: u64,
    boot: &BootstrapConfig,
) -> Result<(CvResult, usize)> {
    match rule {
        LambdaRule::Fixed { lambda } => Ok((CvResult::fixed(*lambda), 0)),
        LambdaRule::PerReplicateCv { cv } | LambdaRule::FullDataCv { cv } => {
            let res = select_lambda_cv(x, y, family, cv, seed, &boot.solver)?;
            Ok((res, cv.folds * cv.n_lambda + 1))
        }
    }
}

/// Runs one method on one dataset. `x` excludes the ones column; the
/// solver fits the intercept.
fn run_method(
    method: SimMethod,
    x: &DMatrix<f64>,
    y: &[f64],
    family: &FamilySpec,
    config: &ExperimentConfig,
    boot: &BootstrapConfig,
) -> Result<(IntervalTable, usize)> {
    let p = x.ncols() + 1;
    let cv_seed = boot.master_seed ^ 0x2545_F491_4F6C_DD1D;
    match method {
        SimMethod::StubUniversal | SimMethod::StubPoint => Ok((stub_table(method, p, boot.level), 0)),
        SimMethod::Plr => {
            let run = plr_glm(x, y, family, boot, &config.lambda, config.lambda_l2)?;
            Ok((run.table, run.total_fits))
        }
        SimMethod::PairedBoot => {
            let run = paired_bootstrap_glm(x, y, family, boot, &config.lambda)?;
            Ok((run.table, run.total_fits))
        }
        SimMethod::ResidBoot => {
            let (cv, f) = lambda_for(&config.lambda, x, y, family, cv_seed, boot)?;
            let run = if family.kind == FamilyKind::Gaussian {
                residual_bootstrap_lm(x, y, boot, &cv)?
            } else {
                residual_bootstrap_glm(x, y, family, boot, &cv)?
            };
            Ok((run.table, run.total_fits + f))
        }
        SimMethod::Debias => {
            let (cv, f) = lambda_for(&config.lambda, x, y, family, cv_seed, boot)?;
            let fit = fit_penalized_glm(x, y, family, &PenaltySpec::lasso(cv.best_lambda, x.ncols()), &boot.solver)?;
            if family.kind == FamilyKind::Gaussian {
                let sigma = lm_sigma_hat(&fit, x, y)?;
                let res = debias_lm(&fit, x, y, default_mu(p, y.len()), sigma, boot.level)?;
                return Ok((res.intervals, f + 1));
            }
            let xw = weighted_design(x, &fit, family)?;
            let lam = select_nodewise_lambda(&xw, true, cv_seed)?;
            let theta = nodewise_theta(&xw, &vec![lam; xw.ncols()])?;
            let res = debias_glm(&fit, x, y, family, &theta, boot.level)?;
            Ok((res.intervals, f + 1 + xw.ncols()))
        }
    }
}

fn without_ones_column(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.columns(1, x.ncols() - 1).into_owned()
}

/// Generates dataset `r` once and runs every method on it.
fn run_repetition(
    scenario: &SimScenario,
    methods: &[SimMethod],
    config: &ExperimentConfig,
    r: usize,
) -> Result<Vec<RepetitionRecord>> {
    let hash = scenario.hash();
    let seed = scenario.repetition_seed(r);
    let x = generate_design(scenario, seed)?;
    let resp = generate_response(&x, scenario, seed)?;
    let x = without_ones_column(&x);
    let boot = BootstrapConfig {
        n_replicates: scenario.n_replicates,
        master_seed: replicate_seed(scenario.master_seed ^ 0x94D0_49BB_1331_11EB, r, 0),
        ..config.bootstrap
    };
    methods
        .iter()
        .map(|&m| {
            let (table, fits) = run_method(m, &x, &resp.y, &scenario.family, config, &boot).map_err(|e| {
                Error::Repetition {
                    repetition: r,
                    source: Box::new(e),
                }
            })?;
            Ok(RepetitionRecord {
                scenario_hash: hash.clone(),
                method: m,
                repetition: r,
                data_seed: seed,
                clamp_rate: resp.clamp_rate(),
                fits,
                table,
            })
        })
        .collect()
}

/// Appends records in repetition order as soon as a contiguous prefix is done.
struct OrderedLog<'a> {
    path: Option<&'a Path>,
    state: Mutex<(usize, BTreeMap<usize, Vec<RepetitionRecord>>)>,
}

impl<'a> OrderedLog<'a> {
    fn push(&self, r: usize, recs: &[RepetitionRecord], pending: &[usize]) -> Result<()> {
        let Some(path) = self.path else { return Ok(()) };
        let mut guard = self.state.lock().expect("log lock");
        let (next, buf) = &mut *guard;
        buf.insert(r, recs.to_vec());
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        while *next < pending.len() {
            let Some(batch) = buf.remove(&pending[*next]) else { break };
            for rec in batch {
                let line = serde_json::to_string(&rec).expect("record serializes");
                writeln!(file, "{line}")?;
            }
            *next += 1;
        }
        file.flush()?;
        Ok(())
    }
}

/// Runs every method on the same `R` datasets. With a log path, finished
/// repetitions are appended to it and a rerun skips repetitions already
/// recorded for this scenario.
pub fn run_methods(
    scenario: &SimScenario,
    methods: &[SimMethod],
    config: &ExperimentConfig,
    log: Option<&Path>,
) -> Result<Vec<CoverageReport>> {
    scenario.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let hash = scenario.hash();
    let mut done: BTreeMap<(usize, SimMethod), RepetitionRecord> = BTreeMap::new();
    if let Some(path) = log {
        for rec in read_log(path)? {
            if rec.scenario_hash == hash && methods.contains(&rec.method) && rec.repetition < scenario.repetitions {
                done.insert((rec.repetition, rec.method), rec);
            }
        }
    }
    let pending: Vec<usize> = (0..scenario.repetitions)
        .filter(|&r| methods.iter().any(|m| !done.contains_key(&(r, *m))))
        .collect();
    let sink = OrderedLog {
        path: log,
        state: Mutex::new((0, BTreeMap::new())),
    };
    let work = || -> Vec<Result<Vec<RepetitionRecord>>> {
        pending
            .par_iter()
            .map(|&r| {
                let todo: Vec<SimMethod> = methods.iter().copied().filter(|m| !done.contains_key(&(r, *m))).collect();
                let recs = run_repetition(scenario, &todo, config, r)?;
                sink.push(r, &recs, &pending)?;
                Ok(recs)
            })
            .collect()
    };
    let results = if config.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(work)
    };
    for recs in results {
        for rec in recs? {
            done.insert((rec.repetition, rec.method), rec);
        }
    }
    methods
        .iter()
        .map(|&m| {
            let recs: Vec<RepetitionRecord> = done.values().filter(|r| r.method == m).cloned().collect();
            CoverageReport::tally(scenario, m, &recs)
        })
        .collect()
}

/// Coverage of a single method over the scenario's repetitions.
pub fn run_coverage_experiment(
    scenario: &SimScenario,
    method: SimMethod,
    config: &ExperimentConfig,
) -> Result<CoverageReport> {
    run_coverage_experiment_logged(scenario, method, config, None)
}

pub fn run_coverage_experiment_logged(
    scenario: &SimScenario,
    method: SimMethod,
    config: &ExperimentConfig,
    log: Option<&Path>,
) -> Result<CoverageReport> {
    Ok(run_methods(scenario, &[method], config, log)?.remove(0))
}

/// Mean widths of several methods on common datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthComparison {
    pub methods: Vec<SimMethod>,
    /// Nonzero non-intercept coefficients compared.
    pub coefficient_index: Vec<usize>,
    pub true_beta: Vec<f64>,
    /// `mean_width[m][k]`: method `m`, coefficient `coefficient_index[k]`.
    pub mean_width: Vec<Vec<f64>>,
    pub reports: Vec<CoverageReport>,
}

impl WidthComparison {
    /// Number of compared coefficients where method `a` is strictly narrower than `b`.
    pub fn narrower_count(&self, a: SimMethod, b: SimMethod) -> Option<usize> {
        let ia = self.methods.iter().position(|&m| m == a)?;
        let ib = self.methods.iter().position(|&m| m == b)?;
        Some(
            self.mean_width[ia]
                .iter()
                .zip(&self.mean_width[ib])
                .filter(|(x, y)| x < y)
                .count(),
        )
    }

    /// Average of a method's widths over the compared coefficients.
    pub fn average_width(&self, m: SimMethod) -> Option<f64> {
        let i = self.methods.iter().position(|&x| x == m)?;
        let w = &self.mean_width[i];
        Some(w.iter().sum::<f64>() / w.len() as f64)
    }

    /// Every method's full coverage table, stacked in method order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_header(&mut w)?;
        for r in &self.reports {
            r.write_rows(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn width_comparison(
    scenario: &SimScenario,
    methods: &[SimMethod],
    config: &ExperimentConfig,
    log: Option<&Path>,
) -> Result<WidthComparison> {
    if methods.len() < 2 {
        return Err(Error::Config(format!(
            "width comparison needs at least two methods, got {}",
            methods.len()
        )));
    }
    let reports = run_methods(scenario, methods, config, log)?;
    let idx = scenario.nonzero_indices();
    Ok(WidthComparison {
        methods: methods.to_vec(),
        true_beta: idx.iter().map(|&j| scenario.beta_true[j]).collect(),
        mean_width: reports
            .iter()
            .map(|r| idx.iter().map(|&j| r.rows[j].mean_width).collect())
            .collect(),
        coefficient_index: idx,
        reports,
    })
}
