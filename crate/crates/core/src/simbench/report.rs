use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentConfig, RepetitionRecord, SimMethod};
use super::SimScenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub coefficient_index: usize,
    pub true_beta: f64,
    pub covered: usize,
    pub ci_rate: f64,
    pub mean_width: f64,
}

/// Per-coefficient coverage over `R` repetitions of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub method: SimMethod,
    pub scenario_hash: String,
    pub repetitions: usize,
    pub rows: Vec<CoverageRow>,
    /// Mean CI rate over nonzero non-intercept coefficients.
    pub nonzero_rate: f64,
    /// Mean CI rate over zero non-intercept coefficients.
    pub zero_rate: f64,
    pub total_fits: usize,
    /// Largest per-dataset fraction of clamped linear predictors.
    pub max_clamp_rate: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

impl CoverageReport {
    /// Tallies coverage from per-repetition records, which must cover
    /// repetitions `0..R` of a single method exactly once.
    pub fn tally(scenario: &SimScenario, method: SimMethod, records: &[RepetitionRecord]) -> Result<Self> {
        let hash = scenario.hash();
        let r = scenario.repetitions;
        let mut seen = vec![false; r];
        for rec in records {
            if rec.method != method || rec.scenario_hash != hash {
                return Err(Error::InvalidInput(format!(
                    "record for {} / {} does not belong to this run",
                    rec.method, rec.scenario_hash
                )));
            }
            if rec.repetition >= r || std::mem::replace(&mut seen[rec.repetition], true) {
                return Err(Error::InvalidInput(format!(
                    "repetition {} is out of range or duplicated",
                    rec.repetition
                )));
            }
            if rec.table.len() != scenario.p {
                return Err(Error::Dimension(format!(
                    "repetition {} has {} intervals for {} coefficients",
                    rec.repetition,
                    rec.table.len(),
                    scenario.p
                )));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("repetition {missing} has no record")));
        }
        let rows: Vec<CoverageRow> = (0..scenario.p)
            .map(|j| {
                let truth = scenario.beta_true[j];
                let covered = records.iter().filter(|rec| rec.table.rows[j].contains(truth)).count();
                CoverageRow {
                    coefficient_index: j,
                    true_beta: truth,
                    covered,
                    ci_rate: covered as f64 / r as f64,
                    mean_width: records.iter().map(|rec| rec.table.rows[j].width).sum::<f64>() / r as f64,
                }
            })
            .collect();
        Ok(Self {
            method,
            scenario_hash: hash,
            repetitions: r,
            nonzero_rate: mean(scenario.nonzero_indices().into_iter().map(|j| rows[j].ci_rate)),
            zero_rate: mean(scenario.zero_indices().into_iter().map(|j| rows[j].ci_rate)),
            rows,
            total_fits: records.iter().map(|rec| rec.fits).sum(),
            max_clamp_rate: records.iter().map(|rec| rec.clamp_rate).fold(0.0, f64::max),
        })
    }

    /// Mean width over nonzero non-intercept coefficients.
    pub fn nonzero_mean_width(&self, scenario: &SimScenario) -> f64 {
        mean(scenario.nonzero_indices().into_iter().map(|j| self.rows[j].mean_width))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_header(&mut w)?;
        self.write_rows(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub(crate) fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for r in &self.rows {
            w.write_record([
                r.coefficient_index.to_string(),
                r.true_beta.to_string(),
                self.method.to_string(),
                r.ci_rate.to_string(),
                r.mean_width.to_string(),
            ])?;
        }
        Ok(())
    }
}

pub(crate) fn write_header<W: Write>(w: &mut csv::Writer<W>) -> Result<()> {
    w.write_record(["coefficient_index", "true_beta", "method", "ci_rate", "mean_width"])?;
    Ok(())
}

/// Rebuilds a report from an append-only repetition log.
pub fn recount_from_log(path: &Path, scenario: &SimScenario, method: SimMethod) -> Result<CoverageReport> {
    let hash = scenario.hash();
    let records: Vec<RepetitionRecord> = read_log(path)?
        .into_iter()
        .filter(|r| r.method == method && r.scenario_hash == hash)
        .collect();
    CoverageReport::tally(scenario, method, &records)
}

pub(crate) fn read_log(path: &Path) -> Result<Vec<RepetitionRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(rec) => out.push(rec),
            // an interrupted append leaves a truncated final line
            Err(e) if e.is_eof() => break,
            Err(e) => return Err(Error::Io(format!("{}: line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

/// Everything needed to regenerate a simulation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario: SimScenario,
    pub scenario_hash: String,
    pub methods: Vec<SimMethod>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(scenario: &SimScenario, methods: &[SimMethod], config: &ExperimentConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: scenario.clone(),
            scenario_hash: scenario.hash(),
            methods: methods.to_vec(),
            config: config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad manifest: {e}")))
    }
}
