use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    Plr,
    Debias,
    ResidBoot,
    PairedBoot,
    /// Fixed intervals injected by tests and harness checks.
    Stub,
}

impl CiMethod {
    pub const ALL: [CiMethod; 4] = [
        CiMethod::Plr,
        CiMethod::Debias,
        CiMethod::ResidBoot,
        CiMethod::PairedBoot,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CiMethod::Plr => "plr",
            CiMethod::Debias => "debias",
            CiMethod::ResidBoot => "resid-boot",
            CiMethod::PairedBoot => "paired-boot",
            CiMethod::Stub => "stub",
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "plr" => Ok(CiMethod::Plr),
            "debias" => Ok(CiMethod::Debias),
            "resid-boot" => Ok(CiMethod::ResidBoot),
            "paired-boot" => Ok(CiMethod::PairedBoot),
            "stub" => Ok(CiMethod::Stub),
            other => Err(Error::Config(format!("unknown interval method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefInterval {
    pub index: usize,
    pub name: String,
    pub point_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

impl CoefInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Per-coefficient intervals; index 0 is the intercept when one is fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTable {
    pub method: CiMethod,
    pub level: f64,
    pub rows: Vec<CoefInterval>,
}

/// Name used for coefficient `index` when no feature names are supplied.
pub fn default_coef_name(index: usize, intercept: bool) -> String {
    match (intercept, index) {
        (true, 0) => "(Intercept)".to_string(),
        (true, j) => format!("x{j}"),
        (false, j) => format!("x{}", j + 1),
    }
}

impl IntervalTable {
    pub fn new(method: CiMethod, level: f64) -> Self {
        Self {
            method,
            level,
            rows: Vec::new(),
        }
    }

    /// Appends an interval; `lower > upper` or NaN endpoints are rejected.
    pub fn push(&mut self, name: impl Into<String>, point: f64, lower: f64, upper: f64) -> Result<()> {
        if !(lower <= upper) {
            return Err(Error::InvalidInput(format!(
                "interval {} has lower {lower} above upper {upper}",
                self.rows.len()
            )));
        }
        self.rows.push(CoefInterval {
            index: self.rows.len(),
            name: name.into(),
            point_estimate: point,
            lower,
            upper,
            width: upper - lower,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rename(&mut self, names: &[String]) -> Result<()> {
        if names.len() != self.rows.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} intervals",
                names.len(),
                self.rows.len()
            )));
        }
        for (r, n) in self.rows.iter_mut().zip(names) {
            r.name = n.clone();
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CoefInterval> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Writes the table as CSV. Endpoints are printed at full precision, with
    /// a three-decimal display column alongside.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "index",
            "name",
            "method",
            "level",
            "point_estimate",
            "lower",
            "upper",
            "width",
            "display",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.index.to_string(),
                r.name.clone(),
                self.method.to_string(),
                self.level.to_string(),
                r.point_estimate.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
                r.width.to_string(),
                format!("[{:.3}, {:.3}]", r.lower, r.upper),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
