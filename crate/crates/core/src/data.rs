//! Tabular ingestion: delimited text with a header row, median imputation
//! for numeric columns, mode imputation and drop-one encoding for
//! categorical columns.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Cell values treated as missing (compared case-insensitively after trimming).
pub const MISSING_TOKENS: [&str; 5] = ["", "na", "?", "nan", "."];

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    MISSING_TOKENS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

/// Indicator columns created for one categorical variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoding {
    pub variable: String,
    /// Level absorbed by the intercept.
    pub reference: String,
    /// `(level, column index in X)` in level order.
    pub columns: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationRecord {
    pub column: String,
    pub imputed: usize,
    /// Median for numeric columns, modal level for categorical ones.
    pub fill: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub encoding_map: Vec<CategoricalEncoding>,
    pub imputation_log: Vec<ImputationRecord>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Coefficient names with a leading intercept.
    pub fn coefficient_names(&self) -> Vec<String> {
        std::iter::once("(Intercept)".to_string())
            .chain(self.feature_names.iter().cloned())
            .collect()
    }

    pub fn total_imputed(&self) -> usize {
        self.imputation_log.iter().map(|r| r.imputed).sum()
    }
}

/// Column roles for [`load_csv_with`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    pub target: String,
    pub drop_columns: Vec<String>,
    pub categorical_columns: Vec<String>,
    /// Per-variable reference level; unlisted variables use their first observed level.
    pub reference_levels: BTreeMap<String, String>,
}

pub fn load_csv(
    path: &Path,
    target_column: &str,
    drop_columns: &[String],
    categorical_columns: &[String],
) -> Result<Dataset> {
    let opts = LoadOptions {
        target: target_column.to_string(),
        drop_columns: drop_columns.to_vec(),
        categorical_columns: categorical_columns.to_vec(),
        reference_levels: BTreeMap::new(),
    };
    load_csv_with(File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?, &opts)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn load_csv_with<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let position = |name: &str| header.iter().position(|h| h == name);
    let target = position(&opts.target).ok_or_else(|| Error::MissingColumn(opts.target.clone()))?;
    for name in opts.drop_columns.iter().chain(&opts.categorical_columns).chain(opts.reference_levels.keys()) {
        if position(name).is_none() {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no data rows".into()));
    }

    let parse = |row: usize, col: usize| -> Result<Option<f64>> {
        let cell = &rows[row][col];
        if is_missing(cell) {
            return Ok(None);
        }
        cell.trim().parse::<f64>().map(Some).map_err(|_| Error::Parse {
            row: row + 1,
            column: header[col].clone(),
            value: cell.clone(),
        })
    };

    let mut y = Vec::with_capacity(rows.len());
    for (r, cells) in rows.iter().enumerate() {
        match parse(r, target)? {
            Some(v) => y.push(v),
            None => {
                return Err(Error::Parse {
                    row: r + 1,
                    column: opts.target.clone(),
                    value: cells[target].clone(),
                })
            }
        }
    }

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    let mut encoding_map = Vec::new();
    let mut imputation_log = Vec::new();
    for (c, name) in header.iter().enumerate() {
        if c == target || opts.drop_columns.contains(name) {
            continue;
        }
        if opts.categorical_columns.contains(name) {
            let mut levels: Vec<String> = Vec::new();
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for row in &rows {
                let cell = row[c].trim();
                if is_missing(cell) {
                    continue;
                }
                if !counts.contains_key(cell) {
                    levels.push(cell.to_string());
                }
                *counts.entry(cell).or_default() += 1;
            }
            if levels.is_empty() {
                return Err(Error::AllMissing(name.clone()));
            }
            // ties go to the level seen first
            let mode = levels
                .iter()
                .fold((0usize, ""), |best, l| {
                    let k = counts[l.as_str()];
                    if k > best.0 {
                        (k, l.as_str())
                    } else {
                        best
                    }
                })
                .1
                .to_string();
            let reference = match opts.reference_levels.get(name) {
                Some(r) if levels.contains(r) => r.clone(),
                Some(r) => {
                    return Err(Error::InvalidInput(format!(
                        "reference level `{r}` never occurs in `{name}`"
                    )))
                }
                None => levels[0].clone(),
            };
            let mut imputed = 0;
            let values: Vec<String> = rows
                .iter()
                .map(|row| {
                    if is_missing(&row[c]) {
                        imputed += 1;
                        mode.clone()
                    } else {
                        row[c].trim().to_string()
                    }
                })
                .collect();
            let mut enc = CategoricalEncoding {
                variable: name.clone(),
                reference: reference.clone(),
                columns: Vec::new(),
            };
            for level in levels.iter().filter(|l| **l != reference) {
                enc.columns.push((level.clone(), columns.len()));
                names.push(format!("{name}_{level}"));
                columns.push(values.iter().map(|v| f64::from(u8::from(v == level))).collect());
            }
            encoding_map.push(enc);
            imputation_log.push(ImputationRecord {
                column: name.clone(),
                imputed,
                fill: mode,
            });
        } else {
            let parsed: Vec<Option<f64>> = (0..rows.len()).map(|r| parse(r, c)).collect::<Result<_>>()?;
            let observed: Vec<f64> = parsed.iter().flatten().copied().collect();
            if observed.is_empty() {
                return Err(Error::AllMissing(name.clone()));
            }
            let fill = median(observed);
            let imputed = parsed.iter().filter(|v| v.is_none()).count();
            columns.push(parsed.into_iter().map(|v| v.unwrap_or(fill)).collect());
            names.push(name.clone());
            imputation_log.push(ImputationRecord {
                column: name.clone(),
                imputed,
                fill: fill.to_string(),
            });
        }
    }
    let n = rows.len();
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    Ok(Dataset {
        feature_names: names,
        x,
        y,
        encoding_map,
        imputation_log,
    })
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
    }
    Ok(hex::encode(h.finalize()))
}
