use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use selinf::bootstrap::{CiVariant, LambdaRule, ResidualType, ThresholdRule};
use selinf::config::{DataConfig, RunConfig};
use selinf::simbench::SimMethod;
use selinf::{CiMethod, CvConfig, Error, FamilyKind, Result};

#[derive(Debug, Parser)]
#[command(name = "selinf", version, about = "Penalized GLM fits and coefficient confidence intervals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a lasso GLM and write its coefficients.
    Fit(Flags),
    /// Confidence intervals for every coefficient.
    Ci(Flags),
    /// Coverage experiment on a synthetic scenario.
    Simulate(Flags),
    /// Width comparison of several methods on common synthetic datasets.
    Compare(Flags),
    /// Re-run the command recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        /// Output directory; defaults to the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<FamilyKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" => Ok(FamilyKind::Gaussian),
        "poisson" => Ok(FamilyKind::Poisson),
        "negbin" | "nb" => Ok(FamilyKind::NegBin),
        "tweedie" => Ok(FamilyKind::Tweedie),
        other => Err(format!("unknown family '{other}'")),
    }
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| format!("expected VARIABLE=LEVEL, got '{s}'"))
}

/// Every flag overrides the matching field of the config file.
#[derive(Debug, Args)]
pub struct Flags {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub drop: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub categorical: Option<Vec<String>>,
    /// Reference level of a categorical variable, as VARIABLE=LEVEL.
    #[arg(long = "reference", value_parser = parse_pair)]
    pub references: Vec<(String, String)>,

    #[arg(long, value_parser = parse_kind)]
    pub family: Option<FamilyKind>,
    #[arg(long)]
    pub power: Option<f64>,
    #[arg(long)]
    pub nb_size: Option<f64>,
    #[arg(long)]
    pub dispersion: Option<f64>,

    /// Interval method for `ci` (plr, debias, resid-boot, paired-boot) or
    /// the single method for `simulate`.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<SimMethod>>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,

    /// Fixed lasso penalty; overrides the lambda rule.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// per-replicate-cv or full-data-cv.
    #[arg(long)]
    pub lambda_rule: Option<String>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub n_lambda: Option<usize>,
    #[arg(long)]
    pub lambda_l2: Option<f64>,
    #[arg(long, value_parser = ["pearson", "deviance", "anscombe"])]
    pub residual_type: Option<String>,
    #[arg(long, value_parser = ["hybrid", "basic", "percentile"])]
    pub ci_variant: Option<String>,
    #[arg(long, value_parser = ["small", "printed"])]
    pub threshold: Option<String>,
    #[arg(long)]
    pub a_n: Option<f64>,

    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Append per-repetition records to repetitions.jsonl.
    #[arg(long)]
    pub log: bool,
}

fn quoted<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|e| Error::Config(format!("'{s}': {e}")))
}

impl Flags {
    /// Config file (or defaults) with the flags applied on top.
    pub fn resolve(&self, command: &str) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if self.data.is_some()
            || self.target.is_some()
            || self.drop.is_some()
            || self.categorical.is_some()
            || !self.references.is_empty()
        {
            let d = c.data.get_or_insert_with(DataConfig::default);
            if let Some(v) = &self.data {
                d.path = v.clone();
            }
            if let Some(v) = &self.target {
                d.columns.target = v.clone();
            }
            if let Some(v) = &self.drop {
                d.columns.drop_columns = v.clone();
            }
            if let Some(v) = &self.categorical {
                d.columns.categorical_columns = v.clone();
            }
            for (k, v) in &self.references {
                d.columns.reference_levels.insert(k.clone(), v.clone());
            }
        }
        if let Some(v) = self.family {
            c.family.kind = v;
        }
        if let Some(v) = self.power {
            c.family.power = v;
        }
        if let Some(v) = self.nb_size {
            c.family.negbin_size = v;
        }
        if let Some(v) = self.dispersion {
            c.family.dispersion = v;
        }
        if let Some(m) = &self.method {
            if command == "simulate" {
                c.methods = vec![m.parse::<SimMethod>()?];
            } else {
                c.method = m.parse::<CiMethod>()?;
            }
        }
        if let Some(v) = &self.methods {
            c.methods = v.clone();
        }
        if let Some(v) = self.level {
            c.level = v;
        }
        if let Some(v) = self.replicates {
            c.replicates = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        let mut cv = match c.lambda {
            LambdaRule::PerReplicateCv { cv } | LambdaRule::FullDataCv { cv } => cv,
            LambdaRule::Fixed { .. } => CvConfig::default(),
        };
        if let Some(v) = self.cv_folds {
            cv.folds = v;
        }
        if let Some(v) = self.n_lambda {
            cv.n_lambda = v;
        }
        c.lambda = match (self.lambda, self.lambda_rule.as_deref()) {
            (Some(l), _) => LambdaRule::Fixed { lambda: l },
            (None, Some("per-replicate-cv")) => LambdaRule::PerReplicateCv { cv },
            (None, Some("full-data-cv")) => LambdaRule::FullDataCv { cv },
            (None, Some(other)) => return Err(Error::Config(format!("unknown lambda rule '{other}'"))),
            (None, None) => match c.lambda {
                LambdaRule::PerReplicateCv { .. } => LambdaRule::PerReplicateCv { cv },
                LambdaRule::FullDataCv { .. } => LambdaRule::FullDataCv { cv },
                fixed => fixed,
            },
        };
        if let Some(v) = self.lambda_l2 {
            c.lambda_l2 = Some(v);
        }
        if let Some(v) = &self.residual_type {
            c.residual_type = quoted::<ResidualType>(v)?;
        }
        if let Some(v) = &self.ci_variant {
            c.ci_variant = quoted::<CiVariant>(v)?;
        }
        if let Some(v) = &self.threshold {
            c.threshold = quoted::<ThresholdRule>(v)?;
        }
        if let Some(v) = self.a_n {
            c.a_n_constant = v;
        }
        if let Some(v) = &self.scenario {
            c.scenario_file = Some(v.clone());
            c.scenario = None;
        }
        if let Some(v) = self.repetitions {
            c.repetitions = Some(v);
        }
        if self.log {
            c.repetition_log = true;
        }
        c.validate()?;
        Ok(c)
    }
}
