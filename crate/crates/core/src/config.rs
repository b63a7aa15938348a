//! Run configuration shared by every command, and the manifest written
//! next to each report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{BootstrapConfig, CiVariant, LambdaRule, ResidualType, ThresholdRule};
use crate::data::{CategoricalEncoding, ImputationRecord, LoadOptions};
use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilySpec, Link};
use crate::interval::CiMethod;
use crate::simbench::{ExperimentConfig, SimMethod, SimScenario};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    /// Tweedie power.
    pub power: f64,
    pub negbin_size: f64,
    pub dispersion: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            kind: FamilyKind::Gaussian,
            power: 1.5,
            negbin_size: 4.5,
            dispersion: 1.0,
        }
    }
}

impl FamilyConfig {
    pub fn to_spec(&self) -> Result<FamilySpec> {
        let link = if self.kind == FamilyKind::Gaussian { Link::Identity } else { Link::Log };
        FamilySpec::new(self.kind, self.power, self.dispersion, self.negbin_size, link)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(flatten)]
    pub columns: LoadOptions,
}

/// Every parameter of a command invocation. Command-line flags override
/// the fields they name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<DataConfig>,
    pub family: FamilyConfig,
    /// Interval method of `ci`.
    pub method: CiMethod,
    /// Methods of `simulate` (exactly one) and `compare` (two or more).
    pub methods: Vec<SimMethod>,
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
    pub lambda: LambdaRule,
    pub lambda_l2: Option<f64>,
    pub residual_type: ResidualType,
    pub ci_variant: CiVariant,
    pub threshold: ThresholdRule,
    pub a_n_constant: f64,
    pub solver: SolverConfig,
    /// Scenario file for `simulate` and `compare`.
    pub scenario_file: Option<PathBuf>,
    /// Inline scenario; takes precedence over `scenario_file`.
    pub scenario: Option<SimScenario>,
    /// Overrides the scenario's repetition count.
    pub repetitions: Option<usize>,
    /// Append per-repetition records to `repetitions.jsonl` in the output directory.
    pub repetition_log: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let boot = BootstrapConfig::default();
        Self {
            data: None,
            family: FamilyConfig::default(),
            method: CiMethod::Plr,
            methods: vec![SimMethod::Plr],
            level: boot.level,
            replicates: boot.n_replicates,
            seed: boot.master_seed,
            workers: 0,
            lambda: LambdaRule::default(),
            lambda_l2: None,
            residual_type: boot.residual_type,
            ci_variant: boot.ci_variant,
            threshold: boot.threshold,
            a_n_constant: boot.a_n_constant,
            solver: SolverConfig::default(),
            scenario_file: None,
            scenario: None,
            repetitions: None,
            repetition_log: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must be at most {}", i64::MAX)));
        }
        self.family.to_spec()?;
        self.bootstrap().validate()?;
        if let Some(l2) = self.lambda_l2 {
            if !(l2 >= 0.0) || !l2.is_finite() {
                return Err(Error::Config(format!("lambda_l2 must be finite and nonnegative, got {l2}")));
            }
        }
        Ok(())
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_replicates: self.replicates,
            level: self.level,
            master_seed: self.seed,
            a_n_constant: self.a_n_constant,
            residual_type: self.residual_type,
            ci_variant: self.ci_variant,
            threshold: self.threshold,
            workers: self.workers,
            solver: self.solver,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            bootstrap: self.bootstrap(),
            lambda: self.lambda,
            lambda_l2: self.lambda_l2,
            workers: self.workers,
        }
    }

    /// The scenario with the repetition override applied, reading
    /// `scenario_file` when no inline scenario is given.
    pub fn resolve_scenario(&self) -> Result<SimScenario> {
        let mut s = match (&self.scenario, &self.scenario_file) {
            (Some(s), _) => s.clone(),
            (None, Some(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            (None, None) => return Err(Error::Config("no scenario given".into())),
        };
        if let Some(r) = self.repetitions {
            s.repetitions = r;
        }
        s.validate()?;
        Ok(s)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Written as `manifest.json` beside every report. `config` is fully
/// resolved (scenario inlined), so rerunning it reproduces the outputs. The
/// output directory is left empty so that identical runs written to
/// different places produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub data_sha256: Option<String>,
    pub scenario_hash: Option<String>,
    pub encoding_map: Vec<CategoricalEncoding>,
    pub imputation_log: Vec<ImputationRecord>,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let config = RunConfig {
            out_dir: PathBuf::new(),
            ..config.clone()
        };
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config.hash(),
            config,
            data_sha256: None,
            scenario_hash: None,
            encoding_map: Vec::new(),
            imputation_log: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
