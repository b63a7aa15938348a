use std::fs;
use std::path::Path;

use selinf::bootstrap::{paired_bootstrap_glm, plr_glm, residual_bootstrap_glm, residual_bootstrap_lm, LambdaRule};
use selinf::config::{Manifest, OutputFile, RunConfig};
use selinf::data::{file_sha256, load_csv_with, Dataset};
use selinf::debias::{
    debias_glm, debias_lm, default_mu, lm_sigma_hat, nodewise_theta, select_nodewise_lambda, weighted_design,
};
use selinf::simbench::{run_coverage_experiment_logged, width_comparison};
use selinf::solver::{fit_penalized_glm, select_lambda_cv};
use selinf::{CiMethod, CvResult, Error, FamilyKind, FamilySpec, IntervalTable, PenaltySpec, Result};

const LOG_FILE: &str = "repetitions.jsonl";

/// Paths written by a command, relative to its output directory.
pub struct Written {
    pub out_dir: std::path::PathBuf,
    pub files: Vec<String>,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn load_data(config: &RunConfig) -> Result<(Dataset, String)> {
    let d = config
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("no data file given (--data or [data] in the config)".into()))?;
    if d.columns.target.is_empty() {
        return Err(Error::Config("no target column given".into()));
    }
    let file = fs::File::open(&d.path).map_err(|e| io_err(&d.path, e))?;
    Ok((load_csv_with(file, &d.columns)?, file_sha256(&d.path)?))
}

fn cv_lambda(config: &RunConfig, data: &Dataset, family: &FamilySpec) -> Result<CvResult> {
    match config.lambda {
        LambdaRule::Fixed { lambda } => Ok(CvResult::fixed(lambda)),
        LambdaRule::PerReplicateCv { cv } | LambdaRule::FullDataCv { cv } => {
            select_lambda_cv(&data.x, &data.y, family, &cv, config.seed, &config.solver)
        }
    }
}

fn write_outputs(config: &RunConfig, mut manifest: Manifest, files: Vec<(&str, Vec<u8>)>) -> Result<Written> {
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut names = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, &bytes).map_err(|e| io_err(&path, e))?;
        manifest.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: file_sha256(&path)?,
        });
        names.push(name.to_string());
    }
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).map_err(|e| io_err(&path, e))?;
    names.push("manifest.json".into());
    Ok(Written {
        out_dir: dir.clone(),
        files: names,
    })
}

fn data_manifest(command: &str, config: &RunConfig, data: &Dataset, sha: String) -> Manifest {
    let mut m = Manifest::new(command, config);
    m.data_sha256 = Some(sha);
    m.encoding_map = data.encoding_map.clone();
    m.imputation_log = data.imputation_log.clone();
    m
}

pub fn fit(config: &RunConfig) -> Result<Written> {
    let family = config.family.to_spec()?;
    let (data, sha) = load_data(config)?;
    let cv = cv_lambda(config, &data, &family)?;
    let fit = fit_penalized_glm(&data.x, &data.y, &family, &PenaltySpec::lasso(cv.best_lambda, data.p()), &config.solver)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "name", "estimate"])?;
    for (j, (name, b)) in data.coefficient_names().iter().zip(fit.coefficients()).enumerate() {
        w.write_record([j.to_string(), name.clone(), b.to_string()])?;
    }
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["lambda", "dispersion", "iterations", "converged", "n", "p"])?;
    summary.write_record([
        cv.best_lambda.to_string(),
        fit.dispersion.to_string(),
        fit.n_iterations.to_string(),
        fit.converged.to_string(),
        data.n().to_string(),
        data.p().to_string(),
    ])?;
    let coef = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    let summary = summary.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    write_outputs(config, data_manifest("fit", config, &data, sha), vec![("coefficients.csv", coef), ("fit.csv", summary)])
}

/// Interval table for the configured method on a loaded dataset.
pub fn intervals(config: &RunConfig, data: &Dataset) -> Result<IntervalTable> {
    let family = config.family.to_spec()?;
    let boot = config.bootstrap();
    let mut table = match config.method {
        CiMethod::Plr => plr_glm(&data.x, &data.y, &family, &boot, &config.lambda, config.lambda_l2)?.table,
        CiMethod::PairedBoot => paired_bootstrap_glm(&data.x, &data.y, &family, &boot, &config.lambda)?.table,
        CiMethod::ResidBoot => {
            let cv = cv_lambda(config, data, &family)?;
            if family.kind == FamilyKind::Gaussian {
                residual_bootstrap_lm(&data.x, &data.y, &boot, &cv)?.table
            } else {
                residual_bootstrap_glm(&data.x, &data.y, &family, &boot, &cv)?.table
            }
        }
        CiMethod::Debias => {
            let cv = cv_lambda(config, data, &family)?;
            let fit = fit_penalized_glm(&data.x, &data.y, &family, &PenaltySpec::lasso(cv.best_lambda, data.p()), &config.solver)?;
            if family.kind == FamilyKind::Gaussian {
                let sigma = lm_sigma_hat(&fit, &data.x, &data.y)?;
                debias_lm(&fit, &data.x, &data.y, default_mu(data.p() + 1, data.n()), sigma, config.level)?.intervals
            } else {
                let xw = weighted_design(&data.x, &fit, &family)?;
                let lam = select_nodewise_lambda(&xw, true, config.seed)?;
                let theta = nodewise_theta(&xw, &vec![lam; xw.ncols()])?;
                debias_glm(&fit, &data.x, &data.y, &family, &theta, config.level)?.intervals
            }
        }
        CiMethod::Stub => return Err(Error::Config("the stub method is only available to simulations".into())),
    };
    table.rename(&data.coefficient_names())?;
    Ok(table)
}

pub fn ci(config: &RunConfig) -> Result<Written> {
    let (data, sha) = load_data(config)?;
    let table = intervals(config, &data)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_outputs(config, data_manifest("ci", config, &data, sha), vec![("intervals.csv", buf)])
}

/// Config with the scenario inlined so the manifest stands alone.
fn resolved(config: &RunConfig) -> Result<(RunConfig, selinf::simbench::SimScenario)> {
    let scenario = config.resolve_scenario()?;
    let mut c = config.clone();
    c.scenario = Some(scenario.clone());
    c.scenario_file = None;
    c.repetitions = None;
    Ok((c, scenario))
}

fn log_path(config: &RunConfig) -> Result<Option<std::path::PathBuf>> {
    if !config.repetition_log {
        return Ok(None);
    }
    fs::create_dir_all(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;
    Ok(Some(config.out_dir.join(LOG_FILE)))
}

pub fn simulate(config: &RunConfig) -> Result<Written> {
    let (config, scenario) = resolved(config)?;
    let [method] = config.methods[..] else {
        return Err(Error::Config(format!("simulate runs exactly one method, got {}", config.methods.len())));
    };
    let log = log_path(&config)?;
    let report = run_coverage_experiment_logged(&scenario, method, &config.experiment(), log.as_deref())?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    let mut m = Manifest::new("simulate", &config);
    m.scenario_hash = Some(scenario.hash());
    let mut w = write_outputs(&config, m, vec![("coverage.csv", buf)])?;
    if log.is_some() {
        w.files.push(LOG_FILE.into());
    }
    Ok(w)
}

pub fn compare(config: &RunConfig) -> Result<Written> {
    let (config, scenario) = resolved(config)?;
    let log = log_path(&config)?;
    let cmp = width_comparison(&scenario, &config.methods, &config.experiment(), log.as_deref())?;
    let mut buf = Vec::new();
    cmp.write_csv(&mut buf)?;
    let mut m = Manifest::new("compare", &config);
    m.scenario_hash = Some(scenario.hash());
    let mut w = write_outputs(&config, m, vec![("widths.csv", buf)])?;
    if log.is_some() {
        w.files.push(LOG_FILE.into());
    }
    Ok(w)
}

/// Runs a manifest's command again, checking the input data is unchanged.
pub fn rerun(manifest: &Path, out: Option<&Path>) -> Result<(String, Written)> {
    let m = Manifest::load(manifest)?;
    let mut config = m.config.clone();
    config.out_dir = match out {
        Some(o) => o.to_path_buf(),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if let (Some(want), Some(d)) = (&m.data_sha256, &config.data) {
        let got = file_sha256(&d.path)?;
        if &got != want {
            return Err(Error::InvalidInput(format!(
                "{} has changed since the manifest was written (sha256 {got}, expected {want})",
                d.path.display()
            )));
        }
    }
    let w = match m.command.as_str() {
        "fit" => fit(&config)?,
        "ci" => ci(&config)?,
        "simulate" => simulate(&config)?,
        "compare" => compare(&config)?,
        other => return Err(Error::Config(format!("manifest names unknown command '{other}'"))),
    };
    Ok((m.command, w))
}
