use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use preq_core::dynamics::{
    propagate_covariance_piecewise, propagate_density_nonlinear, OperatorTrajectory, TrajectoryKind,
};
use preq_core::generators::{coefficient_tensor, Generator, OrthonormalBasis};
use preq_core::matrix_json::{self, Rows};
use preq_core::operator::normalize_trace;
use preq_core::table;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{OutputFormat, Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::report::RunReport;
use crate::{paths, verify};

pub const SEED_ENV: &str = "PREQ_DEFAULT_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Propagate,
    Verify,
    Paths,
    Coeffs,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Propagate => "propagate",
            Command::Verify => "verify",
            Command::Paths => "paths",
            Command::Coeffs => "coeffs",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub command: Command,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub format: Option<OutputFormat>,
}

/// `--seed`, then the scenario's seed, then `PREQ_DEFAULT_SEED`, then 0.
pub fn resolve_seed(
    flag: Option<u64>,
    config: Option<u64>,
    env: Option<&str>,
) -> Result<(u64, Option<String>), CliError> {
    if let Some(s) = flag.or(config) {
        return Ok((s, None));
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map(|s| (s, None))
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        None => Ok((0, Some(format!("no seed given; using 0 ({SEED_ENV} unset)")))),
    }
}

pub fn config_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Output<'a> {
    dir: &'a Path,
    report: &'a mut RunReport,
}

impl Output<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.report.artifacts.push(name.to_string());
        Ok(())
    }
}

#[derive(Serialize)]
struct TrajectoryJson {
    kind: TrajectoryKind,
    t: Vec<f64>,
    values: Vec<Rows>,
    trace: Vec<f64>,
    min_eigenvalue: Vec<f64>,
}

fn trajectory_bytes(traj: &OperatorTrajectory, format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf).expect("in-memory write");
            buf
        }
        OutputFormat::Json => {
            let doc = TrajectoryJson {
                kind: traj.kind(),
                t: traj.grid().times().collect(),
                values: traj.values().iter().map(matrix_json::to_rows).collect(),
                trace: traj.traces(),
                min_eigenvalue: traj.min_eigenvalues(),
            };
            (serde_json::to_string_pretty(&doc).expect("serializes") + "\n").into_bytes()
        }
    }
}

fn summarize(report: &mut RunReport, label: &str, traj: &OperatorTrajectory) {
    let traces = traj.traces();
    let lambdas = traj.min_eigenvalues();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.summary.insert(format!("{label}.trace_min"), min(&traces));
    report.summary.insert(format!("{label}.trace_max"), max(&traces));
    report.summary.insert(format!("{label}.min_eigenvalue_min"), min(&lambdas));
    report.summary.insert(format!("{label}.min_eigenvalue_max"), max(&lambdas));
    for w in traj.warnings() {
        report.warnings.push(format!(
            "{label}: positivity grazing at t={} (min eigenvalue {})",
            table::float(w.time),
            table::float(w.min_eigenvalue)
        ));
    }
}

fn extension(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

fn run_propagate(scenario: &Scenario, out: &mut Output<'_>, format: OutputFormat) -> Result<(), CliError> {
    let schedule = scenario.generator_schedule()?;
    let b0 = scenario.require_initial()?;
    let grid = scenario.require_grid()?;
    let opts = &scenario.propagate;
    if !opts.covariance && !opts.nonlinear {
        return Err(CliError::Config("propagate: enable covariance and/or nonlinear".into()));
    }
    if opts.covariance {
        let traj = propagate_covariance_piecewise(&schedule, b0, grid, opts.method)?;
        summarize(out.report, "covariance", &traj);
        out.write(&format!("covariance.{}", extension(format)), &trajectory_bytes(&traj, format))?;
    }
    if opts.nonlinear {
        let l = match (&scenario.generator, schedule.segments()) {
            (Some(Generator::Linear(l)), _) => l.clone(),
            _ => {
                return Err(CliError::Config(
                    "propagate.nonlinear: needs a constant linear generator".into(),
                ))
            }
        };
        let (rho0, _) = normalize_trace(b0)?;
        let traj = propagate_density_nonlinear(&l, &rho0, grid)?;
        summarize(out.report, "density", &traj);
        out.report
            .summary
            .insert("density.max_trace_drift".into(), traj.max_trace_drift());
        out.write(&format!("density.{}", extension(format)), &trajectory_bytes(&traj, format))?;
    }
    Ok(())
}

fn run_verify(scenario: &Scenario, out: &mut Output<'_>) -> Result<(), CliError> {
    let checks = scenario
        .verify
        .as_ref()
        .ok_or_else(|| CliError::Config("verify: section required".into()))?
        .checks
        .clone();
    for r in verify::run_checks(scenario, &checks, out.report.seed)? {
        out.report.push(r);
    }
    Ok(())
}

fn run_paths(scenario: &Scenario, out: &mut Output<'_>) -> Result<(), CliError> {
    let cfg = scenario
        .paths
        .as_ref()
        .ok_or_else(|| CliError::Config("paths: section required".into()))?;
    let spec = cfg.spec(scenario.require_initial()?)?;
    let grid = scenario.require_grid()?;
    let n = scenario.require_samples()?;
    let kind = scenario.generator.as_ref().map(|g| g.kind().as_str().to_string());
    let outcome = paths::run(&spec, grid, n, out.report.seed, &cfg.record_times, cfg.export_paths, kind)?;
    for c in outcome.checks {
        out.report.push(c);
    }
    out.write("paths_summary.csv", &outcome.summary_csv)?;
    if cfg.export_paths {
        let mut buf = Vec::new();
        outcome
            .ensemble
            .write_paths_csv(&mut buf)
            .map_err(|e| CliError::io("formatting paths", e))?;
        out.write("paths.csv", &buf)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CoefficientsJson {
    dim: usize,
    basis: &'static str,
    /// `[k, m, i, j, re, im]`
    entries: Vec<(usize, usize, usize, usize, f64, f64)>,
}

fn run_coeffs(scenario: &Scenario, out: &mut Output<'_>, format: OutputFormat) -> Result<(), CliError> {
    let generator = scenario.require_generator()?;
    let n = scenario.dim;
    let tensor = coefficient_tensor(generator.linear(), &OrthonormalBasis::standard(n))?;
    let mut entries = Vec::with_capacity(n.pow(4));
    let mut largest: f64 = 0.0;
    for k in 0..n {
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let z = tensor.get(k, m, i, j);
                    largest = largest.max(z.norm());
                    entries.push((k, m, i, j, z.re, z.im));
                }
            }
        }
    }
    out.report.summary.insert("max_abs_coefficient".into(), largest);
    let bytes = match format {
        OutputFormat::Csv => {
            let mut s = String::from("k,m,i,j,re,im\n");
            for (k, m, i, j, re, im) in &entries {
                s.push_str(&format!("{k},{m},{i},{j},{},{}\n", table::float(*re), table::float(*im)));
            }
            s.into_bytes()
        }
        OutputFormat::Json => {
            let doc = CoefficientsJson {
                dim: n,
                basis: "standard",
                entries,
            };
            (serde_json::to_string_pretty(&doc).expect("serializes") + "\n").into_bytes()
        }
    };
    out.write(&format!("coeffs.{}", extension(format)), &bytes)
}

/// Loads the scenario, runs the command, and writes its artifacts plus
/// `report.json` into the output directory.
pub fn run(opts: &RunOptions) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let bytes = fs::read(&opts.config)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", opts.config.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Config(format!("{} is not UTF-8", opts.config.display())))?;
    let scenario = ScenarioConfig::from_json(text)?.resolve()?;
    let env = std::env::var(SEED_ENV).ok();
    let (seed, seed_warning) = resolve_seed(opts.seed, scenario.seed, env.as_deref())?;
    let format = opts.format.or(scenario.format).unwrap_or(OutputFormat::Csv);

    fs::create_dir_all(&opts.out)
        .map_err(|e| CliError::io(format!("creating {}", opts.out.display()), e))?;
    let mut report = RunReport::new(opts.command.as_str(), config_digest(&bytes), seed);
    report.warnings.extend(seed_warning);
    let mut out = Output {
        dir: &opts.out,
        report: &mut report,
    };
    match opts.command {
        Command::Propagate => run_propagate(&scenario, &mut out, format)?,
        Command::Verify => run_verify(&scenario, &mut out)?,
        Command::Paths => run_paths(&scenario, &mut out)?,
        Command::Coeffs => run_coeffs(&scenario, &mut out, format)?,
    }
    report.artifacts.push("report.json".into());
    let path = opts.out.join("report.json");
    fs::write(&path, report.to_json())
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    report.duration = started.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap().0, 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap().0, 2);
        assert_eq!(resolve_seed(None, None, Some(" 3 ")).unwrap().0, 3);
        let (seed, warning) = resolve_seed(None, None, None).unwrap();
        assert_eq!(seed, 0);
        assert!(warning.is_some());
        assert_eq!(resolve_seed(None, None, Some("x")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn digest_is_sha256_hex() {
        assert_eq!(
            config_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
