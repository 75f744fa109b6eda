use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use preq_cli::{run, CliError, Command, OutputFormat, RunOptions};

/// Propagate, sample and verify covariance dynamics from a JSON scenario.
#[derive(Parser, Debug)]
#[command(name = "preq", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; changes speed only, never results.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        command: args.command,
        config: args.config,
        seed: args.seed,
        out: args.out,
        format: args.format,
    };
    let result = match args.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))
            .and_then(|pool| pool.install(|| run(&opts))),
        None => run(&opts),
    };
    match result {
        Ok(report) => {
            for c in &report.checks {
                eprintln!(
                    "{} {} value={} reference={} tolerance={}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.check,
                    c.value,
                    c.reference,
                    c.tolerance
                );
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("{} finished in {:.3?}", report.command, report.duration);
            print!("{}", report.to_json());
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
