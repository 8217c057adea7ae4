//! Command-line harness for the privmoment estimators: generate synthetic
//! datasets, plan sample sizes, run the estimators, diagnose
//! subsamplability, and benchmark parameter sweeps.
//!
//! Exit codes: 0 on success, 2 when an estimator declines to release
//! (baseline abort, no stable eigenvalue bucket), 1 for usage and data
//! errors.

mod commands;
mod io;
mod report;

use clap::{Parser, Subcommand};
use commands::{CliError, Globals};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "privmoment", version, about = "Differentially private second-moment estimation")]
struct Cli {
    /// RNG seed; falls back to PRIVMOMENT_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Include data-dependent trace fields (shrink lists, noise norms,
    /// per-group scores) in the report.
    #[arg(long, global = true)]
    unsafe_diagnostics: bool,
    /// Skip every noise draw. The output is then not private; testing only.
    #[arg(long, global = true)]
    force_zero_noise: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset file.
    Gen(commands::GenArgs),
    /// Evaluate sample-size requirements without touching data.
    Plan(commands::PlanArgs),
    /// Run the recursive preconditioning estimator on a dataset file.
    Estimate(commands::EstimateArgs),
    /// Run the subsample-and-aggregate estimator on a dataset file.
    Baseline(commands::BaselineArgs),
    /// Release a private lower bound on the minimum eigenvalue.
    Eigmin(commands::EigminArgs),
    /// Measure the empirical subsamplability failure rate.
    CheckSubsamp(commands::CheckArgs),
    /// Sweep outlier rates and run both estimators on each cell.
    Bench(commands::BenchArgs),
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("PRIVMOMENT_SEED") {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CliError::Usage(format!("PRIVMOMENT_SEED is set but is not a u64: {raw:?}"))
        }),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let globals = Globals {
        seed: resolve_seed(cli.seed)?,
        output: cli.output,
        unsafe_diagnostics: cli.unsafe_diagnostics,
        force_zero_noise: cli.force_zero_noise,
    };
    match cli.cmd {
        Cmd::Gen(a) => commands::gen(a, &globals),
        Cmd::Plan(a) => commands::plan(a, &globals),
        Cmd::Estimate(a) => commands::estimate(a, &globals),
        Cmd::Baseline(a) => commands::baseline(a, &globals),
        Cmd::Eigmin(a) => commands::eigmin(a, &globals),
        Cmd::CheckSubsamp(a) => commands::check_subsamp(a, &globals),
        Cmd::Bench(a) => commands::bench(a, &globals),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
