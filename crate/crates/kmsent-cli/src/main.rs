//! Command-line driver: thermal relative-entropy calculations for a
//! perturbed scalar field, adiabatic (per-volume) limits, and the exact
//! finite-dimensional cross-checks.
//!
//! Exit codes: 0 success, 2 unusable input, 3 a residual or bound check
//! failed. Artifacts are buffered and written only when the whole run
//! succeeds.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::RunOutput;

#[derive(Parser)]
#[command(name = "kmsent", version, about, disable_help_subcommand = true)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory artifacts are written into (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Seed for the randomized checks; overrides the one in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the stdout summary (artifacts are still written).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative entropy S(t) with static/dynamic and per-order breakdown.
    Relent,
    /// Entropy production rate under free intermediate dynamics.
    Entprod,
    /// Check S(t) - S(0) against the integrated production rate.
    Balance,
    /// Relative entropy per unit volume in the large-volume limit.
    Density,
    /// Finite-volume density sequence approaching the adiabatic limit.
    Vanhove,
    /// Late-time decay of the production density toward the steady state.
    Ness,
    /// Exact finite-dimensional validation of the entropy formulas.
    Oracle,
    /// Detailed-balance and KMS-condition residuals.
    Kmscheck,
}

fn run(cli: &Cli) -> Result<RunOutput> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Invalid("a --config file is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("reading {}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text)?;
    match cli.command {
        Command::Relent => commands::relent(&cfg),
        Command::Entprod => commands::entprod(&cfg),
        Command::Balance => commands::balance(&cfg),
        Command::Density => commands::density(&cfg),
        Command::Vanhove => commands::vanhove(&cfg),
        Command::Ness => commands::ness(&cfg),
        Command::Oracle => commands::oracle(&cfg, cli.seed),
        Command::Kmscheck => commands::kmscheck(&cfg, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if let Err(err) = out.write_all(&cli.out) {
                eprintln!("kmsent: {err}");
                return ExitCode::from(err.exit_code());
            }
            if !cli.quiet {
                for line in &out.summary {
                    println!("{line}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("kmsent: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
