//! `invstop` — config-driven experiments on inverse optimal stopping.
//!
//! Subcommands: `simulate`, `transfer`, `solve-boundary`, `verify`,
//! `check-properties`. Every run resolves its configuration and seed, writes
//! a `manifest.toml` into the output directory before computing, and then
//! emits CSV/plain-text results; re-running a manifest reproduces outputs
//! bit-identically.
//!
//! Exit codes: 0 success, 2 configuration error, 3 precondition error,
//! 4 solver found no root, 5 verification failure, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CliError, Ctx};
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "invstop", version, about = "Reflected diffusions, implementing transfers, and optimal stopping boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override; falls back to INVSTOP_SEED, then the config, then 0.
    #[arg(long, global = true, env = "INVSTOP_SEED")]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate reflected paths and dump them as CSV files.
    Simulate,
    /// Estimate the implementing transfer curve for a barrier.
    Transfer,
    /// Solve the boundary integral equation backward in time.
    SolveBoundary,
    /// Verify implementability of a (barrier, transfer) pair on a lattice.
    Verify,
    /// Check the structural properties of an estimated transfer curve.
    CheckProperties,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(workers) = cli.workers {
        // Ignore the error if a pool already exists (e.g. under a test harness).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err.source());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config(anyhow::anyhow!("--config PATH is required")))?;
    let cfg = RunConfig::from_path(config_path).map_err(CliError::config)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let config_dir = config_path
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));

    let command_name = match cli.command {
        Command::Simulate => "simulate",
        Command::Transfer => "transfer",
        Command::SolveBoundary => "solve-boundary",
        Command::Verify => "verify",
        Command::CheckProperties => "check-properties",
    };

    let ctx = Ctx::prepare(cfg, config_dir, cli.out.clone(), seed, command_name)
        .map_err(CliError::config)?;

    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Transfer => commands::transfer(&ctx),
        Command::SolveBoundary => commands::solve_boundary(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::CheckProperties => commands::check_properties(&ctx),
    }
}
