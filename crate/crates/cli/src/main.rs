//! Command-line front end for the convex-flow library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::Exit;
use config::RunConfig;
use output::Artifacts;

/// Evolve convex bodies by anisotropic support-function flows and evaluate
/// the functionals and inequalities around them. The command to run is read
/// from the config file.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for solve and sweep (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Run even when hypothesis checks fail; recorded in the outputs.
    #[arg(long)]
    waive_checks: bool,
    /// Corpus seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match execute(&cli) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            Exit::InvalidInput
        }
    };
    ExitCode::from(status as u8)
}

fn execute(cli: &Cli) -> Result<Exit, config::ConfigError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.waive_checks {
        cfg.flow.waive_checks = true;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let artifacts = Artifacts::create(&dir, &cfg)?;
    artifacts.write("config.toml", &cfg.canonical())?;
    commands::dispatch(&cfg, &artifacts, cli.jobs)
}
