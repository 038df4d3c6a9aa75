//! `seirs`: simulate and analyse periodic SEIRS models from a TOML config.
//!
//! Exit codes: 0 success, 1 analysis or output failure, 2 configuration
//! error, 3 integration failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutDir;

#[derive(Parser)]
#[command(name = "seirs", version, about = "Periodic SEIRS models: simulation, R0, endemic orbits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for random initial states; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative integration tolerance (absolute is 1e-3 of it).
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate trajectories and write one CSV per initial state.
    Simulate,
    /// R0, the endemic algebraic point and the existence verdict.
    Analyze,
    /// The analysis plus the persistence floor and a priori bounds.
    Endemic,
    /// Locate a periodic orbit by shooting and write it over one period.
    Orbit,
    /// R0 and verdict over a grid of transmission means and amplitudes.
    Sweep,
    /// Check the incidence hypotheses on the population box.
    CheckHypotheses,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol <= 1e-2) {
            return Err(CliError::Config(format!("--tol must lie in (0, 1e-2], got {tol}")));
        }
        cfg.override_tolerance(tol);
    }
    let out = OutDir::create(cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate => commands::simulate_cmd(&cfg, &out),
        Command::Analyze => commands::analyze_cmd(&cfg, &out),
        Command::Endemic => commands::endemic_cmd(&cfg, &out),
        Command::Orbit => commands::orbit_cmd(&cfg, &out),
        Command::Sweep => commands::sweep_cmd(&cfg, &out),
        Command::CheckHypotheses => commands::check_hypotheses_cmd(&cfg, &out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
