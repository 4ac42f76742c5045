mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Kernel mean shrinkage experiments.
///
/// Every run reads one TOML config (or a manifest.json from an earlier run),
/// writes CSVs and a manifest under --out, and never touches the config.
#[derive(Parser, Debug)]
#[command(name = "kmse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo risk of each estimator, optionally swept over n, d, alpha or lambda.
    RiskSweep(Common),
    /// Probability of improvement as alpha runs over fractions of the empirical bound.
    Tradeoff(Common),
    /// Median percentage improvement over random mixtures on an (n, d, kernel) grid.
    ImprovementGrid(Common),
    /// Closed-form S-KMSE LOOCV score against explicit leave-one-out refits.
    LoocvCheck(Common),
    /// Parzen window classification error of each estimator on a CSV dataset.
    Parzen(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config, or a manifest.json written by a previous run.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism). Affects runtime only.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RiskSweep(_) => "risk-sweep",
            Command::Tradeoff(_) => "tradeoff",
            Command::ImprovementGrid(_) => "improvement-grid",
            Command::LoocvCheck(_) => "loocv-check",
            Command::Parzen(_) => "parzen",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::RiskSweep(c)
            | Command::Tradeoff(c)
            | Command::ImprovementGrid(c)
            | Command::LoocvCheck(c)
            | Command::Parzen(c) => c,
        }
    }
}

/// Exit 1: the invocation or its inputs are invalid. Exit 2: a valid run failed.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KMSE_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let sub = cli.command.name();
    match commands::run(sub, cli.command.common()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kmse {sub}: {f}");
            ExitCode::from(f.code())
        }
    }
}
