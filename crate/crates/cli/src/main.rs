//! `fdlpv`: pipeline driver for data-driven LPV controller synthesis.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 infeasible
//! synthesis or a refuted/inconclusive certificate, 4 numerical failure.

mod commands;
mod files;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fdlpv_core::config::PipelineConfig;
use fdlpv_core::Error;

#[derive(Parser)]
#[command(name = "fdlpv", version, about = "Data-driven LPV controller synthesis from frozen frequency responses")]
struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Full-length records (240000 samples) and 1000-point grids.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run closed-loop experiments on the surrogate and estimate the dataset.
    Generate,
    /// Re-estimate the dataset from record files in the output directory.
    Estimate,
    /// Minimize gamma over the controller coefficients.
    Synthesize {
        /// Design a scheduling-independent controller.
        #[arg(long)]
        lti: bool,
    },
    /// Certify stability and performance of a controller on the dataset.
    Analyze {
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Performance level to certify; defaults to the controller's gamma.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Frozen and time-varying tracking scenarios.
    Simulate {
        #[arg(long)]
        controller: Option<PathBuf>,
    },
    /// Plot-ready CSV tables of the dataset, closed loops and controller.
    Report {
        #[arg(long)]
        controller: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Io { .. }
        | Error::InvalidInput(_)
        | Error::OutOfRange(_)
        | Error::GridMismatch(_) => 2,
        Error::Infeasible(_) | Error::Destabilizing(_) | Error::UnstableController(_) | Error::BezoutResidual { .. } => 3,
        Error::Numerical(_) | Error::Solver(_) | Error::NoExcitation(_) | Error::SmallSensitivity(_) => 4,
    }
}

fn load_config(cli: &Cli) -> fdlpv_core::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.paper_scale {
        cfg.apply_full_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> fdlpv_core::Result<commands::Outcome> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Estimate => commands::estimate(&cfg),
        Command::Synthesize { lti } => commands::synthesize(&cfg, *lti),
        Command::Analyze { controller, gamma } => commands::analyze(&cfg, controller.as_deref(), *gamma),
        Command::Simulate { controller } => commands::simulate(&cfg, controller.as_deref()),
        Command::Report { controller } => commands::report(&cfg, controller.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.summary).expect("summary is valid JSON");
            // A closed pipe on stdout is not a failure of the command itself.
            let _ = writeln!(std::io::stdout(), "{text}");
            if outcome.rejected {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
