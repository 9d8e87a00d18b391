//! `gasketlab`: runs gasket experiments and writes CSV/JSON artifacts.
//!
//! Exit status is 0 when every built-in check passes, 1 when a check fails
//! and 2 on usage, configuration or resource-cap errors.

mod config;
mod experiments;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gasket_core::LabError;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "gasketlab", version, about = "Experiments on scale-irregular Sierpinski gaskets")]
struct Cli {
    /// Run the full acceptance suite.
    #[arg(long, global = true)]
    all: bool,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Depth override.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Seed override for randomized steps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "gasketlab-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Graph, form and measure artifacts.
    Build,
    /// Resistance scales, walk dimensions, scale function and regime.
    Scale,
    /// Harmonic extension of unit corner data.
    Harmonic,
    /// Concentration profiles and entropy rates across depths.
    Singularity,
    /// Exit times of the random walk.
    Walk,
    /// Chain metric, midpoints and volume doubling.
    Metric,
    /// Partitions of unity and harmonic approximation.
    Approx,
    /// Heat-kernel envelope fit.
    Hke,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Build => "build",
            Self::Scale => "scale",
            Self::Harmonic => "harmonic",
            Self::Singularity => "singularity",
            Self::Walk => "walk",
            Self::Metric => "metric",
            Self::Approx => "approx",
            Self::Hke => "hke",
        }
    }
}

fn exit_for(error: &anyhow::Error) -> u8 {
    if error.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match error.downcast_ref::<LabError>() {
        Some(
            LabError::ResourceCap(_) | LabError::DepthOutOfRange { .. } | LabError::Overflow(_) | LabError::Domain(_),
        ) => 2,
        _ => 1,
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    match &cli.config {
        Some(path) => ExperimentConfig::resolve(ExperimentConfig::load(path)?, cli.depth, cli.seed),
        None => ExperimentConfig::default_for(cli.depth, cli.seed),
    }
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let config = resolve(cli)?;
    if cli.all {
        let (summary, reports) = experiments::all(&config, &cli.out)?;
        for r in &reports {
            println!("{}", r.line());
        }
        return Ok(summary.passed);
    }
    let Some(command) = cli.command else {
        anyhow::bail!(ConfigError {
            field: "command".into(),
            message: "a subcommand or --all is required".into(),
            location: None,
        });
    };
    let summary = match command {
        Command::Build => experiments::build(&config, &cli.out)?,
        Command::Scale => experiments::scale(&config, &cli.out)?,
        Command::Harmonic => experiments::harmonic(&config, &cli.out)?,
        Command::Singularity => experiments::singularity(&config, &cli.out)?,
        Command::Walk => experiments::walk(&config, &cli.out)?,
        Command::Metric => experiments::metric(&config, &cli.out)?,
        Command::Approx => experiments::approx(&config, &cli.out)?,
        Command::Hke => experiments::hke(&config, &cli.out)?,
    };
    for c in &summary.checks {
        println!("{} {}{}", if c.passed { "ok  " } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) });
    }
    println!("{}: {} ({})", command.name(), if summary.passed { "passed" } else { "failed" }, cli.out.join("summary.json").display());
    Ok(summary.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_for(&e))
        }
    }
}
