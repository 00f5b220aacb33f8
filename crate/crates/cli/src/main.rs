//! Batch front end: parse an experiment config, run the engines, write
//! CSV/JSON artifacts with reproducibility metadata.
//!
//! Exit codes: 0 success, 2 config error, 3 numeric error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad config, bad arguments, unusable paths.
    Config(String),
    /// A numeric engine failed (non-convergent quadrature, stuck sampler).
    Numeric(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<ruintail::Error> for CliError {
    fn from(e: ruintail::Error) -> Self {
        match e {
            ruintail::Error::QuadratureNonConvergence { .. }
            | ruintail::Error::SamplerStuck { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "ruintail",
    version,
    about = "Product-tail and finite-time ruin-probability experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON, one experiment per file).
    #[arg(long)]
    config: PathBuf,
    /// Output path; overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate product-tail curves (integral / exact / Monte Carlo).
    ProductTail(CommonArgs),
    /// Compare Monte Carlo ruin estimates with the tail-sum approximation.
    Ruin {
        #[command(flatten)]
        common: CommonArgs,
        /// Parallel chunk count; overrides `chunks` from the config.
        #[arg(long)]
        chunks: Option<u32>,
    },
    /// Run tail-class and tail-domination probes.
    Verify(CommonArgs),
    /// Check a dependence model against its marginals.
    ValidateModel(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ProductTail(common) => commands::product_tail(common),
        Command::Ruin { common, chunks } => commands::ruin(common, *chunks),
        Command::Verify(common) => commands::verify(common),
        Command::ValidateModel(common) => commands::validate_model(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
