//! `inverse-lmp`: generate market datasets, recover offer prices, and run the
//! robustness and model-mismatch studies.
//!
//! Exit codes: 0 success, 1 infeasible model or solver failure, 2 usage or
//! I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use inverse_lmp::{ExperimentError, GridError, InverseError, MarketError, ScenarioError};

mod config;
mod generate;
mod manifest;
mod mismatch;
mod plot;
mod recover;
mod table3;

#[derive(Parser)]
#[command(name = "inverse-lmp", version, about = "Recover confidential offer prices from published nodal prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear sampled market hours and write observations plus sealed ground truth
    Generate {
        /// TOML or JSON configuration
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the dataset seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover block prices from a generated dataset
    Recover {
        /// Dataset directory written by `generate`
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Norm exponent; overrides the configuration
        #[arg(long)]
        p: Option<f64>,
        /// Accepted for symmetry with the other commands; recovery is deterministic
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Robustness table: both norms under four price-corruption settings
    Table3 {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run a single seed instead of the configured list
        #[arg(long)]
        seed: Option<u64>,
        /// JSON seed list (`{"seeds": [...]}` or a bare array)
        #[arg(long)]
        seeds_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reserve + ramping clearing recovered with the single-hour model
    Mismatch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render CSV files as an SVG line chart or histogram
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Chart type; inferred from the CSV header when omitted
        #[arg(long)]
        kind: Option<PlotKind>,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Line,
    Histogram,
}

/// A malformed invocation or input that no solver was involved in.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Every requested market instance was infeasible.
#[derive(Debug)]
pub struct Infeasible(pub String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

fn market_code(e: &MarketError) -> u8 {
    match e {
        MarketError::Dimension { .. } | MarketError::Config(_) => 2,
        _ => 1,
    }
}

fn scenario_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Market(m) => market_code(m),
        _ => 2,
    }
}

fn inverse_code(e: &InverseError) -> u8 {
    match e {
        InverseError::Lp(_) => 1,
        _ => 2,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Infeasible>() {
            return 1;
        }
        if cause.is::<Usage>()
            || cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<toml::de::Error>()
            || cause.is::<GridError>()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return match e {
                ExperimentError::Grid(_) | ExperimentError::Config(_) => 2,
                ExperimentError::Scenario(s) => scenario_code(s),
                ExperimentError::Market(m) => market_code(m),
                ExperimentError::Inverse(i) => inverse_code(i),
            };
        }
        if let Some(e) = cause.downcast_ref::<ScenarioError>() {
            return scenario_code(e);
        }
        if let Some(e) = cause.downcast_ref::<MarketError>() {
            return market_code(e);
        }
        if let Some(e) = cause.downcast_ref::<InverseError>() {
            return inverse_code(e);
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { config, seed, out } => generate::run(config.as_deref(), seed, &out),
        Command::Recover { data, config, p, seed: _, out } => recover::run(&data, config.as_deref(), p, &out),
        Command::Table3 { config, seed, seeds_file, out } => {
            table3::run(config.as_deref(), seed, seeds_file.as_deref(), &out)
        }
        Command::Mismatch { config, seed, out } => mismatch::run(config.as_deref(), seed, &out),
        Command::Plot { inputs, out, kind, title } => plot::run(&inputs, &out, kind, title.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
