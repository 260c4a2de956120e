//! `alphaloop`: command-line workflows over the core library.
//!
//! Every subcommand reads one TOML config, applies command-line overrides,
//! and writes stamped outputs into the output directory.

mod aggregate;
mod attribute;
mod backtest;
mod context;
mod discover;
mod files;
mod ingest;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alphaloop", version, about = "Factor discovery, aggregation and backtesting on daily equity panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the campaign and synthetic-panel seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Split preset name or four comma-separated ISO dates
    /// (is_start, is_end, oos_start, oos_end).
    #[arg(long)]
    pub split: Option<String>,
    /// One-way transaction cost in basis points.
    #[arg(long)]
    pub cost_bps: Option<f64>,
    /// Aggregation model: linear, gbdt or equal.
    #[arg(long)]
    pub model: Option<String>,
    /// Hypothesis-generator endpoint; the bearer token is read from the
    /// ALPHALOOP_LLM_API_KEY environment variable.
    #[arg(long)]
    pub llm_endpoint: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a synthetic panel and benchmark factor file.
    Synth(Common),
    /// Parses and screens the raw panel.
    Ingest(Common),
    /// Runs the discovery campaign on the in-sample window.
    Discover {
        #[command(flatten)]
        common: Common,
        /// Continues from the saved state and log in the output directory.
        #[arg(long, conflicts_with = "replay")]
        resume: bool,
        /// Re-runs the campaign with the proposals recorded in this log.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Out-of-sample factor and composite backtests.
    Backtest(Common),
    /// Walk-forward model aggregation of the factor library.
    Aggregate(Common),
    /// Alpha regressions on benchmark factor models.
    Attribute(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(c) => synth::run(&c),
        Command::Ingest(c) => ingest::run(&c),
        Command::Discover { common, resume, replay } => discover::run(&common, resume, replay.as_deref()),
        Command::Backtest(c) => backtest::run(&c),
        Command::Aggregate(c) => aggregate::run(&c),
        Command::Attribute(c) => attribute::run(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
