mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ClusterFlags, ThresholdFlags};

#[derive(Debug, Parser)]
#[command(name = "walkability", version, about = "Sidewalk walkability features from delivery-robot telemetry")]
struct Cli {
    /// JSON run configuration; flags given on the command line take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split logs into segment traversals and write features.csv and summary.json
    Extract(ExtractArgs),
    /// Correlation, behavioral clustering or regression over features.csv
    Analyze(AnalyzeArgs),
    /// Generate synthetic logs with ground-truth sidecars
    Simulate(SimulateArgs),
    /// Write plot data: fd_scatter.csv and segment_boxes.json
    Report(ReportArgs),
    /// Check logs, a network or a scenario without processing them
    Validate(ValidateArgs),
}

#[derive(Debug, clap::Args)]
pub struct ExtractArgs {
    /// Log files, directories of *.jsonl, glob patterns, or a simulator manifest.json
    pub inputs: Vec<String>,
    /// Network GeoJSON
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Daily weather CSV
    #[arg(long)]
    pub weather: Option<PathBuf>,
    /// Output directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write events.csv and clusters.csv
    #[arg(long)]
    pub dump_events: bool,
    #[command(flatten)]
    pub thresholds: ThresholdFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Correlate,
    Cluster,
    Regress,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub mode: Mode,
    /// Feature table written by `extract`
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Restrict correlation or clustering to these columns (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    #[command(flatten)]
    pub cluster: ClusterFlags,
    /// Regression response column
    #[arg(long)]
    pub response: Option<String>,
    /// Regression predictors (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub predictors: Vec<String>,
    /// Columns log-transformed before scaling (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub log_columns: Option<Vec<String>>,
    /// p-value threshold of the reduced model
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Scenario JSON; the built-in campus scenario when omitted
    pub scenario: Option<PathBuf>,
    /// Generate this many varied trips from the scenario
    #[arg(long)]
    pub fleet: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Network GeoJSON, overriding the scenario's
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Output directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// Feature table written by `extract`
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    /// Log files, directories, globs or a manifest
    pub inputs: Vec<String>,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = config::RunConfig::load(cli.config.as_deref())
        .map_err(commands::Failure::Input)
        .and_then(|cfg| match cli.command {
            Command::Extract(a) => commands::extract(cfg, a),
            Command::Analyze(a) => commands::analyze(cfg, a),
            Command::Simulate(a) => commands::simulate(cfg, a),
            Command::Report(a) => commands::report(cfg, a),
            Command::Validate(a) => commands::validate(cfg, a),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
