//! Command-line interface: one subcommand per pipeline stage.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::Result;
use crate::pipeline;

/// Offline/online recommender evaluation laboratory.
#[derive(Debug, Parser)]
#[command(name = "reclab", version, about)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "reclab.toml")]
    pub config: PathBuf,

    /// Output directory (overrides paths.out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Master seed (overrides the config value).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Abort on recoverable input problems instead of counting them.
    #[arg(long, global = true)]
    pub strict: bool,

    /// Comma-separated metric names for pareto/select (overrides config).
    #[arg(long, global = true)]
    pub metrics: Option<String>,

    /// Relative closeness tolerance for candidate selection.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Candidate budget for selection.
    #[arg(long, global = true)]
    pub budget: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Load (or synthesize) the corpus, filter users, split train/test.
    Ingest,
    /// Train the embedding bases and the content-based matrix.
    Train,
    /// Evaluate the full variant grid on the 18 offline metrics.
    EvalOffline,
    /// Metric correlation matrices and correlation clusters.
    Correlate,
    /// Extract the Pareto front of the grid.
    Pareto,
    /// Select A/B candidates (best/worst per metric).
    Select,
    /// Simulate the online A/B period against the selected arms.
    SynthOnline,
    /// Compute CTR/VRR per arm and seniority segment.
    EvalOnline,
    /// Fit the offline-to-online meta-predictors and rank the grid.
    PredictOnline,
    /// Join offline, online and predicted tables into summary.csv.
    Report,
    /// Print a fully commented example configuration.
    ExampleConfig,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Train => "train",
            Command::EvalOffline => "eval-offline",
            Command::Correlate => "correlate",
            Command::Pareto => "pareto",
            Command::Select => "select",
            Command::SynthOnline => "synth-online",
            Command::EvalOnline => "eval-online",
            Command::PredictOnline => "predict-online",
            Command::Report => "report",
            Command::ExampleConfig => "example-config",
        }
    }
}

/// Run one subcommand against a loaded configuration.
pub fn run(command: &Command, cfg: &RunConfig) -> Result<pipeline::StageReport> {
    match command {
        Command::Ingest => pipeline::run_ingest(cfg),
        Command::Train => pipeline::run_train(cfg),
        Command::EvalOffline => pipeline::run_eval_offline(cfg),
        Command::Correlate => pipeline::run_correlate(cfg),
        Command::Pareto => pipeline::run_pareto(cfg),
        Command::Select => pipeline::run_select(cfg),
        Command::SynthOnline => pipeline::run_synth_online(cfg),
        Command::EvalOnline => pipeline::run_eval_online(cfg),
        Command::PredictOnline => pipeline::run_predict_online(cfg),
        Command::Report => pipeline::run_report(cfg),
        Command::ExampleConfig => {
            let mut report = pipeline::StageReport::default();
            report.lines.push(crate::config::example_config());
            Ok(report)
        }
    }
}

pub fn overrides_from(cli: &Cli) -> Overrides {
    Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        jobs: cli.jobs,
        strict: if cli.strict { Some(true) } else { None },
        metrics: cli.metrics.clone(),
        tol: cli.tol,
        budget: cli.budget,
    }
}
