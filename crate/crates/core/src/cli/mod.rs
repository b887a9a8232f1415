//! Command-line front end.

mod commands;
mod config;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::{Workspace, CHECKPOINT_FILE, METRICS_FILE, TRAIN_REPORT_FILE};
pub use config::{derive_seed, ModelConfig, PathsConfig, RunConfig, SeedStream, SynthConfig, TrainHparams};
pub use store::{read_store, write_store, StoreEntry, StoreIndex, StoredWindow, STORE_BIN, STORE_INDEX};

use crate::data_io::Task;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "ecgvit", version, about = "ECG vision-transformer pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory all stage inputs and outputs live under.
    #[arg(long, global = true, value_name = "PATH", default_value = ".")]
    pub workdir: PathBuf,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// gender | age | id
    #[arg(long, global = true)]
    pub task: Option<Task>,

    /// Override a config value by dotted key, e.g. `train.lr=0.001`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort (CSV files and a manifest).
    Synth,
    /// Filter, resample and window every manifest record.
    Preprocess,
    /// Train a model and keep the best-validation checkpoint.
    Train,
    /// Score the checkpoint on the test split.
    Evaluate,
    /// Attribute class-token attention to ECG intervals.
    Explain,
    /// Print the effective configuration.
    Config,
}

impl Cli {
    pub fn run_config(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut cfg = base.with_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(task) = self.task {
            cfg.task = task;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command and returns its one-line summary.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.run_config()?;
    let ws = Workspace::new(&cli.workdir, &cfg);
    match cli.command {
        Command::Synth => commands::synth(&cfg, &ws),
        Command::Preprocess => commands::preprocess(&cfg, &ws),
        Command::Train => commands::train_cmd(&cfg, &ws),
        Command::Evaluate => commands::evaluate_cmd(&cfg, &ws),
        Command::Explain => commands::explain_cmd(&cfg, &ws),
        Command::Config => cfg.to_json().map(|s| s.trim_end().to_string()),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
