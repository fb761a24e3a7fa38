//! Benchmark harness for magnet-temperature estimation from drive signals:
//! tune, train, evaluate, learn curves, PCA inspection, dataset synthesis
//! and streaming inference, all driven by one JSON config.

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "rotortemp",
    about = "Supervised magnet-temperature estimation benchmark",
    version
)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: config `out_dir` or ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bayesian hyperparameter search against the CV mean MSE.
    Tune,
    /// Fit the configured model and score it on the test profiles.
    Train,
    /// Score an existing model artifact on the configured dataset.
    Eval {
        /// Model artifact (JSON) produced by `train`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Test error against growing training-set fractions.
    Learncurve,
    /// Two-component PCA projection of the feature matrix.
    Pca,
    /// Streaming inference: CSV rows on stdin, `index,pm_hat` on stdout.
    Infer {
        /// Model artifact (JSON) produced by `train`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Collate per-model metrics into the benchmark table.
    Report {
        /// Results directory (defaults to the output directory).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Generate a synthetic RC-network dataset CSV.
    Synth,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .context("this command needs --config <file>")?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Tune => commands::cmd_tune(&load_config(&cli)?, cli.out.as_deref()),
        Command::Train => commands::cmd_train(&load_config(&cli)?, cli.out.as_deref()),
        Command::Eval { model } => {
            commands::cmd_eval(&load_config(&cli)?, model, cli.out.as_deref())
        }
        Command::Learncurve => commands::cmd_learncurve(&load_config(&cli)?, cli.out.as_deref()),
        Command::Pca => commands::cmd_pca(&load_config(&cli)?, cli.out.as_deref()),
        Command::Infer { model } => commands::cmd_infer(model),
        Command::Report { dir } => {
            let dir = match (dir, &cli.out, cli.config.as_ref()) {
                (Some(d), _, _) => d.clone(),
                (None, Some(o), _) => o.clone(),
                (None, None, Some(cfg)) => commands::out_dir(&ExperimentConfig::load(cfg)?, None),
                (None, None, None) => PathBuf::from("runs"),
            };
            commands::cmd_report(&dir)
        }
        Command::Synth => commands::cmd_synth(&load_config(&cli)?, cli.out.as_deref()),
    }
}
