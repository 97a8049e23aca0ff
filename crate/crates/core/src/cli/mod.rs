//! Command-line driver: configuration, study directories and the pipeline
//! stages as subcommands.

mod commands;
mod config;
mod study_dir;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use commands::{
    cmd_ensemble, cmd_evaluate, cmd_features, cmd_fit, cmd_pipeline, cmd_simulate, replication_dir, study_dirs,
    summarize, EnsembleRecord, ScoreRecord, EVALUATION_DIR, FEATURES_DIR, JOINT, SEPARATE,
};
pub use config::{EnsembleSettings, EvaluateSettings, ExperimentConfig, SgmcpSettings, WhiteningMode};
pub use study_dir::{
    edge_list, matrix_csv, read_matrix_csv, read_study, write_study, LoadedStudy, Manifest, ManifestDataset,
    ManifestSubject, FORMAT, MANIFEST,
};

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "DIFFNET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "diffnet", version, about = "Joint differential brain network estimation")]
pub struct Cli {
    /// Experiment configuration (TOML); defaults to the desk-scale profile.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Output / study root directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate simulated studies, one per replication.
    Simulate,
    /// Whiten scans and compute CLIME edge features.
    Features,
    /// Tune the penalty by cross-validation and fit the joint model.
    Fit,
    /// Bootstrap ensembles for the joint (and separate) estimators.
    Ensemble,
    /// Score recovered supports against the simulation truth.
    Evaluate,
    /// Run every stage.
    Pipeline,
    /// Print the default configuration.
    DefaultConfig,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Features => "features",
            Command::Fit => "fit",
            Command::Ensemble => "ensemble",
            Command::Evaluate => "evaluate",
            Command::Pipeline => "pipeline",
            Command::DefaultConfig => "default-config",
        }
    }
}

/// Error record printed on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord<'a> {
    pub status: &'static str,
    pub stage: &'a str,
    pub kind: &'static str,
    pub message: String,
}

impl<'a> ErrorRecord<'a> {
    pub fn new(stage: &'a str, err: &Error) -> Self {
        ErrorRecord {
            status: "error",
            stage,
            kind: err.kind(),
            message: err.to_string(),
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    let config = resolve_config(cli)?;
    if cli.command == Command::DefaultConfig {
        print!("{}", config.to_toml()?);
        return Ok(());
    }
    let root = config
        .out
        .clone()
        .ok_or_else(|| Error::Config("no output directory: pass --out or set `out` in the config".into()))?;
    match cli.command {
        Command::Simulate => cmd_simulate(&config, &root).map(|_| ()),
        Command::Features => cmd_features(&config, &root),
        Command::Fit => cmd_fit(&config, &root),
        Command::Ensemble => cmd_ensemble(&config, &root),
        Command::Evaluate => {
            let rows = cmd_evaluate(&config, &root)?;
            println!("{}", crate::metrics::format_summary(&rows));
            Ok(())
        }
        Command::Pipeline => cmd_pipeline(&config, &root).map(|_| ()),
        Command::DefaultConfig => unreachable!(),
    }
}
