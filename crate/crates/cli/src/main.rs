//! `meed`: train, apply and evaluate instance-wise feature-selection
//! explainers from a run configuration.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 training aborted by a
//! non-finite value, 4 shape mismatch, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Overrides;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<meed::Error> for CliError {
    fn from(e: meed::Error) -> Self {
        let code = match &e {
            meed::Error::Config(_) => 2,
            meed::Error::Divergence { .. } | meed::Error::NonFinite { .. } => 3,
            meed::Error::Shape { .. } => 4,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "meed",
    version,
    about = "Instance-wise feature selection for black-box classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint to resume from (train) or to load (other commands).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of features to select.
    #[arg(long)]
    k: Option<usize>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV dataset replacing the configured data source.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Saved black-box model.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            checkpoint: self.checkpoint.clone(),
            out: self.out.clone(),
            k: self.k,
            seed: self.seed,
            data: self.data.clone(),
            model: self.model.clone(),
        }
    }

    fn config(&self) -> Result<&PathBuf, CliError> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::config("--config is required"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train an explainer; writes checkpoint.bin and train.log.
    Train(Common),
    /// Select features per sample; writes explanations.txt.
    Explain(Common),
    /// Measure fidelity, sensitivity and timing; writes report.txt.
    Evaluate(Common),
    /// Run the randomization tests; writes sanity.txt.
    Sanity(Common),
    /// Train and evaluate the full model and its three ablations.
    Ablate(Common),
    /// Generate the configured synthetic dataset; writes data.csv.
    Synth(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => commands::train(c.config()?, &c.overrides()),
        Command::Explain(c) => commands::explain(c.config.as_deref(), &c.overrides()),
        Command::Evaluate(c) => commands::evaluate_cmd(c.config()?, &c.overrides()),
        Command::Sanity(c) => commands::sanity(c.config()?, &c.overrides()),
        Command::Ablate(c) => commands::ablate(c.config()?, &c.overrides()),
        Command::Synth(c) => commands::synth(c.config()?, &c.overrides()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
