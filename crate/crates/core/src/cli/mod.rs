//! Command-line front end. Every command writes its artifacts into `--out`
//! and finishes with `manifest.json`; a missing manifest means the run failed.

mod ablate;
mod run;
mod spectrum;
mod toysim;
mod train;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use fope::model::ModelError;
use fope::report::Precision;
use fope::tasks::TaskError;

pub use run::Run;

/// Exit code for a run stopped by a non-finite loss.
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "fope", version, about = "Positional-embedding laboratory: spectra, toy attention, tiny transformers")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Output directory for CSV, SVG, checkpoints and the manifest.
    #[arg(long, global = true, default_value = "fope-out")]
    pub out: PathBuf,
    /// Seed for every random choice; overrides seeds in a config file.
    #[arg(long, global = true, env = "FOPE_SEED")]
    pub seed: Option<u64>,
    /// Digits after the decimal point in CSV output (default: shortest round-trip form).
    #[arg(long, global = true)]
    pub precision: Option<usize>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_svg: bool,
}

impl GlobalOpts {
    pub fn precision(&self) -> Precision {
        self.precision.map_or(Precision::RoundTrip, Precision::Digits)
    }

    pub fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Frequency-domain analyses.
    #[command(subcommand)]
    Spectrum(spectrum::SpectrumCmd),
    /// Two-frequency toy attention, or the query/key activation probe.
    Toysim(toysim::ToysimArgs),
    /// Train a tiny transformer on the passkey/Markov mixture.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint.
    #[command(subcommand)]
    Eval(train::EvalCmd),
    /// Sweep embedding variants, QK norm and the FoPE sigma/D axes.
    Ablate(ablate::AblateArgs),
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::Spectrum(cmd) => spectrum::run(cmd, &g),
        Command::Toysim(args) => toysim::run(args, &g),
        Command::Train(args) => train::run_train(args, &g),
        Command::Eval(cmd) => train::run_eval(cmd, &g),
        Command::Ablate(args) => ablate::run(args, &g),
    }
}

/// Step at which training diverged, if that is what `err` reports.
pub fn diverged_step(err: &anyhow::Error) -> Option<usize> {
    err.chain().find_map(|e| match e.downcast_ref::<ModelError>() {
        Some(ModelError::Diverged { step }) => Some(*step),
        _ => match e.downcast_ref::<TaskError>() {
            Some(TaskError::Model(ModelError::Diverged { step })) => Some(*step),
            _ => None,
        },
    })
}
