//! Command-line driver for the segmentation pipeline: scene generation,
//! training, enrollment, segmentation, fusion, evaluation, and annotation.

mod commands;
mod config;
mod manifest;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "segmeld",
    version,
    about = "Desk-scale scene segmentation from boundary proposals and metric embeddings"
)]
struct Cli {
    /// JSON config file with per-subcommand sections. Flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes with aligned ground truth
    GenSynth(commands::gen_synth::Args),
    /// Train the embedding network on labeled scenes
    Train(commands::train::Args),
    /// Build an embedding gallery from labeled captures
    Enroll(commands::enroll::Args),
    /// Segment one scene into per-pixel class labels
    Segment(commands::segment::Args),
    /// Fuse exported score planes into a label map
    FuseScores(commands::fuse_scores::Args),
    /// Score predictions against ground truth
    Evaluate(commands::evaluate::Args),
    /// Split two-item masks into labeled components
    Annotate(commands::annotate::Args),
}

/// Applies the SEGMELD_THREADS cap before any parallel work starts.
fn init_thread_pool() -> Result<()> {
    if let Ok(value) = std::env::var("SEGMELD_THREADS") {
        let threads: usize = value.parse().with_context(|| {
            format!("SEGMELD_THREADS must be a positive integer, got {value:?}")
        })?;
        if threads == 0 {
            bail!("SEGMELD_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to size the thread pool")?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    init_thread_pool()?;
    let file = config::FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenSynth(args) => {
            commands::gen_synth::run(args, file.gen_synth.unwrap_or_default())
        }
        Command::Train(args) => commands::train::run(args, file.train.unwrap_or_default()),
        Command::Enroll(args) => commands::enroll::run(args, file.enroll.unwrap_or_default()),
        Command::Segment(args) => commands::segment::run(args, file.segment.unwrap_or_default()),
        Command::FuseScores(args) => {
            commands::fuse_scores::run(args, file.fuse_scores.unwrap_or_default())
        }
        Command::Evaluate(args) => {
            commands::evaluate::run(args, file.evaluate.unwrap_or_default())
        }
        Command::Annotate(args) => {
            commands::annotate::run(args, file.annotate.unwrap_or_default())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
