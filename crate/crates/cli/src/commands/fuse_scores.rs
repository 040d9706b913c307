//! fuse-scores: turn exported score planes back into a label map.

use crate::config::{require, FuseScoresSection};
use anyhow::{Context, Result};
use segmeld_core::raster::{write_pgm16_labels, ClassId};
use segmeld_core::vote::{read_score_dir, restricted_argmax};
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Score directory written by segment --scores-out.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Comma-separated class ids eligible to win.
    #[arg(long, value_delimiter = ',')]
    expected: Option<Vec<ClassId>>,
    /// Output label map.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, section: FuseScoresSection) -> Result<()> {
    let scores_dir = require(args.scores, section.scores_dir, "score directory (--scores)")?;
    let out_path = require(args.out, section.out, "output label path (--out)")?;

    let scores = read_score_dir(&scores_dir)
        .with_context(|| format!("reading scores {}", scores_dir.display()))?;
    let expected: BTreeSet<ClassId> = args
        .expected
        .or(section.expected)
        .map(|list| list.into_iter().collect())
        .unwrap_or_else(|| scores.classes().collect());

    let labels = restricted_argmax(&scores, &expected)?;
    write_pgm16_labels(&out_path, &labels)
        .with_context(|| format!("writing labels {}", out_path.display()))?;
    println!("fused {} planes into {}", expected.len(), out_path.display());
    Ok(())
}
