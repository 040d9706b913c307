//! annotate: split two-item masks into labeled maps, queueing unclear ones
//! for review.

use crate::config::{require, AnnotateSection};
use crate::manifest::AnnotationTasks;
use anyhow::{Context, Result};
use segmeld_core::annotate::{
    default_min_area, review_queue, split_two, write_review_queue, SplitOutcome,
};
use segmeld_core::raster::{read_pgm16_mask, write_pgm16_labels};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory holding the foreground masks.
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Task list naming each mask and its two labels. Defaults to tasks.json
    /// inside the masks directory.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Output directory for label maps and the review queue.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Minimum component area in pixels; smaller blobs are debris. Defaults
    /// to 0.1 percent of each mask.
    #[arg(long)]
    min_area: Option<usize>,
}

pub fn run(args: Args, section: AnnotateSection) -> Result<()> {
    let masks_dir = require(args.masks, section.masks_dir, "mask directory (--masks)")?;
    let out_dir = require(args.out, section.out_dir, "output directory (--out)")?;
    let tasks_path = args
        .tasks
        .or(section.tasks)
        .unwrap_or_else(|| masks_dir.join("tasks.json"));
    let min_area_override = args.min_area.or(section.min_area);

    let tasks = AnnotationTasks::load(&tasks_path)?;
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let mut outcomes: Vec<(String, SplitOutcome)> = Vec::with_capacity(tasks.tasks.len());
    let mut split_count = 0usize;
    for task in &tasks.tasks {
        let mask_path = masks_dir.join(&task.mask);
        let mask = read_pgm16_mask(&mask_path)
            .with_context(|| format!("reading mask {}", mask_path.display()))?;
        let min_area =
            min_area_override.unwrap_or_else(|| default_min_area(mask.width(), mask.height()));
        let outcome = split_two(&mask, (task.labels[0], task.labels[1]), min_area);
        if let SplitOutcome::Split(labels) = &outcome {
            let stem = Path::new(&task.mask)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| task.mask.clone());
            write_pgm16_labels(out_dir.join(format!("{stem}_labels.pgm")), labels)
                .with_context(|| format!("writing labels for {}", task.mask))?;
            split_count += 1;
        }
        outcomes.push((task.mask.clone(), outcome));
    }

    let queue = review_queue(outcomes.iter().map(|(s, o)| (s.as_str(), o)));
    write_review_queue(out_dir.join("review_queue.json"), &queue)?;
    println!("split {split_count} of {} masks, {} queued for review", tasks.tasks.len(), queue.len());
    Ok(())
}
