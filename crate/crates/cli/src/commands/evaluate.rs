//! evaluate: score predicted label maps against ground truth.

use crate::config::{require, EvaluateSection};
use crate::manifest::{AppearanceCounts, SceneManifest};
use anyhow::{bail, Context, Result};
use segmeld_core::evalkit::{
    clutter_curve, frequency_curve, report, write_curve_csv, write_report_csv,
    write_summary_json,
};
use segmeld_core::raster::{read_pgm16_labels, ClassId, ClassRegistry, LabelMap};
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of predicted label maps (*.pgm).
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Directory of ground-truth label maps with matching file names.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Class registry naming every evaluated class.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Output directory for report.csv, summary.json, and curves.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scene manifest supplying per-image item counts.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Comma-separated ground-truth ids to skip. Defaults to 0.
    #[arg(long, value_delimiter = ',')]
    ignore: Option<Vec<ClassId>>,
    /// Appearance-count file enabling the per-frequency curve.
    #[arg(long)]
    appearances: Option<PathBuf>,
}

/// Sorted *.pgm file names directly inside `dir`. Used when no manifest
/// narrows the list, so the directory must hold label maps only.
fn pgm_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && name.ends_with(".pgm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

pub fn run(args: Args, section: EvaluateSection) -> Result<()> {
    let pred_dir = require(args.pred, section.pred_dir, "prediction directory (--pred)")?;
    let gt_dir = require(args.gt, section.gt_dir, "ground-truth directory (--gt)")?;
    let registry_path = require(args.registry, section.registry, "class registry (--registry)")?;
    let out_dir = require(args.out, section.out_dir, "output directory (--out)")?;
    let manifest_path = args.manifest.or(section.manifest);
    let appearances_path = args.appearances.or(section.appearances);
    let ignore: BTreeSet<ClassId> = args
        .ignore
        .or(section.ignore)
        .unwrap_or_else(|| vec![0])
        .into_iter()
        .collect();

    let registry = ClassRegistry::from_json_file(&registry_path)
        .with_context(|| format!("reading registry {}", registry_path.display()))?;

    // With a manifest its entries name the ground-truth files and carry the
    // item counts; without one every *.pgm in the ground-truth directory is a
    // label map and the count falls back to the distinct classes per scene.
    let pairs: Vec<(String, Option<usize>)> = match &manifest_path {
        Some(path) => SceneManifest::load(path)?
            .scenes
            .iter()
            .map(|s| (file_name(&s.labels), Some(s.item_count)))
            .collect(),
        None => pgm_names(&gt_dir)?.into_iter().map(|name| (name, None)).collect(),
    };
    if pairs.is_empty() {
        bail!("no ground-truth label maps found under {}", gt_dir.display());
    }
    let pred_names: BTreeSet<String> = pgm_names(&pred_dir)?.into_iter().collect();
    for (name, _) in &pairs {
        if !pred_names.contains(name) {
            bail!("{} has no prediction named {name}", pred_dir.display());
        }
    }

    let mut preds = Vec::with_capacity(pairs.len());
    let mut gts = Vec::with_capacity(pairs.len());
    let mut item_counts = Vec::with_capacity(pairs.len());
    for (name, manifest_count) in &pairs {
        let gt: LabelMap = read_pgm16_labels(gt_dir.join(name))
            .with_context(|| format!("reading ground truth {name}"))?;
        let pred = read_pgm16_labels(pred_dir.join(name))
            .with_context(|| format!("reading prediction {name}"))?;
        let count = manifest_count.unwrap_or_else(|| gt.class_ids().len());
        preds.push(pred);
        gts.push(gt);
        item_counts.push(count);
    }

    let rep = report(&preds, &gts, &item_counts, &registry, &ignore)?;

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    write_report_csv(out_dir.join("report.csv"), &rep)?;
    write_summary_json(out_dir.join("summary.json"), &rep)?;
    write_curve_csv(out_dir.join("clutter_curve.csv"), "item_count", &clutter_curve(&rep))?;
    if let Some(path) = appearances_path {
        let appearances = AppearanceCounts::load(&path)?;
        let curve = frequency_curve(&rep, &appearances.counts)?;
        write_curve_csv(out_dir.join("frequency_curve.csv"), "appearances", &curve)?;
    }

    println!("evaluated {} scenes: mean F0.5 = {:.4}", pairs.len(), rep.mean_f05);
    Ok(())
}

fn file_name(path: &str) -> String {
    Path::new(path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}
