//! Pixelwise evaluation: per-class confusion counts, precision-weighted
//! F-scores, and summary curves over scene clutter and class frequency.

use crate::raster::{ClassId, ClassRegistry, LabelMap};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension mismatch: prediction {pred_w}x{pred_h} vs ground truth {gt_w}x{gt_h}")]
    DimensionMismatch { pred_w: usize, pred_h: usize, gt_w: usize, gt_h: usize },
    #[error("input lengths differ: {preds} predictions, {gts} ground truths, {item_counts} item counts")]
    MissingPair { preds: usize, gts: usize, item_counts: usize },
    #[error("class {0} is not covered by the registry or lookup table")]
    UnknownClass(ClassId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Format(String),
}

/// Pixel counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    pub fn iou(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos + self.false_neg)
    }
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// Weighted harmonic mean of precision and recall. Beta below one favors
/// precision; a zero denominator yields zero.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Per-class confusion counts for one prediction against ground truth.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    per_class: BTreeMap<ClassId, Counts>,
}

impl ConfusionCounts {
    pub fn get(&self, class: ClassId) -> Counts {
        self.per_class.get(&class).copied().unwrap_or_default()
    }

    /// Classes with any count, ascending.
    pub fn classes(&self) -> Vec<ClassId> {
        self.per_class.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, Counts)> + '_ {
        self.per_class.iter().map(|(&c, &n)| (c, n))
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (&class, counts) in &other.per_class {
            let mine = self.per_class.entry(class).or_default();
            mine.true_pos += counts.true_pos;
            mine.false_pos += counts.false_pos;
            mine.false_neg += counts.false_neg;
        }
    }
}

/// Compares a prediction with ground truth, skipping pixels whose ground
/// truth label is in `ignore`. Predictions of an ignored label on kept
/// pixels count as misses of the true class but earn no entry of their own.
pub fn confusion(
    pred: &LabelMap,
    gt: &LabelMap,
    ignore: &BTreeSet<ClassId>,
) -> Result<ConfusionCounts, EvalError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(EvalError::DimensionMismatch {
            pred_w: pred.width(),
            pred_h: pred.height(),
            gt_w: gt.width(),
            gt_h: gt.height(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if ignore.contains(&g) {
            continue;
        }
        if p == g {
            counts.per_class.entry(g).or_default().true_pos += 1;
        } else {
            counts.per_class.entry(g).or_default().false_neg += 1;
            if !ignore.contains(&p) {
                counts.per_class.entry(p).or_default().false_pos += 1;
            }
        }
    }
    Ok(counts)
}

/// Metrics of one class on one image.
#[derive(Debug, Clone, Serialize)]
pub struct ClassRow {
    pub class_id: ClassId,
    pub name: String,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    pub f1: f64,
    pub iou: f64,
    /// Whether the class occupies any non-ignored ground-truth pixel.
    pub in_gt: bool,
}

/// Evaluation of one image.
#[derive(Debug, Clone, Serialize)]
pub struct ImageEval {
    pub index: usize,
    pub item_count: usize,
    /// Mean F0.5 over classes present in the ground truth. An image with no
    /// ground-truth classes scores 1.0 when the prediction is also empty and
    /// 0.0 otherwise.
    pub mean_f05: f64,
    pub rows: Vec<ClassRow>,
}

/// Dataset-level micro-averaged metrics of one class.
#[derive(Debug, Clone, Serialize)]
pub struct ClassAggregate {
    pub class_id: ClassId,
    pub name: String,
    pub counts: Counts,
    pub f05: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub images: Vec<ImageEval>,
    /// Mean of the per-image means, each image weighted equally.
    pub mean_f05: f64,
    pub per_class: Vec<ClassAggregate>,
}

fn class_name(registry: &ClassRegistry, class: ClassId) -> Result<String, EvalError> {
    registry
        .name(class)
        .map(str::to_string)
        .ok_or(EvalError::UnknownClass(class))
}

/// Evaluates aligned predictions against ground truths. `item_counts` gives
/// the number of items per scene for the clutter curve. Every non-ignored
/// class encountered must be registered.
pub fn report(
    preds: &[LabelMap],
    gts: &[LabelMap],
    item_counts: &[usize],
    registry: &ClassRegistry,
    ignore: &BTreeSet<ClassId>,
) -> Result<EvalReport, EvalError> {
    if preds.len() != gts.len() || preds.len() != item_counts.len() {
        return Err(EvalError::MissingPair {
            preds: preds.len(),
            gts: gts.len(),
            item_counts: item_counts.len(),
        });
    }
    let confusions: Vec<ConfusionCounts> = preds
        .par_iter()
        .zip(gts)
        .map(|(pred, gt)| confusion(pred, gt, ignore))
        .collect::<Result<_, _>>()?;

    let mut images = Vec::with_capacity(preds.len());
    let mut totals = ConfusionCounts::default();
    for (index, counts) in confusions.iter().enumerate() {
        totals.merge(counts);
        let mut rows = Vec::new();
        for (class, c) in counts.iter() {
            let precision = c.precision();
            let recall = c.recall();
            rows.push(ClassRow {
                class_id: class,
                name: class_name(registry, class)?,
                counts: c,
                precision,
                recall,
                f05: f_beta(precision, recall, 0.5),
                f1: f_beta(precision, recall, 1.0),
                iou: c.iou(),
                in_gt: c.true_pos + c.false_neg > 0,
            });
        }
        let gt_rows: Vec<&ClassRow> = rows.iter().filter(|r| r.in_gt).collect();
        let mean_f05 = if gt_rows.is_empty() {
            if rows.is_empty() {
                1.0
            } else {
                0.0
            }
        } else {
            gt_rows.iter().map(|r| r.f05).sum::<f64>() / gt_rows.len() as f64
        };
        images.push(ImageEval { index, item_count: item_counts[index], mean_f05, rows });
    }

    let mean_f05 = if images.is_empty() {
        0.0
    } else {
        images.iter().map(|i| i.mean_f05).sum::<f64>() / images.len() as f64
    };
    let per_class = totals
        .iter()
        .map(|(class, c)| {
            Ok(ClassAggregate {
                class_id: class,
                name: class_name(registry, class)?,
                counts: c,
                f05: f_beta(c.precision(), c.recall(), 0.5),
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(EvalReport { images, mean_f05, per_class })
}

/// Mean of per-image scores grouped by scene item count, ascending.
pub fn clutter_curve(report: &EvalReport) -> Vec<(usize, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for image in &report.images {
        groups.entry(image.item_count).or_default().push(image.mean_f05);
    }
    groups
        .into_iter()
        .map(|(count, scores)| (count, scores.iter().sum::<f64>() / scores.len() as f64))
        .collect()
}

/// Mean of per-class dataset scores grouped by how often each class appears,
/// ascending by appearance count. Every reported class needs an entry in
/// `appearances`.
pub fn frequency_curve(
    report: &EvalReport,
    appearances: &BTreeMap<ClassId, u32>,
) -> Result<Vec<(u32, f64)>, EvalError> {
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for aggregate in &report.per_class {
        let count = appearances
            .get(&aggregate.class_id)
            .copied()
            .ok_or(EvalError::UnknownClass(aggregate.class_id))?;
        groups.entry(count).or_default().push(aggregate.f05);
    }
    Ok(groups
        .into_iter()
        .map(|(count, scores)| (count, scores.iter().sum::<f64>() / scores.len() as f64))
        .collect())
}

/// Writes one CSV row per image and class.
pub fn write_report_csv(path: impl AsRef<Path>, report: &EvalReport) -> Result<(), EvalError> {
    let mut out = String::from(
        "image,item_count,class_id,class_name,tp,fp,fn,precision,recall,f05,f1,iou,in_gt\n",
    );
    for image in &report.images {
        for row in &image.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
                image.index,
                image.item_count,
                row.class_id,
                row.name,
                row.counts.true_pos,
                row.counts.false_pos,
                row.counts.false_neg,
                row.precision,
                row.recall,
                row.f05,
                row.f1,
                row.iou,
                row.in_gt,
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_summary_json(path: impl AsRef<Path>, report: &EvalReport) -> Result<(), EvalError> {
    let mut text =
        serde_json::to_string_pretty(report).map_err(|e| EvalError::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes an (x, score) curve with a named x column.
pub fn write_curve_csv<X: std::fmt::Display>(
    path: impl AsRef<Path>,
    x_name: &str,
    curve: &[(X, f64)],
) -> Result<(), EvalError> {
    let mut out = format!("{x_name},mean_f05\n");
    for (x, score) in curve {
        out.push_str(&format!("{x},{score:.6}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}
