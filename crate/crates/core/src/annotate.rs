//! Semi-automatic annotation: split a two-item foreground mask into labeled
//! components, deferring unclear cases to a human review queue.

use crate::raster::{BinaryMask, ClassId, LabelMap};
use serde::Serialize;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("serialization failed: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why an automatic split was declined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReviewReason {
    /// Fewer or more than two components survived the area filter.
    ComponentCount { found: usize },
    /// The two components share the same centroid column, so left and right
    /// are ambiguous.
    CentroidTie,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitOutcome {
    Split(LabelMap),
    NeedsReview(ReviewReason),
}

/// Default minimum component area: 0.1 percent of the image, at least one
/// pixel.
pub fn default_min_area(width: usize, height: usize) -> usize {
    (((width * height) as f64) * 0.001).ceil().max(1.0) as usize
}

fn connected_components(mask: &BinaryMask) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width(), mask.height());
    let mut visited = vec![false; w * h];
    let mut components = Vec::new();
    for start in 0..w * h {
        if visited[start] || !mask.data()[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut pixels = Vec::new();
        visited[start] = true;
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = (i % w, i / w);
            let mut push = |j: usize| {
                if !visited[j] && mask.data()[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
        components.push(pixels);
    }
    components
}

/// Splits a foreground mask known to contain two items. Components below
/// `min_area` pixels are treated as debris and ignored. When exactly two
/// components remain, the one whose centroid lies further left takes
/// `labels.0` and the other takes `labels.1`; sub-threshold debris stays
/// unlabeled. Any other component count, or an exact centroid-column tie,
/// defers to review.
pub fn split_two(
    foreground: &BinaryMask,
    labels: (ClassId, ClassId),
    min_area: usize,
) -> SplitOutcome {
    assert!(labels.0 != labels.1, "the two item labels must differ");
    assert!(min_area >= 1, "minimum area must be at least one pixel");
    let components: Vec<Vec<usize>> = connected_components(foreground)
        .into_iter()
        .filter(|c| c.len() >= min_area)
        .collect();
    if components.len() != 2 {
        return SplitOutcome::NeedsReview(ReviewReason::ComponentCount {
            found: components.len(),
        });
    }
    let column_sum = |pixels: &[usize]| -> u64 {
        pixels.iter().map(|&i| (i % foreground.width()) as u64).sum()
    };
    let (sum_a, count_a) = (column_sum(&components[0]), components[0].len() as u64);
    let (sum_b, count_b) = (column_sum(&components[1]), components[1].len() as u64);
    // Compare mean columns sum_a/count_a vs sum_b/count_b by cross
    // multiplication, keeping the comparison exact in integers.
    let lhs = u128::from(sum_a) * u128::from(count_b);
    let rhs = u128::from(sum_b) * u128::from(count_a);
    if lhs == rhs {
        return SplitOutcome::NeedsReview(ReviewReason::CentroidTie);
    }
    let (left, right) = if lhs < rhs {
        (&components[0], &components[1])
    } else {
        (&components[1], &components[0])
    };
    let mut out = LabelMap::new(foreground.width(), foreground.height());
    for &i in left {
        out.set(i % foreground.width(), i / foreground.width(), labels.0);
    }
    for &i in right {
        out.set(i % foreground.width(), i / foreground.width(), labels.1);
    }
    SplitOutcome::Split(out)
}

/// One mask deferred to human review.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewItem {
    pub source: String,
    pub reason: ReviewReason,
}

/// Collects the review-worthy outcomes in input order.
pub fn review_queue<'a>(
    outcomes: impl IntoIterator<Item = (&'a str, &'a SplitOutcome)>,
) -> Vec<ReviewItem> {
    outcomes
        .into_iter()
        .filter_map(|(source, outcome)| match outcome {
            SplitOutcome::Split(_) => None,
            SplitOutcome::NeedsReview(reason) => {
                Some(ReviewItem { source: source.to_string(), reason: *reason })
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ReviewQueueDoc<'a> {
    format: &'static str,
    items: &'a [ReviewItem],
}

pub fn write_review_queue(
    path: impl AsRef<Path>,
    items: &[ReviewItem],
) -> Result<(), AnnotateError> {
    let doc = ReviewQueueDoc { format: "review-queue-v1", items };
    let mut text =
        serde_json::to_string_pretty(&doc).map_err(|e| AnnotateError::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
