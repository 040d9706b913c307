//! Pixel-level label fusion: per-pixel class tallies over proposal votes and
//! argmax restricted to an expected class set.

use crate::raster::{
    read_pgm16_labels, write_pgm16_labels, BinaryMask, ClassId, LabelMap, RasterError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use thiserror::Error;

const SCORE_FORMAT_TAG: &str = "score-map-v1";

#[derive(Debug, Error)]
pub enum VoteError {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch { expected_w: usize, expected_h: usize, got_w: usize, got_h: usize },
    #[error("expected class {0} has no score plane")]
    UnknownClassInExpected(ClassId),
    #[error("unexpected score file format: {0}")]
    Format(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-pixel vote counts per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyGrid {
    width: usize,
    height: usize,
    cells: Vec<BTreeMap<ClassId, u32>>,
}

impl TallyGrid {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "grid dimensions must be positive");
        TallyGrid { width, height, cells: vec![BTreeMap::new(); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Adds one vote for each label to every pixel of `mask`. Labels carry
    /// multiplicity: a class listed twice contributes two votes.
    pub fn add_votes(&mut self, mask: &BinaryMask, labels: &[ClassId]) -> Result<(), VoteError> {
        if mask.width() != self.width || mask.height() != self.height {
            return Err(VoteError::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: mask.width(),
                got_h: mask.height(),
            });
        }
        for (cell, &inside) in self.cells.iter_mut().zip(mask.data()) {
            if inside {
                for &label in labels {
                    *cell.entry(label).or_insert(0) += 1;
                }
            }
        }
        Ok(())
    }

    pub fn counts(&self, x: usize, y: usize) -> &BTreeMap<ClassId, u32> {
        &self.cells[y * self.width + x]
    }

    /// Adds every count of `other` into this grid.
    fn merge(&mut self, other: TallyGrid) {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        for (mine, theirs) in self.cells.iter_mut().zip(other.cells) {
            for (class, count) in theirs {
                *mine.entry(class).or_insert(0) += count;
            }
        }
    }
}

/// Builds the tally over all proposals and their k-NN labels. Integer count
/// addition commutes, so the parallel reduction is order-independent.
pub fn accumulate(
    width: usize,
    height: usize,
    votes: &[(BinaryMask, Vec<ClassId>)],
) -> Result<TallyGrid, VoteError> {
    for (mask, _) in votes {
        if mask.width() != width || mask.height() != height {
            return Err(VoteError::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                got_w: mask.width(),
                got_h: mask.height(),
            });
        }
    }
    let grid = votes
        .par_iter()
        .fold(
            || TallyGrid::new(width, height),
            |mut grid, (mask, labels)| {
                grid.add_votes(mask, labels).expect("dimensions checked above");
                grid
            },
        )
        .reduce(
            || TallyGrid::new(width, height),
            |mut a, b| {
                a.merge(b);
                a
            },
        );
    Ok(grid)
}

/// Picks the winning class per pixel: the highest vote count among classes in
/// `expected`, ties to the smallest id, and 0 where no expected class got a
/// vote.
pub fn fuse(tally: &TallyGrid, expected: &BTreeSet<ClassId>) -> LabelMap {
    let mut labels = LabelMap::new(tally.width, tally.height);
    for y in 0..tally.height {
        for x in 0..tally.width {
            let mut winner = 0;
            let mut winner_count = 0u32;
            // Ascending id order means a strict comparison keeps the smallest
            // id among equal counts.
            for (&class, &count) in tally.counts(x, y) {
                if expected.contains(&class) && count > winner_count {
                    winner = class;
                    winner_count = count;
                }
            }
            labels.set(x, y, winner);
        }
    }
    labels
}

/// Dense per-class score planes, e.g. softly weighted votes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    planes: BTreeMap<ClassId, Vec<f64>>,
}

impl ScoreMap {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "map dimensions must be positive");
        ScoreMap { width, height, planes: BTreeMap::new() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn insert_plane(&mut self, class: ClassId, scores: Vec<f64>) -> Result<(), VoteError> {
        if scores.len() != self.width * self.height {
            return Err(VoteError::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: scores.len(),
                got_h: 1,
            });
        }
        assert!(scores.iter().all(|s| s.is_finite()), "scores must be finite");
        self.planes.insert(class, scores);
        Ok(())
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.planes.keys().copied()
    }

    pub fn plane(&self, class: ClassId) -> Option<&[f64]> {
        self.planes.get(&class).map(Vec::as_slice)
    }

    pub fn score(&self, class: ClassId, x: usize, y: usize) -> Option<f64> {
        self.planes.get(&class).map(|p| p[y * self.width + x])
    }

    /// Converts a tally into per-class vote-count planes.
    pub fn from_tally(tally: &TallyGrid) -> Self {
        let mut map = ScoreMap::new(tally.width, tally.height);
        let classes: BTreeSet<ClassId> =
            tally.cells.iter().flat_map(|c| c.keys().copied()).collect();
        for class in classes {
            let plane: Vec<f64> = tally
                .cells
                .iter()
                .map(|c| f64::from(c.get(&class).copied().unwrap_or(0)))
                .collect();
            map.planes.insert(class, plane);
        }
        map
    }
}

/// Per-pixel argmax over the expected classes' score planes. Every expected
/// class must have a plane. Ties go to the smallest id; pixels where every
/// expected score is non-positive become 0.
pub fn restricted_argmax(
    scores: &ScoreMap,
    expected: &BTreeSet<ClassId>,
) -> Result<LabelMap, VoteError> {
    for &class in expected {
        if !scores.planes.contains_key(&class) {
            return Err(VoteError::UnknownClassInExpected(class));
        }
    }
    let mut labels = LabelMap::new(scores.width, scores.height);
    for i in 0..scores.width * scores.height {
        let mut winner = 0;
        let mut winner_score = 0.0f64;
        for &class in expected {
            let score = scores.planes[&class][i];
            if score > winner_score {
                winner = class;
                winner_score = score;
            }
        }
        labels.set(i % scores.width, i / scores.width, winner);
    }
    Ok(labels)
}

#[derive(Serialize, Deserialize)]
struct ScorePlaneEntry {
    class_id: ClassId,
    file: String,
    min: f64,
    max: f64,
}

#[derive(Serialize, Deserialize)]
struct ScoreIndexDoc {
    format: String,
    width: usize,
    height: usize,
    planes: Vec<ScorePlaneEntry>,
}

/// Writes each plane as a 16-bit grayscale file with an affine mapping of
/// [min, max] onto the integer range, plus an `index.json` sidecar holding
/// the ranges.
pub fn write_score_dir(dir: impl AsRef<Path>, scores: &ScoreMap) -> Result<(), VoteError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (&class, plane) in &scores.planes {
        let min = plane.iter().copied().fold(f64::INFINITY, f64::min);
        let max = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let quantized: Vec<ClassId> = plane
            .iter()
            .map(|&s| {
                if max > min {
                    ((s - min) / (max - min) * 65535.0).round() as ClassId
                } else {
                    0
                }
            })
            .collect();
        let file = format!("score_{class:04}.pgm");
        write_pgm16_labels(
            dir.join(&file),
            &LabelMap::from_raw(scores.width, scores.height, quantized),
        )?;
        entries.push(ScorePlaneEntry { class_id: class, file, min, max });
    }
    let doc = ScoreIndexDoc {
        format: SCORE_FORMAT_TAG.to_string(),
        width: scores.width,
        height: scores.height,
        planes: entries,
    };
    let mut text =
        serde_json::to_string_pretty(&doc).map_err(|e| VoteError::Format(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join("index.json"), text)?;
    Ok(())
}

/// Reads a score directory written by [`write_score_dir`]. A plane stored
/// with min == max reads back as that constant.
pub fn read_score_dir(dir: impl AsRef<Path>) -> Result<ScoreMap, VoteError> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join("index.json"))?;
    let doc: ScoreIndexDoc =
        serde_json::from_str(&text).map_err(|e| VoteError::Format(e.to_string()))?;
    if doc.format != SCORE_FORMAT_TAG {
        return Err(VoteError::Format(format!(
            "expected format {SCORE_FORMAT_TAG:?}, got {:?}",
            doc.format
        )));
    }
    let mut scores = ScoreMap::new(doc.width, doc.height);
    for entry in doc.planes {
        let raw = read_pgm16_labels(dir.join(&entry.file))?;
        if raw.width() != doc.width || raw.height() != doc.height {
            return Err(VoteError::DimensionMismatch {
                expected_w: doc.width,
                expected_h: doc.height,
                got_w: raw.width(),
                got_h: raw.height(),
            });
        }
        let span = entry.max - entry.min;
        let plane: Vec<f64> = raw
            .data()
            .iter()
            .map(|&q| entry.min + f64::from(q) / 65535.0 * span)
            .collect();
        scores.insert_plane(entry.class_id, plane)?;
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(width: usize, height: usize, pixels: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::new(width, height);
        for &(x, y) in pixels {
            m.set(x, y, true);
        }
        m
    }

    #[test]
    fn votes_accumulate_with_multiplicity() {
        let votes = vec![
            (mask(3, 1, &[(0, 0), (1, 0)]), vec![4, 4, 9]),
            (mask(3, 1, &[(1, 0)]), vec![9]),
        ];
        let tally = accumulate(3, 1, &votes).unwrap();
        assert_eq!(tally.counts(0, 0).get(&4), Some(&2), "class listed twice counts twice");
        assert_eq!(tally.counts(1, 0).get(&9), Some(&2));
        assert!(tally.counts(2, 0).is_empty());
    }

    #[test]
    fn fuse_filters_ties_and_defaults() {
        let votes = vec![
            (mask(4, 1, &[(0, 0)]), vec![5, 5]),
            (mask(4, 1, &[(1, 0)]), vec![3, 7]),
            (mask(4, 1, &[(2, 0)]), vec![8]),
        ];
        let tally = accumulate(4, 1, &votes).unwrap();
        let expected: BTreeSet<ClassId> = [3, 5, 7].into_iter().collect();
        let fused = fuse(&tally, &expected);
        assert_eq!(fused.get(0, 0), 5, "unopposed class wins");
        assert_eq!(fused.get(1, 0), 3, "equal counts pick the smaller id");
        assert_eq!(fused.get(2, 0), 0, "votes only for unexpected classes leave background");
        assert_eq!(fused.get(3, 0), 0, "no votes at all leave background");
    }

    #[test]
    fn accumulate_rejects_wrong_mask_size() {
        let votes = vec![(mask(2, 2, &[(0, 0)]), vec![1])];
        assert!(matches!(
            accumulate(3, 2, &votes),
            Err(VoteError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn restricted_argmax_picks_smallest_id_on_ties() {
        let mut scores = ScoreMap::new(2, 1);
        scores.insert_plane(2, vec![0.5, 0.0]).unwrap();
        scores.insert_plane(6, vec![0.5, -0.1]).unwrap();
        let expected: BTreeSet<ClassId> = [2, 6].into_iter().collect();
        let labels = restricted_argmax(&scores, &expected).unwrap();
        assert_eq!(labels.get(0, 0), 2, "tie goes to the smaller id");
        assert_eq!(labels.get(1, 0), 0, "non-positive scores leave background");
    }

    #[test]
    fn restricted_argmax_ignores_unlisted_planes() {
        let mut scores = ScoreMap::new(1, 1);
        scores.insert_plane(1, vec![0.2]).unwrap();
        scores.insert_plane(9, vec![5.0]).unwrap();
        let expected: BTreeSet<ClassId> = [1].into_iter().collect();
        let labels = restricted_argmax(&scores, &expected).unwrap();
        assert_eq!(labels.get(0, 0), 1, "the dominant class 9 is not expected");
    }

    #[test]
    fn restricted_argmax_requires_planes_for_expected() {
        let scores = ScoreMap::new(1, 1);
        let expected: BTreeSet<ClassId> = [4].into_iter().collect();
        assert!(matches!(
            restricted_argmax(&scores, &expected),
            Err(VoteError::UnknownClassInExpected(4))
        ));
    }

    #[test]
    fn score_dir_round_trip_quantizes_within_half_step() {
        let dir = tempfile::tempdir().unwrap();
        let mut scores = ScoreMap::new(2, 2);
        scores.insert_plane(3, vec![-1.0, 0.0, 2.5, 7.0]).unwrap();
        scores.insert_plane(8, vec![4.0, 4.0, 4.0, 4.0]).unwrap();
        write_score_dir(dir.path(), &scores).unwrap();
        let back = read_score_dir(dir.path()).unwrap();
        let classes: Vec<ClassId> = back.classes().collect();
        assert_eq!(classes, vec![3, 8]);
        for (orig, read) in scores.plane(3).unwrap().iter().zip(back.plane(3).unwrap()) {
            let step = 8.0 / 65535.0;
            assert!((orig - read).abs() <= step / 2.0 + 1e-12, "{orig} vs {read}");
        }
        assert_eq!(back.plane(8).unwrap(), &[4.0; 4], "constant plane reads back exactly");
    }

    #[test]
    fn fuse_and_argmax_agree_on_count_scores() {
        let votes = vec![
            (mask(3, 2, &[(0, 0), (1, 0), (2, 1)]), vec![1, 2]),
            (mask(3, 2, &[(1, 0), (2, 1)]), vec![2]),
            (mask(3, 2, &[(0, 1)]), vec![1, 1, 2]),
        ];
        let tally = accumulate(3, 2, &votes).unwrap();
        let expected: BTreeSet<ClassId> = [1, 2].into_iter().collect();
        let fused = fuse(&tally, &expected);
        let argmaxed = restricted_argmax(&ScoreMap::from_tally(&tally), &expected).unwrap();
        assert_eq!(fused, argmaxed, "integer tallies and score planes must agree");
    }

    proptest! {
        #[test]
        fn accumulate_is_deterministic_and_conserves_votes(
            seeds in proptest::collection::vec(
                (proptest::collection::vec(any::<bool>(), 12),
                 proptest::collection::vec(1u32..6, 0..4)),
                0..12,
            ),
        ) {
            let votes: Vec<(BinaryMask, Vec<ClassId>)> = seeds
                .into_iter()
                .map(|(bits, labels)| (BinaryMask::from_raw(4, 3, bits), labels))
                .collect();
            let a = accumulate(4, 3, &votes).unwrap();
            let b = accumulate(4, 3, &votes).unwrap();
            prop_assert_eq!(&a, &b, "parallel reduction must be deterministic");

            let expected_total: u64 = votes
                .iter()
                .map(|(m, l)| (m.area() * l.len()) as u64)
                .sum();
            let got_total: u64 = (0..3)
                .flat_map(|y| (0..4).map(move |x| (x, y)))
                .map(|(x, y)| a.counts(x, y).values().map(|&c| u64::from(c)).sum::<u64>())
                .sum();
            prop_assert_eq!(expected_total, got_total, "every vote lands exactly once");
        }
    }
}
