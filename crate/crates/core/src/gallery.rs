//! Enrollment gallery: labeled embeddings of known product views, queried by
//! exact k-nearest-neighbor scan.

use crate::embed::{describe_patch, EmbedError, EmbeddingNet, EmbeddingVector};
use crate::raster::{BinaryMask, ClassId, ColorImage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use thiserror::Error;

const FORMAT_TAG: &str = "gallery-v1";

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("gallery holds {size} entries, fewer than k = {k}")]
    GalleryTooSmall { size: usize, k: usize },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unexpected gallery format: {0}")]
    Format(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub class_id: ClassId,
    pub vector: EmbeddingVector,
}

/// Ordered collection of enrolled embeddings. Entry order is enrollment
/// order and breaks distance ties during classification.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gallery {
    entries: Vec<GalleryEntry>,
}

#[derive(Serialize, Deserialize)]
struct GalleryDoc {
    format: String,
    entries: Vec<GalleryEntry>,
}

impl Gallery {
    pub fn new() -> Self {
        Self::default()
    }

    /// Embeds the masked patch with `net` and stores it under `class_id`.
    /// Class 0 is allowed: background views are legitimate gallery content.
    pub fn enroll(
        &mut self,
        image: &ColorImage,
        mask: &BinaryMask,
        class_id: ClassId,
        net: &EmbeddingNet,
    ) -> Result<(), GalleryError> {
        let descriptor = describe_patch(image, mask)?;
        let vector = net.forward(descriptor.values())?;
        self.enroll_vector(class_id, vector)
    }

    pub fn enroll_vector(
        &mut self,
        class_id: ClassId,
        vector: EmbeddingVector,
    ) -> Result<(), GalleryError> {
        if let Some(first) = self.entries.first() {
            if first.vector.dim() != vector.dim() {
                return Err(GalleryError::DimensionMismatch {
                    expected: first.vector.dim(),
                    got: vector.dim(),
                });
            }
        }
        self.entries.push(GalleryEntry { class_id, vector });
        Ok(())
    }

    /// The k nearest entries to `query` by Euclidean distance, ascending,
    /// with exact ties broken by enrollment order. Runs a linear scan with a
    /// bounded insertion buffer rather than a full sort.
    pub fn classify(
        &self,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<(ClassId, f64)>, GalleryError> {
        assert!(k >= 1, "k must be at least 1");
        if self.entries.len() < k {
            return Err(GalleryError::GalleryTooSmall { size: self.entries.len(), k });
        }
        if self.entries[0].vector.dim() != query.dim() {
            return Err(GalleryError::DimensionMismatch {
                expected: self.entries[0].vector.dim(),
                got: query.dim(),
            });
        }
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (index, entry) in self.entries.iter().enumerate() {
            let candidate = (entry.vector.distance(query), index);
            if best.len() == k {
                let worst = *best.last().unwrap();
                if (candidate.0, candidate.1) >= (worst.0, worst.1) {
                    continue;
                }
            }
            let at = best.partition_point(|&(d, i)| (d, i) < (candidate.0, candidate.1));
            best.insert(at, candidate);
            best.truncate(k);
        }
        Ok(best
            .into_iter()
            .map(|(distance, index)| (self.entries[index].class_id, distance))
            .collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    /// Distinct enrolled class ids, ascending.
    pub fn class_set(&self) -> BTreeSet<ClassId> {
        self.entries.iter().map(|e| e.class_id).collect()
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<(), GalleryError> {
        let doc = GalleryDoc { format: FORMAT_TAG.to_string(), entries: self.entries.clone() };
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| GalleryError::Format(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, GalleryError> {
        let text = fs::read_to_string(path)?;
        let doc: GalleryDoc =
            serde_json::from_str(&text).map_err(|e| GalleryError::Format(e.to_string()))?;
        if doc.format != FORMAT_TAG {
            return Err(GalleryError::Format(format!(
                "expected format {FORMAT_TAG:?}, got {:?}",
                doc.format
            )));
        }
        let gallery = Gallery { entries: doc.entries };
        if let Some(first) = gallery.entries.first() {
            if gallery.entries.iter().any(|e| e.vector.dim() != first.vector.dim()) {
                return Err(GalleryError::Format("mixed embedding dimensions".into()));
            }
        }
        Ok(gallery)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn vector(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec())
    }

    fn abc_gallery() -> Gallery {
        let mut gallery = Gallery::new();
        gallery.enroll_vector(1, vector(&[1.0, 0.0])).unwrap();
        gallery.enroll_vector(2, vector(&[0.0, 1.0])).unwrap();
        gallery.enroll_vector(2, vector(&[0.8, 0.6])).unwrap();
        gallery
    }

    #[test]
    fn classify_orders_by_distance_then_enrollment() {
        let gallery = abc_gallery();
        let hits = gallery.classify(&vector(&[0.1, 0.995]), 3).unwrap();
        let classes: Vec<ClassId> = hits.iter().map(|(c, _)| *c).collect();
        assert_eq!(classes, vec![2, 2, 1], "nearest two are class 2, then class 1");
        assert!(hits[0].1 <= hits[1].1 && hits[1].1 <= hits[2].1);
    }

    #[test]
    fn exact_distance_ties_prefer_earlier_enrollment() {
        let mut gallery = Gallery::new();
        gallery.enroll_vector(7, vector(&[1.0, 0.0])).unwrap();
        gallery.enroll_vector(3, vector(&[1.0, 0.0])).unwrap();
        gallery.enroll_vector(5, vector(&[0.0, 1.0])).unwrap();
        let hits = gallery.classify(&vector(&[1.0, 0.0]), 2).unwrap();
        assert_eq!(hits[0], (7, 0.0), "first enrolled wins the tie");
        assert_eq!(hits[1], (3, 0.0));
    }

    #[test]
    fn small_gallery_is_rejected() {
        let gallery = abc_gallery();
        match gallery.classify(&vector(&[0.0, 0.0]), 4) {
            Err(GalleryError::GalleryTooSmall { size: 3, k: 4 }) => {}
            other => panic!("expected GalleryTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut gallery = abc_gallery();
        assert!(matches!(
            gallery.enroll_vector(1, vector(&[1.0, 0.0, 0.0])),
            Err(GalleryError::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(
            gallery.classify(&vector(&[1.0]), 1),
            Err(GalleryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn background_class_zero_can_be_enrolled() {
        let mut gallery = Gallery::new();
        gallery.enroll_vector(0, vector(&[1.0, 0.0])).unwrap();
        assert_eq!(gallery.classify(&vector(&[1.0, 0.0]), 1).unwrap(), vec![(0, 0.0)]);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("gallery.json");
        let gallery = abc_gallery();
        gallery.to_json_file(&path).unwrap();
        assert_eq!(Gallery::from_json_file(&path).unwrap(), gallery);
    }

    proptest! {
        /// The bounded-buffer scan must agree with a full sort.
        #[test]
        fn classify_matches_full_sort(
            coords in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
            query in (-1.0f64..1.0, -1.0f64..1.0),
            k_seed in 0usize..20,
        ) {
            let mut gallery = Gallery::new();
            for (i, (x, y)) in coords.iter().enumerate() {
                gallery.enroll_vector((i % 5) as ClassId, vector(&[*x, *y])).unwrap();
            }
            let k = k_seed % coords.len() + 1;
            let q = vector(&[query.0, query.1]);
            let got = gallery.classify(&q, k).unwrap();

            let mut all: Vec<(f64, usize)> = gallery
                .entries()
                .iter()
                .enumerate()
                .map(|(i, e)| (e.vector.distance(&q), i))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected: Vec<(ClassId, f64)> = all[..k]
                .iter()
                .map(|&(d, i)| (gallery.entries()[i].class_id, d))
                .collect();
            prop_assert_eq!(got, expected);
        }
    }
}
