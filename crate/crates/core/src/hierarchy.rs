//! Class-agnostic region proposals: connected components of a boundary map
//! thresholded at increasing strengths, filtered by area and deduplicated.

use crate::raster::{write_pgm16_mask, BinaryMask, BoundaryMap, RasterError};
use serde::Serialize;
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// One candidate region: its pixel mask, the threshold where it first
/// appeared, and its pixel area.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionProposal {
    pub mask: BinaryMask,
    pub threshold: f64,
    pub area: usize,
}

/// Threshold ladder and relative area bounds for proposal extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    thresholds: Vec<f64>,
    min_area_fraction: f64,
    max_area_fraction: f64,
}

impl HierarchyConfig {
    /// Builds a config after sorting `thresholds` ascending. Thresholds must
    /// be distinct and inside (0, 1]; area fractions must satisfy
    /// 0 < min < max <= 1.
    pub fn new(
        mut thresholds: Vec<f64>,
        min_area_fraction: f64,
        max_area_fraction: f64,
    ) -> Result<Self, HierarchyError> {
        if thresholds.is_empty() {
            return Err(HierarchyError::InvalidConfig("empty threshold list".into()));
        }
        if thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(HierarchyError::InvalidConfig(
                "thresholds must lie in (0, 1]".into(),
            ));
        }
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if thresholds.windows(2).any(|w| w[0] == w[1]) {
            return Err(HierarchyError::InvalidConfig("duplicate thresholds".into()));
        }
        if !(min_area_fraction > 0.0
            && min_area_fraction < max_area_fraction
            && max_area_fraction <= 1.0)
        {
            return Err(HierarchyError::InvalidConfig(format!(
                "area fractions must satisfy 0 < {min_area_fraction} < {max_area_fraction} <= 1"
            )));
        }
        Ok(HierarchyConfig { thresholds, min_area_fraction, max_area_fraction })
    }

    /// Fifteen uniformly spaced thresholds spanning [0.05, 0.95].
    pub fn default_thresholds() -> Vec<f64> {
        (0..15).map(|i| 0.05 + i as f64 * (0.90 / 14.0)).collect()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn min_area_fraction(&self) -> f64 {
        self.min_area_fraction
    }

    pub fn max_area_fraction(&self) -> f64 {
        self.max_area_fraction
    }
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            thresholds: Self::default_thresholds(),
            min_area_fraction: 0.001,
            max_area_fraction: 0.5,
        }
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Edge between 4-adjacent pixels, weighted by the stronger endpoint.
fn adjacency_edges(map: &BoundaryMap) -> Vec<(f64, usize, usize)> {
    let (w, h) = (map.width(), map.height());
    let mut edges = Vec::with_capacity(2 * w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                edges.push((map.get(x, y).max(map.get(x + 1, y)), i, i + 1));
            }
            if y + 1 < h {
                edges.push((map.get(x, y).max(map.get(x, y + 1)), i, i + w));
            }
        }
    }
    edges
}

/// Converts union-find state into per-component pixel lists, ordered by each
/// component's first pixel in scan order. Pixel lists are ascending.
fn component_pixel_lists(sets: &mut DisjointSets, n: usize) -> Vec<Vec<usize>> {
    let mut root_slot: HashMap<usize, usize> = HashMap::new();
    let mut lists: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = sets.find(i);
        let slot = *root_slot.entry(root).or_insert_with(|| {
            lists.push(Vec::new());
            lists.len() - 1
        });
        lists[slot].push(i);
    }
    lists
}

fn pixels_to_mask(pixels: &[usize], width: usize, height: usize) -> BinaryMask {
    let mut data = vec![false; width * height];
    for &i in pixels {
        data[i] = true;
    }
    BinaryMask::from_raw(width, height, data)
}

/// Connected components of the graph where 4-adjacent pixels join when the
/// stronger of their boundary values is below `threshold`. Requires
/// `threshold` in (0, 1]. Components are returned in scan order of their
/// first pixel.
pub fn regions_at_threshold(map: &BoundaryMap, threshold: f64) -> Vec<RegionProposal> {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "threshold {threshold} outside (0, 1]"
    );
    let mut sets = DisjointSets::new(map.width() * map.height());
    for (strength, a, b) in adjacency_edges(map) {
        if strength < threshold {
            sets.union(a, b);
        }
    }
    component_pixel_lists(&mut sets, map.width() * map.height())
        .into_iter()
        .map(|pixels| RegionProposal {
            area: pixels.len(),
            mask: pixels_to_mask(&pixels, map.width(), map.height()),
            threshold,
        })
        .collect()
}

/// Runs the full threshold ladder, keeping regions whose area fraction lies
/// inside [min, max] (strict rejection outside) and dropping pixel-identical
/// duplicates in favor of their lowest threshold.
pub fn extract_proposals(map: &BoundaryMap, config: &HierarchyConfig) -> Vec<RegionProposal> {
    let n = map.width() * map.height();
    let total = n as f64;
    let mut edges = adjacency_edges(map);
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut sets = DisjointSets::new(n);
    let mut next_edge = 0;
    let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
    let mut proposals = Vec::new();
    for &threshold in config.thresholds() {
        while next_edge < edges.len() && edges[next_edge].0 < threshold {
            let (_, a, b) = edges[next_edge];
            sets.union(a, b);
            next_edge += 1;
        }
        for pixels in component_pixel_lists(&mut sets, n) {
            let area = pixels.len();
            let fraction = area as f64 / total;
            if fraction < config.min_area_fraction() || fraction > config.max_area_fraction() {
                continue;
            }
            if seen.contains_key(&pixels) {
                continue;
            }
            let mask = pixels_to_mask(&pixels, map.width(), map.height());
            seen.insert(pixels, ());
            proposals.push(RegionProposal { mask, threshold, area });
        }
    }
    proposals
}

#[derive(Serialize)]
struct ProposalIndexEntry {
    file: String,
    threshold: f64,
    area: usize,
}

#[derive(Serialize)]
struct ProposalIndexDoc {
    format: &'static str,
    proposals: Vec<ProposalIndexEntry>,
}

/// Writes each proposal mask as `proposal_NNNN.pgm` plus an `index.json`
/// recording thresholds and areas.
pub fn export_proposals(dir: impl AsRef<Path>, proposals: &[RegionProposal]) -> Result<(), RasterError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(proposals.len());
    for (i, proposal) in proposals.iter().enumerate() {
        let file = format!("proposal_{i:04}.pgm");
        write_pgm16_mask(dir.join(&file), &proposal.mask)?;
        entries.push(ProposalIndexEntry {
            file,
            threshold: proposal.threshold,
            area: proposal.area,
        });
    }
    let doc = ProposalIndexDoc { format: "proposal-index-v1", proposals: entries };
    let mut text =
        serde_json::to_string_pretty(&doc).map_err(|e| RasterError::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(dir.join("index.json"), text)?;
    Ok(())
}
