//! JSON config file with one optional section per subcommand. Every field is
//! optional; command-line flags override whatever the file provides.

use anyhow::{Context, Result};
use segmeld_core::embed::LossConfig;
use segmeld_core::raster::{ClassId, ShapeKind};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub gen_synth: Option<GenSynthSection>,
    pub train: Option<TrainSection>,
    pub enroll: Option<EnrollSection>,
    pub segment: Option<SegmentSection>,
    pub fuse_scores: Option<FuseScoresSection>,
    pub evaluate: Option<EvaluateSection>,
    pub annotate: Option<AnnotateSection>,
}

impl FileConfig {
    /// Loads the file when a path is given, otherwise an empty config.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub min_items: Option<usize>,
    pub max_items: Option<usize>,
    pub shapes: Option<Vec<ShapeKind>>,
    pub colors: Option<BTreeMap<ClassId, [u8; 3]>>,
    pub noise: Option<f64>,
    pub allow_occlusion: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSynthSection {
    pub out_dir: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    /// Scenes per manifest; with a sweep, per item count.
    pub scenes: Option<usize>,
    pub seed: Option<u64>,
    /// When set, fixes the item count to each listed value in turn and
    /// writes one manifest per count.
    pub sweep_item_counts: Option<Vec<usize>>,
    pub scene: Option<SceneSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub triplet_margin: Option<f64>,
    pub global_margin: Option<f64>,
    pub separation_weight: Option<f64>,
    pub combination_weight: Option<f64>,
}

impl LossSection {
    pub fn resolve(&self) -> LossConfig {
        let defaults = LossConfig::default();
        LossConfig {
            triplet_margin: self.triplet_margin.unwrap_or(defaults.triplet_margin),
            global_margin: self.global_margin.unwrap_or(defaults.global_margin),
            separation_weight: self.separation_weight.unwrap_or(defaults.separation_weight),
            combination_weight: self
                .combination_weight
                .unwrap_or(defaults.combination_weight),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub data_dir: Option<PathBuf>,
    pub out_net: Option<PathBuf>,
    /// Defaults to the net path with a `.loss.csv` suffix.
    pub loss_csv: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub triplet_budget: Option<usize>,
    pub batch_size: Option<usize>,
    pub initial_lr: Option<f64>,
    pub lr_halving_period: Option<usize>,
    pub weight_decay: Option<f64>,
    pub seed: Option<u64>,
    pub hidden_dims: Option<Vec<usize>>,
    pub embedding_dim: Option<usize>,
    pub layer_lr_multipliers: Option<Vec<f64>>,
    /// Also learn the background as its own class from unlabeled pixels.
    pub include_background: Option<bool>,
    pub loss: Option<LossSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrollSection {
    pub captures_dir: Option<PathBuf>,
    pub net: Option<PathBuf>,
    pub out_gallery: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    pub image: Option<PathBuf>,
    pub boundary: Option<PathBuf>,
    pub net: Option<PathBuf>,
    pub gallery: Option<PathBuf>,
    pub k: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
    pub min_area_fraction: Option<f64>,
    pub max_area_fraction: Option<f64>,
    /// Classes eligible to win votes. Defaults to every enrolled class.
    pub expected: Option<Vec<ClassId>>,
    pub out: Option<PathBuf>,
    pub dump_proposals: Option<PathBuf>,
    pub scores_out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseScoresSection {
    pub scores_dir: Option<PathBuf>,
    /// Defaults to every class with a score plane.
    pub expected: Option<Vec<ClassId>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub pred_dir: Option<PathBuf>,
    pub gt_dir: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Scene manifest supplying per-image item counts; without it the count
    /// falls back to the number of distinct ground-truth classes.
    pub manifest: Option<PathBuf>,
    /// Ground-truth ids to skip, default [0].
    pub ignore: Option<Vec<ClassId>>,
    /// Appearance-count file enabling the per-frequency curve.
    pub appearances: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSection {
    pub masks_dir: Option<PathBuf>,
    /// Task list naming each mask and its two labels. Defaults to
    /// `tasks.json` inside the masks directory.
    pub tasks: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub min_area: Option<usize>,
}

/// Picks the flag value, then the config value, then reports what is missing.
pub fn require<T>(flag: Option<T>, section: Option<T>, what: &str) -> Result<T> {
    flag.or(section)
        .with_context(|| format!("missing {what}: pass the flag or set it in the config file"))
}
