//! JSON manifests tying scene, capture, and annotation files together.

use anyhow::{bail, Context, Result};
use segmeld_core::raster::ClassId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const SCENE_FORMAT: &str = "scene-manifest-v1";
pub const CAPTURE_FORMAT: &str = "captures-manifest-v1";
pub const TASKS_FORMAT: &str = "annotation-tasks-v1";
pub const APPEARANCES_FORMAT: &str = "appearance-counts-v1";

fn load_tagged<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn save_pretty<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn check_format(got: &str, want: &str, path: &Path) -> Result<()> {
    if got != want {
        bail!("{} declares format {got:?}, expected {want:?}", path.display());
    }
    Ok(())
}

/// One generated scene and its ground-truth files, relative to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneEntry {
    pub image: String,
    pub labels: String,
    pub boundary: String,
    pub present: Vec<ClassId>,
    pub item_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneManifest {
    pub format: String,
    pub seed: u64,
    pub scenes: Vec<SceneEntry>,
}

impl SceneManifest {
    pub fn new(seed: u64) -> Self {
        SceneManifest { format: SCENE_FORMAT.to_string(), seed, scenes: Vec::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: Self = load_tagged(path)?;
        check_format(&doc.format, SCENE_FORMAT, path)?;
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_pretty(path, self)
    }
}

/// One enrollment view: an image, the item's mask, and its class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureEntry {
    pub image: String,
    pub mask: String,
    pub class_id: ClassId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureManifest {
    pub format: String,
    pub captures: Vec<CaptureEntry>,
}

impl CaptureManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let doc: Self = load_tagged(path)?;
        check_format(&doc.format, CAPTURE_FORMAT, path)?;
        Ok(doc)
    }
}

/// One two-item mask to split, with its left and right class labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub mask: String,
    pub labels: [ClassId; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationTasks {
    pub format: String,
    pub tasks: Vec<AnnotationTask>,
}

impl AnnotationTasks {
    pub fn load(path: &Path) -> Result<Self> {
        let doc: Self = load_tagged(path)?;
        check_format(&doc.format, TASKS_FORMAT, path)?;
        Ok(doc)
    }
}

/// How many times each class appears across a dataset, for the frequency
/// curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppearanceCounts {
    pub format: String,
    pub counts: BTreeMap<ClassId, u32>,
}

impl AppearanceCounts {
    pub fn load(path: &Path) -> Result<Self> {
        let doc: Self = load_tagged(path)?;
        check_format(&doc.format, APPEARANCES_FORMAT, path)?;
        Ok(doc)
    }
}
