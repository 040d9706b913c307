//! Raster primitives shared by the whole pipeline: color images, boundary
//! strength maps, integer label maps, binary masks, and the class registry.

mod netpbm;
mod registry;
mod synth;

pub use netpbm::{
    read_pgm16_boundary, read_pgm16_labels, read_pgm16_mask, read_ppm, write_pgm16_boundary,
    write_pgm16_labels, write_pgm16_mask, write_ppm,
};
pub use registry::ClassRegistry;
pub use synth::{generate_scene, Scene, SceneSpec, ShapeKind, BACKGROUND_COLOR};

use std::collections::BTreeSet;
use thiserror::Error;

/// Integer class identifier. Zero is reserved for background and is never
/// registered as a real class.
pub type ClassId = u32;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("value out of range: {0}")]
    ValueOutOfRange(String),
    #[error("invalid registry: {0}")]
    InvalidRegistry(String),
    #[error("invalid scene spec: {0}")]
    InvalidSceneSpec(String),
    #[error("could not place item {item} without overlap after {attempts} attempts")]
    InfeasiblePlacement { item: usize, attempts: usize },
    #[error("unexpected file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-bit RGB image, row-major, three interleaved channel bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        ColorImage { width, height, data: vec![0; width * height * 3] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        assert_eq!(data.len(), width * height * 3, "payload length mismatch");
        ColorImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Per-pixel boundary strength in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl BoundaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "map dimensions must be positive");
        BoundaryMap { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert!(width >= 1 && height >= 1, "map dimensions must be positive");
        assert_eq!(data.len(), width * height, "payload length mismatch");
        assert!(
            data.iter().all(|v| (0.0..=1.0).contains(v)),
            "boundary strengths must lie in [0, 1]"
        );
        BoundaryMap { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        assert!((0.0..=1.0).contains(&v), "boundary strength must lie in [0, 1]");
        self.data[y * self.width + x] = v;
    }
}

/// Per-pixel class id map, row-major. Zero means background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<ClassId>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "map dimensions must be positive");
        LabelMap { width, height, data: vec![0; width * height] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<ClassId>) -> Self {
        assert!(width >= 1 && height >= 1, "map dimensions must be positive");
        assert_eq!(data.len(), width * height, "payload length mismatch");
        LabelMap { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[ClassId] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> ClassId {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, id: ClassId) {
        self.data[y * self.width + x] = id;
    }

    /// Distinct nonzero ids present in the map, ascending.
    pub fn class_ids(&self) -> BTreeSet<ClassId> {
        self.data.iter().copied().filter(|&id| id != 0).collect()
    }

    /// Mask of all pixels carrying `id`.
    pub fn class_mask(&self, id: ClassId) -> BinaryMask {
        BinaryMask::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&v| v == id).collect(),
        )
    }
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        BinaryMask { width, height, data: vec![false; width * height] }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        assert_eq!(data.len(), width * height, "payload length mismatch");
        BinaryMask { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Bounding box of set pixels as (x0, y0, x1, y1), inclusive, or None
    /// when the mask is empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bbox = Some(match bbox {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => {
                            (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
                        }
                    });
                }
            }
        }
        bbox
    }
}
