//! Desk-scale scene segmentation: class-agnostic region proposals from
//! boundary maps, metric-learning embeddings with k-NN classification,
//! and per-pixel vote fusion into a labeled segmentation.

pub mod annotate;
pub mod embed;
pub mod evalkit;
pub mod gallery;
pub mod hierarchy;
pub mod raster;
pub mod train;
pub mod vote;

pub use raster::{
    BinaryMask, BoundaryMap, ClassId, ClassRegistry, ColorImage, LabelMap, RasterError,
};
