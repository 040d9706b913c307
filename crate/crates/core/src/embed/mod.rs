//! Patch descriptors, the embedding network, and the metric-learning losses
//! that shape its output space.

mod descriptor;
mod gradcheck;
mod loss;
mod net;

pub use descriptor::{describe_patch, PatchDescriptor, COLOR_GRID, DESCRIPTOR_DIM, HUE_BINS};
pub use gradcheck::numeric_gradient;
pub use loss::{
    batch_stats, combined_loss, global_loss, global_loss_from_stats, triplet_loss,
    triplet_ratio_loss, BatchStats, LossConfig, Triplet,
};
pub use net::{EmbeddingNet, EmbeddingVector, Gradients, Layer, LayerGrad};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
    #[error("unexpected model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
