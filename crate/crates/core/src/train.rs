//! Plain SGD training of the embedding network on sampled triplets, with a
//! halving learning-rate schedule and per-layer rate multipliers.

use crate::embed::{combined_loss, EmbedError, EmbeddingNet, Gradients, LossConfig, PatchDescriptor, Triplet};
use crate::raster::ClassId;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("need at least two classes to form triplets, found {found}")]
    InsufficientClasses { found: usize },
    #[error("no class has the two members needed for an anchor-positive pair")]
    InsufficientMembers,
    #[error("loss became non-finite in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("descriptor dimension mismatch: expected {expected}, got {got}")]
    InconsistentDescriptorDim { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Triplets sampled once up front and revisited every epoch.
    pub triplet_budget: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    /// The learning rate halves after this many epochs.
    pub lr_halving_period: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub loss: LossConfig,
    /// Per-layer learning-rate factors. None means all ones except a tenfold
    /// rate on the last layer.
    pub layer_lr_multipliers: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            triplet_budget: 8000,
            batch_size: 64,
            initial_lr: 0.1,
            lr_halving_period: 3,
            weight_decay: 0.0005,
            seed: 0,
            loss: LossConfig::default(),
            layer_lr_multipliers: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.triplet_budget == 0 {
            return fail("triplet budget must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if self.lr_halving_period == 0 {
            return fail("halving period must be positive".into());
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return fail("initial learning rate must be positive".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail("weight decay must be non-negative".into());
        }
        if let Some(multipliers) = &self.layer_lr_multipliers {
            if multipliers.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
                return fail("layer multipliers must be non-negative".into());
            }
        }
        self.loss.validate()?;
        Ok(())
    }

    /// Multipliers resolved against a concrete layer count.
    fn resolved_multipliers(&self, layer_count: usize) -> Result<Vec<f64>, TrainError> {
        match &self.layer_lr_multipliers {
            Some(m) => {
                if m.len() != layer_count {
                    return Err(TrainError::InvalidConfig(format!(
                        "{} layer multipliers for {layer_count} layers",
                        m.len()
                    )));
                }
                Ok(m.clone())
            }
            None => {
                let mut m = vec![1.0; layer_count];
                *m.last_mut().unwrap() = 10.0;
                Ok(m)
            }
        }
    }
}

/// Learning rate for `epoch` (zero-based): the initial rate halved once per
/// elapsed halving period.
pub fn learning_rate_at(config: &TrainConfig, epoch: usize) -> f64 {
    config.initial_lr * 0.5f64.powi((epoch / config.lr_halving_period) as i32)
}

/// Labeled descriptors grouped by class.
#[derive(Debug, Clone, Default)]
pub struct PatchDataset {
    items: Vec<(PatchDescriptor, ClassId)>,
    by_class: BTreeMap<ClassId, Vec<usize>>,
}

impl PatchDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, descriptor: PatchDescriptor, class: ClassId) -> Result<(), TrainError> {
        if let Some((first, _)) = self.items.first() {
            if first.dim() != descriptor.dim() {
                return Err(TrainError::InconsistentDescriptorDim {
                    expected: first.dim(),
                    got: descriptor.dim(),
                });
            }
        }
        self.by_class.entry(class).or_default().push(self.items.len());
        self.items.push((descriptor, class));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn descriptor_dim(&self) -> Option<usize> {
        self.items.first().map(|(d, _)| d.dim())
    }

    /// Classes present, ascending.
    pub fn classes(&self) -> Vec<ClassId> {
        self.by_class.keys().copied().collect()
    }

    pub fn members(&self, class: ClassId) -> &[usize] {
        self.by_class.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get(&self, index: usize) -> (&PatchDescriptor, ClassId) {
        let (d, c) = &self.items[index];
        (d, *c)
    }
}

/// Draws `count` triplets: an anchor class uniform among classes with at
/// least two members, distinct anchor and positive from it, and a negative
/// from a uniformly chosen other class.
pub fn sample_triplets(
    dataset: &PatchDataset,
    count: usize,
    seed: u64,
) -> Result<Vec<Triplet>, TrainError> {
    let classes = dataset.classes();
    if classes.len() < 2 {
        return Err(TrainError::InsufficientClasses { found: classes.len() });
    }
    let anchor_pool: Vec<ClassId> =
        classes.iter().copied().filter(|c| dataset.members(*c).len() >= 2).collect();
    if anchor_pool.is_empty() {
        return Err(TrainError::InsufficientMembers);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(count);
    for _ in 0..count {
        let anchor_class = anchor_pool[rng.gen_range(0..anchor_pool.len())];
        let members = dataset.members(anchor_class);
        let anchor_idx = members[rng.gen_range(0..members.len())];
        let positive_idx = loop {
            let candidate = members[rng.gen_range(0..members.len())];
            if candidate != anchor_idx {
                break candidate;
            }
        };
        let negative_class = loop {
            let candidate = classes[rng.gen_range(0..classes.len())];
            if candidate != anchor_class {
                break candidate;
            }
        };
        let negatives = dataset.members(negative_class);
        let negative_idx = negatives[rng.gen_range(0..negatives.len())];
        triplets.push(Triplet::new(
            dataset.get(anchor_idx).0.clone(),
            dataset.get(positive_idx).0.clone(),
            dataset.get(negative_idx).0.clone(),
            anchor_class,
            negative_class,
        )?);
    }
    Ok(triplets)
}

/// One SGD step: p <- p - rate * multiplier * (gradient + decay * p), applied
/// per layer.
pub fn apply_sgd_step(
    net: &mut EmbeddingNet,
    grads: &Gradients,
    rate: f64,
    weight_decay: f64,
    multipliers: &[f64],
) {
    assert_eq!(net.layers().len(), multipliers.len(), "one multiplier per layer");
    assert_eq!(net.layers().len(), grads.layers.len(), "gradient shape mismatch");
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let step = rate * multipliers[l];
        for (w, g) in layer.weights.iter_mut().zip(&grads.layers[l].dw) {
            *w -= step * (g + weight_decay * *w);
        }
        for (b, g) in layer.biases.iter_mut().zip(&grads.layers[l].db) {
            *b -= step * (g + weight_decay * *b);
        }
    }
}

/// Trains `net` on triplets sampled from `dataset`. The triplet pool is drawn
/// once, then reshuffled each epoch and consumed in batches. Returns the
/// trained network and the per-epoch mean batch loss.
pub fn train(
    net: EmbeddingNet,
    dataset: &PatchDataset,
    config: &TrainConfig,
) -> Result<(EmbeddingNet, Vec<f64>), TrainError> {
    config.validate()?;
    if let Some(dim) = dataset.descriptor_dim() {
        if dim != net.input_dim() {
            return Err(TrainError::InconsistentDescriptorDim {
                expected: net.input_dim(),
                got: dim,
            });
        }
    }
    let multipliers = config.resolved_multipliers(net.layers().len())?;
    let triplets = sample_triplets(dataset, config.triplet_budget, config.seed)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut net = net;
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let rate = learning_rate_at(config, epoch);
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Triplet> = chunk.iter().map(|&i| triplets[i].clone()).collect();
            let (value, grads) = combined_loss(&net, &batch, &config.loss)?;
            if !value.is_finite() || !grads.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_index });
            }
            apply_sgd_step(&mut net, &grads, rate, config.weight_decay, &multipliers);
            epoch_loss += value;
            batches += 1;
        }
        trace.push(epoch_loss / batches as f64);
    }
    Ok((net, trace))
}
