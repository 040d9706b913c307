//! Metric-learning losses with exact analytic gradients: a per-triplet
//! distance-ratio hinge, a batch-moment separation loss, and their weighted
//! combination.

use super::net::{backprop_from_embedding, EmbeddingNet, EmbeddingVector, ForwardTrace, Gradients};
use super::{EmbedError, PatchDescriptor};
use crate::raster::ClassId;
use serde::{Deserialize, Serialize};

/// Weights and margins for all three losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Additive margin in the triplet ratio denominator.
    pub triplet_margin: f64,
    /// Required gap between same-class and cross-class mean distances.
    pub global_margin: f64,
    /// Weight of the mean-separation hinge in the batch loss.
    pub separation_weight: f64,
    /// Weight of the summed triplet terms in the combined loss.
    pub combination_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            triplet_margin: 0.2,
            global_margin: 0.01,
            separation_weight: 1.0,
            combination_weight: 0.8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if !(self.triplet_margin > 0.0) {
            return Err(EmbedError::InvalidConfig(
                "triplet margin must be positive to keep the ratio finite".into(),
            ));
        }
        for (name, v) in [
            ("global_margin", self.global_margin),
            ("separation_weight", self.separation_weight),
            ("combination_weight", self.combination_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EmbedError::InvalidConfig(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Anchor and positive share a class; the negative comes from another.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: PatchDescriptor,
    pub positive: PatchDescriptor,
    pub negative: PatchDescriptor,
    pub anchor_class: ClassId,
    pub negative_class: ClassId,
}

impl Triplet {
    pub fn new(
        anchor: PatchDescriptor,
        positive: PatchDescriptor,
        negative: PatchDescriptor,
        anchor_class: ClassId,
        negative_class: ClassId,
    ) -> Result<Self, EmbedError> {
        if anchor_class == negative_class {
            return Err(EmbedError::InvalidTriplet(format!(
                "negative must come from a different class than {anchor_class}"
            )));
        }
        if anchor.dim() != positive.dim() || anchor.dim() != negative.dim() {
            let got =
                if positive.dim() != anchor.dim() { positive.dim() } else { negative.dim() };
            return Err(EmbedError::DimensionMismatch { expected: anchor.dim(), got });
        }
        Ok(Triplet { anchor, positive, negative, anchor_class, negative_class })
    }
}

/// Ratio hinge on embeddings: max(0, 1 - d(a, n) / (d(a, p) + margin)).
/// Always lies in [0, 1] for a non-negative margin.
pub fn triplet_ratio_loss(
    anchor: &EmbeddingVector,
    positive: &EmbeddingVector,
    negative: &EmbeddingVector,
    margin: f64,
) -> f64 {
    let ratio = anchor.distance(negative) / (anchor.distance(positive) + margin);
    (1.0 - ratio).max(0.0)
}

/// Population moments of the per-triplet squared half-distances.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    d_plus: Vec<f64>,
    d_minus: Vec<f64>,
    mean_plus: f64,
    mean_minus: f64,
    var_plus: f64,
    var_minus: f64,
}

impl BatchStats {
    /// Builds stats from precomputed distance lists. Both lists must be the
    /// same nonzero length.
    pub fn from_distances(d_plus: Vec<f64>, d_minus: Vec<f64>) -> Result<Self, EmbedError> {
        if d_plus.is_empty() {
            return Err(EmbedError::EmptyBatch);
        }
        if d_plus.len() != d_minus.len() {
            return Err(EmbedError::DimensionMismatch {
                expected: d_plus.len(),
                got: d_minus.len(),
            });
        }
        let n = d_plus.len() as f64;
        let moments = |d: &[f64]| {
            let mean = d.iter().sum::<f64>() / n;
            let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var)
        };
        let (mean_plus, var_plus) = moments(&d_plus);
        let (mean_minus, var_minus) = moments(&d_minus);
        Ok(BatchStats { d_plus, d_minus, mean_plus, mean_minus, var_plus, var_minus })
    }

    pub fn len(&self) -> usize {
        self.d_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_plus.is_empty()
    }

    pub fn d_plus(&self) -> &[f64] {
        &self.d_plus
    }

    pub fn d_minus(&self) -> &[f64] {
        &self.d_minus
    }

    pub fn mean_plus(&self) -> f64 {
        self.mean_plus
    }

    pub fn mean_minus(&self) -> f64 {
        self.mean_minus
    }

    pub fn var_plus(&self) -> f64 {
        self.var_plus
    }

    pub fn var_minus(&self) -> f64 {
        self.var_minus
    }
}

/// Squared half-distance between two unit embeddings, ||a - b||^2 / 4, which
/// stays in [0, 1].
fn squared_half_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let d = a.distance(b);
    d * d / 4.0
}

/// Computes batch moments from embedding triples (anchor, positive,
/// negative).
pub fn batch_stats(
    triples: &[(EmbeddingVector, EmbeddingVector, EmbeddingVector)],
) -> Result<BatchStats, EmbedError> {
    let d_plus: Vec<f64> =
        triples.iter().map(|(a, p, _)| squared_half_distance(a, p)).collect();
    let d_minus: Vec<f64> =
        triples.iter().map(|(a, _, n)| squared_half_distance(a, n)).collect();
    BatchStats::from_distances(d_plus, d_minus)
}

/// Batch separation loss on precomputed stats: the two distance variances
/// plus a hinge pushing the mean gap past the margin.
pub fn global_loss_from_stats(stats: &BatchStats, config: &LossConfig) -> f64 {
    let gap = stats.mean_plus - stats.mean_minus + config.global_margin;
    stats.var_plus + stats.var_minus + config.separation_weight * gap.max(0.0)
}

struct TripletTraces {
    anchor: ForwardTrace,
    positive: ForwardTrace,
    negative: ForwardTrace,
}

fn trace_triplet(net: &EmbeddingNet, triplet: &Triplet) -> Result<TripletTraces, EmbedError> {
    Ok(TripletTraces {
        anchor: net.forward_trace(triplet.anchor.values())?,
        positive: net.forward_trace(triplet.positive.values())?,
        negative: net.forward_trace(triplet.negative.values())?,
    })
}

/// Difference direction d(a - b)/da scaled by `factor / ||a - b||`, or zero
/// at coincident points where the distance is not differentiable.
fn scaled_difference(a: &EmbeddingVector, b: &EmbeddingVector, factor: f64) -> Vec<f64> {
    let dist = a.distance(b);
    if dist == 0.0 {
        return vec![0.0; a.dim()];
    }
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(ai, bi)| factor * (ai - bi) / dist)
        .collect()
}

/// Evaluates the triplet ratio hinge and its exact parameter gradient. The
/// inactive branch of the hinge, and coincident embedding pairs, contribute
/// zero gradient.
pub fn triplet_loss(
    net: &EmbeddingNet,
    triplet: &Triplet,
    margin: f64,
) -> Result<(f64, Gradients), EmbedError> {
    let traces = trace_triplet(net, triplet)?;
    let (ya, yp, yn) = (&traces.anchor.embedding, &traces.positive.embedding, &traces.negative.embedding);
    let dist_p = ya.distance(yp);
    let dist_n = ya.distance(yn);
    let denom = dist_p + margin;
    let slack = 1.0 - dist_n / denom;

    let mut grads = Gradients::zeros_like(net);
    if slack > 0.0 {
        let dl_ddp = dist_n / (denom * denom);
        let dl_ddn = -1.0 / denom;
        let ap = scaled_difference(ya, yp, dl_ddp);
        let an = scaled_difference(ya, yn, dl_ddn);
        let d_anchor: Vec<f64> = ap.iter().zip(&an).map(|(u, v)| u + v).collect();
        let d_positive: Vec<f64> = ap.iter().map(|v| -v).collect();
        let d_negative: Vec<f64> = an.iter().map(|v| -v).collect();
        backprop_from_embedding(net, &traces.anchor, &d_anchor, &mut grads);
        backprop_from_embedding(net, &traces.positive, &d_positive, &mut grads);
        backprop_from_embedding(net, &traces.negative, &d_negative, &mut grads);
    }
    Ok((slack.max(0.0), grads))
}

/// Evaluates the batch separation loss and its exact parameter gradient over
/// all triplets in `batch`.
pub fn global_loss(
    net: &EmbeddingNet,
    batch: &[Triplet],
    config: &LossConfig,
) -> Result<(f64, Gradients), EmbedError> {
    if batch.is_empty() {
        return Err(EmbedError::EmptyBatch);
    }
    let traces: Vec<TripletTraces> =
        batch.iter().map(|t| trace_triplet(net, t)).collect::<Result<_, _>>()?;
    let d_plus: Vec<f64> = traces
        .iter()
        .map(|t| squared_half_distance(&t.anchor.embedding, &t.positive.embedding))
        .collect();
    let d_minus: Vec<f64> = traces
        .iter()
        .map(|t| squared_half_distance(&t.anchor.embedding, &t.negative.embedding))
        .collect();
    for d in d_plus.iter().chain(&d_minus) {
        assert!(
            (-1e-9..=1.0 + 1e-9).contains(d),
            "squared half-distance {d} left [0, 1]; embeddings are not unit norm"
        );
    }
    let stats = BatchStats::from_distances(d_plus, d_minus)?;
    let value = global_loss_from_stats(&stats, config);

    let n = batch.len() as f64;
    let hinge_active = stats.mean_plus - stats.mean_minus + config.global_margin > 0.0;
    let hinge = if hinge_active { config.separation_weight / n } else { 0.0 };
    let mut grads = Gradients::zeros_like(net);
    for (i, t) in traces.iter().enumerate() {
        let gp = 2.0 / n * (stats.d_plus[i] - stats.mean_plus) + hinge;
        let gm = 2.0 / n * (stats.d_minus[i] - stats.mean_minus) - hinge;
        let (ya, yp, yn) = (&t.anchor.embedding, &t.positive.embedding, &t.negative.embedding);
        // d(||a - p||^2 / 4)/da = (a - p) / 2.
        let dp_dir: Vec<f64> =
            ya.as_slice().iter().zip(yp.as_slice()).map(|(a, p)| (a - p) / 2.0).collect();
        let dm_dir: Vec<f64> =
            ya.as_slice().iter().zip(yn.as_slice()).map(|(a, nn)| (a - nn) / 2.0).collect();
        let d_anchor: Vec<f64> =
            dp_dir.iter().zip(&dm_dir).map(|(p, m)| gp * p + gm * m).collect();
        let d_positive: Vec<f64> = dp_dir.iter().map(|v| -gp * v).collect();
        let d_negative: Vec<f64> = dm_dir.iter().map(|v| -gm * v).collect();
        backprop_from_embedding(net, &t.anchor, &d_anchor, &mut grads);
        backprop_from_embedding(net, &t.positive, &d_positive, &mut grads);
        backprop_from_embedding(net, &t.negative, &d_negative, &mut grads);
    }
    Ok((value, grads))
}

/// Combined objective: batch separation loss plus the weighted sum (not
/// mean) of per-triplet ratio hinges.
pub fn combined_loss(
    net: &EmbeddingNet,
    batch: &[Triplet],
    config: &LossConfig,
) -> Result<(f64, Gradients), EmbedError> {
    let (global_value, mut grads) = global_loss(net, batch, config)?;
    let mut triplet_sum = 0.0;
    for triplet in batch {
        let (value, t_grads) = triplet_loss(net, triplet, config.triplet_margin)?;
        triplet_sum += value;
        grads.add_scaled(&t_grads, config.combination_weight);
    }
    Ok((global_value + config.combination_weight * triplet_sum, grads))
}
