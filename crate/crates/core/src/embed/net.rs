//! Small fully connected embedding network with tanh hidden layers, a linear
//! last layer, and L2 normalization of the output.

use super::EmbedError;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

const FORMAT_TAG: &str = "embedding-net-v1";

/// Point on the unit sphere produced by the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "embedding dimensions differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// One dense layer. Weights are row-major, `out_dim` rows of `in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn apply(&self, input: &[f64], activate: bool) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let z: f64 = self.biases[o]
                + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            out.push(if activate { z.tanh() } else { z });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingNet {
    layers: Vec<Layer>,
}

/// Intermediate state of one forward pass, kept for backpropagation.
/// `activations[0]` is the input; the final entry is the pre-normalization
/// linear output.
pub(crate) struct ForwardTrace {
    pub activations: Vec<Vec<f64>>,
    pub embedding: EmbeddingVector,
    pub norm: f64,
    pub zero_fallback: bool,
}

/// Per-layer loss gradients, matching the shape of an [`EmbeddingNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &EmbeddingNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    dw: vec![0.0; l.weights.len()],
                    db: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    /// Adds `factor * other` in place.
    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        assert_eq!(self.layers.len(), other.layers.len(), "gradient shapes differ");
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in mine.dw.iter_mut().zip(&theirs.dw) {
                *a += factor * b;
            }
            for (a, b) in mine.db.iter_mut().zip(&theirs.db) {
                *a += factor * b;
            }
        }
    }

    /// Largest absolute component, useful as a convergence probe.
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.dw.iter().chain(&l.db))
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.dw.iter().chain(&l.db).all(|v| v.is_finite()))
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetDoc {
    format: String,
    dims: Vec<usize>,
    layers: Vec<LayerDoc>,
}

impl EmbeddingNet {
    /// Builds a network with the given layer widths, e.g. `[64, 32, 8]` for
    /// one hidden layer. Weights start uniform within the symmetric fan-based
    /// bound sqrt(6 / (fan_in + fan_out)); biases start at zero.
    pub fn init(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        assert!(dims.iter().all(|&d| d >= 1), "layer widths must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        EmbeddingNet { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, EmbedError> {
        if layers.is_empty() {
            return Err(EmbedError::Format("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(EmbedError::Format(format!(
                    "layer widths do not chain: {} then {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        for layer in &layers {
            if layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.biases.len() != layer.out_dim
            {
                return Err(EmbedError::Format("layer parameter shape mismatch".into()));
            }
            if !layer.weights.iter().chain(&layer.biases).all(|v| v.is_finite()) {
                return Err(EmbedError::Format("non-finite parameter".into()));
            }
        }
        Ok(EmbeddingNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable parameter access for optimizer steps and numeric probes.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub(crate) fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace, EmbedError> {
        if input.len() != self.input_dim() {
            return Err(EmbedError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut activations = vec![input.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let out = layer.apply(activations.last().unwrap(), i != last);
            activations.push(out);
        }
        let pre = activations.last().unwrap();
        let norm = pre.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (values, zero_fallback) = if norm == 0.0 {
            let mut basis = vec![0.0; pre.len()];
            basis[0] = 1.0;
            (basis, true)
        } else {
            (pre.iter().map(|v| v / norm).collect(), false)
        };
        Ok(ForwardTrace {
            embedding: EmbeddingVector::new(values),
            activations,
            norm,
            zero_fallback,
        })
    }

    /// Maps a descriptor onto the unit sphere. An exactly zero pre-norm
    /// output falls back to the first basis vector.
    pub fn forward(&self, input: &[f64]) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.forward_trace(input)?.embedding)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let doc = NetDoc {
            format: FORMAT_TAG.to_string(),
            dims: self.dims(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc { weights: l.weights.clone(), biases: l.biases.clone() })
                .collect(),
        };
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| EmbedError::Format(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let text = fs::read_to_string(path)?;
        let doc: NetDoc =
            serde_json::from_str(&text).map_err(|e| EmbedError::Format(e.to_string()))?;
        if doc.format != FORMAT_TAG {
            return Err(EmbedError::Format(format!(
                "expected format {FORMAT_TAG:?}, got {:?}",
                doc.format
            )));
        }
        if doc.dims.len() != doc.layers.len() + 1 {
            return Err(EmbedError::Format("dims do not match layer count".into()));
        }
        let layers = doc
            .layers
            .into_iter()
            .zip(doc.dims.windows(2))
            .map(|(l, pair)| Layer {
                in_dim: pair[0],
                out_dim: pair[1],
                weights: l.weights,
                biases: l.biases,
            })
            .collect();
        Self::from_layers(layers)
    }
}

/// Backpropagates a loss gradient on the normalized embedding through the
/// trace, accumulating parameter gradients. A zero-fallback trace contributes
/// nothing: the fallback branch is constant in the parameters.
pub(crate) fn backprop_from_embedding(
    net: &EmbeddingNet,
    trace: &ForwardTrace,
    d_embedding: &[f64],
    grads: &mut Gradients,
) {
    if trace.zero_fallback {
        return;
    }
    let y = trace.embedding.as_slice();
    let dot: f64 = d_embedding.iter().zip(y).map(|(g, yi)| g * yi).sum();
    // Through u / ||u||: dJ/du = (g - (g . y) y) / ||u||.
    let mut dz: Vec<f64> = d_embedding
        .iter()
        .zip(y)
        .map(|(g, yi)| (g - dot * yi) / trace.norm)
        .collect();

    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let a_prev = &trace.activations[l];
        let grad = &mut grads.layers[l];
        for o in 0..layer.out_dim {
            for i in 0..layer.in_dim {
                grad.dw[o * layer.in_dim + i] += dz[o] * a_prev[i];
            }
            grad.db[o] += dz[o];
        }
        if l == 0 {
            break;
        }
        let mut d_prev = vec![0.0; layer.in_dim];
        for o in 0..layer.out_dim {
            for (i, d) in d_prev.iter_mut().enumerate() {
                *d += layer.weights[o * layer.in_dim + i] * dz[o];
            }
        }
        // Hidden activations are tanh outputs: d tanh(z) / dz = 1 - a^2.
        dz = d_prev
            .iter()
            .zip(a_prev)
            .map(|(d, a)| d * (1.0 - a * a))
            .collect();
    }
}
