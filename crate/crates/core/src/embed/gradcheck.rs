//! Central-difference numeric gradients, the independent check on analytic
//! backpropagation.

use super::net::{EmbeddingNet, Gradients};

/// Estimates d f / d parameter for every parameter of `net` by central
/// differences with the given step. The closure must be a pure function of
/// the network.
pub fn numeric_gradient(
    net: &EmbeddingNet,
    step: f64,
    mut f: impl FnMut(&EmbeddingNet) -> f64,
) -> Gradients {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut grads = Gradients::zeros_like(net);
    let mut probe = net.clone();
    for l in 0..net.layers().len() {
        for wi in 0..net.layers()[l].weights.len() {
            let original = probe.layers()[l].weights[wi];
            probe.layers_mut()[l].weights[wi] = original + step;
            let high = f(&probe);
            probe.layers_mut()[l].weights[wi] = original - step;
            let low = f(&probe);
            probe.layers_mut()[l].weights[wi] = original;
            grads.layers[l].dw[wi] = (high - low) / (2.0 * step);
        }
        for bi in 0..net.layers()[l].biases.len() {
            let original = probe.layers()[l].biases[bi];
            probe.layers_mut()[l].biases[bi] = original + step;
            let high = f(&probe);
            probe.layers_mut()[l].biases[bi] = original - step;
            let low = f(&probe);
            probe.layers_mut()[l].biases[bi] = original;
            grads.layers[l].db[bi] = (high - low) / (2.0 * step);
        }
    }
    grads
}
