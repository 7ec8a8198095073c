//! Small feed-forward regressor: tanh hidden layers, identity output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NetError;

/// Weights and biases of one dense layer; `weights` is row-major
/// `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }
}

/// Per-layer gradients, same shapes as the corresponding [`Mlp`] layers.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerParams>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerParams::zeros(l.bias.len(), l.weights.len() / l.bias.len()))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in &mut layer.weights {
                *w *= factor;
            }
            for b in &mut layer.bias {
                *b *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    layers: Vec<LayerParams>,
}

impl Mlp {
    /// Xavier-uniform initialization, deterministic in the seed.
    pub fn new(layer_dims: &[usize], seed: u64) -> Self {
        assert!(layer_dims.len() >= 2, "need at least input and output dims");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                LayerParams {
                    weights: (0..fan_out * fan_in)
                        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                        .collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self {
            layer_dims: layer_dims.to_vec(),
            layers,
        }
    }

    pub fn zeros(layer_dims: &[usize]) -> Self {
        assert!(layer_dims.len() >= 2);
        let layers = layer_dims
            .windows(2)
            .map(|w| LayerParams::zeros(w[1], w[0]))
            .collect();
        Self {
            layer_dims: layer_dims.to_vec(),
            layers,
        }
    }

    pub fn from_layers(layer_dims: Vec<usize>, layers: Vec<LayerParams>) -> Result<Self, NetError> {
        if layer_dims.len() < 2 || layers.len() != layer_dims.len() - 1 {
            return Err(NetError::SchemaMismatch(
                "layer count does not match layer_dims".into(),
            ));
        }
        for (layer, w) in layers.iter().zip(layer_dims.windows(2)) {
            if layer.weights.len() != w[0] * w[1] || layer.bias.len() != w[1] {
                return Err(NetError::SchemaMismatch("layer shape mismatch".into()));
            }
        }
        Ok(Self { layer_dims, layers })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>, NetError> {
        Ok(self.forward_cached(features)?.pop().unwrap())
    }

    /// Forward pass keeping every layer's activation (input first, raw
    /// output last) for the backward pass.
    pub fn forward_cached(&self, features: &[f64]) -> Result<Vec<Vec<f64>>, NetError> {
        if features.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch {
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        let n_layers = self.layers.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(features.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let out_dim = layer.bias.len();
            let in_dim = input.len();
            let mut out = layer.bias.clone();
            for i in 0..out_dim {
                let row = &layer.weights[i * in_dim..(i + 1) * in_dim];
                let mut s = out[i];
                for (w, x) in row.iter().zip(input.iter()) {
                    s += w * x;
                }
                out[i] = if l + 1 < n_layers { s.tanh() } else { s };
            }
            acts.push(out);
        }
        Ok(acts)
    }

    /// Reverse-mode pass through the dense layers given the adjoint of the
    /// raw output; accumulates into `grads`.
    pub fn backward(&self, acts: &[Vec<f64>], d_output: &[f64], grads: &mut MlpGrads) {
        let mut delta = d_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let in_dim = input.len();
            for (i, &di) in delta.iter().enumerate() {
                g.bias[i] += di;
                let row = &mut g.weights[i * in_dim..(i + 1) * in_dim];
                for (gw, x) in row.iter_mut().zip(input.iter()) {
                    *gw += di * x;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; in_dim];
                for (i, &di) in delta.iter().enumerate() {
                    let row = &layer.weights[i * in_dim..(i + 1) * in_dim];
                    for (p, w) in prev.iter_mut().zip(row.iter()) {
                        *p += di * w;
                    }
                }
                // Input to this layer was a tanh activation.
                for (p, a) in prev.iter_mut().zip(input.iter()) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_output() {
        let net = Mlp::zeros(&[3, 4, 2]);
        assert_eq!(net.forward(&[0.5, -1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_identity_layer_passes_input_through() {
        let layer = LayerParams {
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
        };
        let net = Mlp::from_layers(vec![2, 2], vec![layer]).unwrap();
        assert_eq!(net.forward(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn forward_is_deterministic_per_seed() {
        let a = Mlp::new(&[4, 8, 3], 99);
        let b = Mlp::new(&[4, 8, 3], 99);
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
        let c = Mlp::new(&[4, 8, 3], 100);
        assert_ne!(a.forward(&x).unwrap(), c.forward(&x).unwrap());
    }

    #[test]
    fn forward_rejects_bad_input_len() {
        let net = Mlp::zeros(&[3, 2]);
        assert!(matches!(
            net.forward(&[1.0]),
            Err(NetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_difference_on_sum_output() {
        // Scalar head: sum of outputs; adjoint of each output is 1.
        let net = Mlp::new(&[3, 5, 2], 7);
        let x = [0.4, -0.2, 0.9];
        let f = |net: &Mlp| net.forward(&x).unwrap().iter().sum::<f64>();

        let acts = net.forward_cached(&x).unwrap();
        let mut grads = MlpGrads::zeros_like(&net);
        net.backward(&acts, &[1.0, 1.0], &mut grads);

        let h = 1e-6;
        for l in 0..net.layers().len() {
            for k in 0..net.layers()[l].weights.len() {
                let mut plus = net.clone();
                plus.layers_mut()[l].weights[k] += h;
                let mut minus = net.clone();
                minus.layers_mut()[l].weights[k] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let got = grads.layers[l].weights[k];
                assert!(
                    (got - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                    "layer {l} weight {k}: {got} vs {fd}"
                );
            }
            for k in 0..net.layers()[l].bias.len() {
                let mut plus = net.clone();
                plus.layers_mut()[l].bias[k] += h;
                let mut minus = net.clone();
                minus.layers_mut()[l].bias[k] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let got = grads.layers[l].bias[k];
                assert!((got - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}
