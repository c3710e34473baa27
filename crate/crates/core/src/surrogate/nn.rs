use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::Surrogate;
use crate::error::{Error, Result};
use crate::field::ParamSample;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Fully connected network `x_ℓ = σ(W_ℓ x_{ℓ-1} + b_ℓ)` with sigmoid hidden
/// layers and an affine output layer.
///
/// Parameters are flattened layer by layer; within a layer the weight matrix
/// comes first (row-major, `N_ℓ × N_{ℓ-1}`), followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuralNet {
    layer_sizes: Vec<usize>,
}

impl NeuralNet {
    /// `layer_sizes = [s, N_1, …, n_dof]`.
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "network needs at least an input and an output layer of positive width, got {layer_sizes:?}"
            )));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offset of layer `l` (1-based) weights, and of its biases.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 1..l {
            off += self.layer_sizes[k] * (self.layer_sizes[k - 1] + 1);
        }
        (off, off + self.layer_sizes[l] * self.layer_sizes[l - 1])
    }

    /// Pre-activations and activations of every layer; `acts[0] = y`.
    fn forward(&self, theta: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layer_sizes.len());
        acts.push(y.to_vec());
        for l in 1..self.layer_sizes.len() {
            let (n_out, n_in) = (self.layer_sizes[l], self.layer_sizes[l - 1]);
            let (w_off, b_off) = self.offsets(l);
            let prev = &acts[l - 1];
            let mut next: Vec<f64> = (0..n_out)
                .map(|i| {
                    let row = &theta[w_off + i * n_in..w_off + (i + 1) * n_in];
                    crate::linalg::dot(row, prev) + theta[b_off + i]
                })
                .collect();
            if l < self.n_layers() {
                next.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            acts.push(next);
        }
        acts
    }

    /// Glorot-style initialization: weights uniform on `[-r, r]` with
    /// `r = √(6 / (N_{ℓ-1} + N_ℓ))`, biases zero.
    pub fn scaled_uniform_init<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut theta = vec![0.0; self.param_count()];
        for l in 1..self.layer_sizes.len() {
            let (n_out, n_in) = (self.layer_sizes[l], self.layer_sizes[l - 1]);
            let r = libm::sqrt(6.0 / (n_in + n_out) as f64);
            let (w_off, b_off) = self.offsets(l);
            for v in &mut theta[w_off..b_off] {
                *v = rng.random_range(-r..=r);
            }
        }
        theta
    }
}

impl Surrogate for NeuralNet {
    fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    fn n_dof(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn s(&self) -> usize {
        self.layer_sizes[0]
    }

    fn eval(&self, theta: &[f64], y: &ParamSample) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.param_count());
        self.forward(theta, y.as_slice()).pop().unwrap()
    }

    fn vjp_accumulate(&self, theta: &[f64], y: &ParamSample, w: &[f64], scale: f64, out: &mut [f64]) {
        let acts = self.forward(theta, y.as_slice());
        // delta = ∂⟨w, u⟩ / ∂(pre-activation of layer l)
        let mut delta: Vec<f64> = w.iter().map(|v| scale * v).collect();
        for l in (1..self.layer_sizes.len()).rev() {
            let (n_out, n_in) = (self.layer_sizes[l], self.layer_sizes[l - 1]);
            let (w_off, b_off) = self.offsets(l);
            let prev = &acts[l - 1];
            for i in 0..n_out {
                let g = &mut out[w_off + i * n_in..w_off + (i + 1) * n_in];
                crate::linalg::axpy(delta[i], prev, g);
                out[b_off + i] += delta[i];
            }
            if l > 1 {
                let mut back = vec![0.0; n_in];
                for (i, d) in delta.iter().enumerate() {
                    crate::linalg::axpy(*d, &theta[w_off + i * n_in..w_off + (i + 1) * n_in], &mut back);
                }
                // previous layer is a sigmoid layer: σ' = σ (1 − σ)
                for (b, a) in back.iter_mut().zip(prev) {
                    *b *= a * (1.0 - a);
                }
                delta = back;
            }
        }
    }

    fn flattening(&self) -> &'static str {
        "theta per layer l: W_l row-major (out x in), then b_l"
    }
}
