//! Fully connected network with rectifier hidden layers and a linear output,
//! with hand-written backpropagation.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (`out x in`, row-major) followed by the bias vector. Output activations
//! (softmax, softplus, scaled tanh) are applied by the callers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass: the input, every hidden layer
/// after the rectifier, and the linear output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache holds at least the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// Magnitudes below this are treated as exact zeros on the way into the network.
///
/// Beliefs late in long episodes put mass like 1e-250 on ruled-out
/// hypotheses. Such inputs change no output at double precision, but their
/// products and squares fall into the subnormal range, where arithmetic is
/// orders of magnitude slower.
pub const TINY: f64 = 1e-100;

pub(crate) fn flush_tiny(x: f64) -> f64 {
    if x.abs() < TINY {
        0.0
    } else {
        x
    }
}

impl Mlp {
    /// All-zero network with the given layer sizes (input first, output last).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// He-uniform hidden weights; output weights shrunk by `output_scale`. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let n_layers = sizes.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let mut bound = (6.0 / fan_in as f64).sqrt();
            if l + 1 == n_layers {
                bound *= output_scale;
            }
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-bound..=bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(&sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch {
                expected: net.params.len(),
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("network parameters must be finite".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward_cached(input)?;
        Ok(cache.layers.pop().unwrap())
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let n_layers = self.sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(input.iter().map(|&x| flush_tiny(x)).collect());
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &layers[l];
            let mut y: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            if l + 1 < n_layers {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            layers.push(y);
            offset += n_in * n_out + n_out;
        }
        Ok(ForwardCache { layers })
    }

    /// Gradient of a scalar loss with respect to the parameters, given the
    /// loss gradient with respect to the linear output.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(cache, d_output, &mut grad);
        grad
    }

    /// Accumulates (adds) the parameter gradient into `grad`.
    pub fn backward_into(&self, cache: &ForwardCache, d_output: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(d_output.len(), self.output_dim());
        debug_assert_eq!(grad.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = d_output.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let x = &cache.layers[l];
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (j, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (g, &v) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                        *g += d * v;
                    }
                    gb[j] += d;
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (j, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, &w) in prev.iter_mut().zip(&weights[j * n_in..(j + 1) * n_in]) {
                    *p += w * d;
                }
            }
            // rectifier derivative: active iff the post-activation is positive
            for (p, &a) in prev.iter_mut().zip(x) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}
