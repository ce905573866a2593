//! ADAM with bias correction.

use crate::mlp::flush_tiny;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps: Self::EPS,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step: `θ ← θ − lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed under the optimizer");
        assert_eq!(grads.len(), self.m.len(), "gradient shape mismatch");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        // lr·m̂/(√v̂ + ε) rewritten with the bias corrections folded into two
        // scalars, so the inner loop has one sqrt and one division
        let step_size = lr * c2.sqrt() / c1;
        let eps_hat = self.eps * c2.sqrt();
        let (b1, b2) = (self.beta1, self.beta2);
        let n = params.len();
        let (m, v, grads) = (&mut self.m[..n], &mut self.v[..n], &grads[..n]);
        for i in 0..n {
            let g = grads[i];
            // moments of parameters that stopped receiving gradient decay
            // geometrically; flush them before they turn subnormal
            m[i] = flush_tiny(b1 * m[i] + (1.0 - b1) * g);
            v[i] = flush_tiny(b2 * v[i] + (1.0 - b2) * g * g);
            params[i] -= step_size * m[i] / (v[i].sqrt() + eps_hat);
        }
    }
}
