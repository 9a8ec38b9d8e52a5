//! Adam with bias correction and global-norm gradient clipping.

use crate::{Error, Result};

use super::Tensor;

/// Hyperparameters. Defaults: lr 4e-4, beta1 0.9, beta2 0.999, eps 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 4e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators, one pair per parameter tensor,
/// plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lens: &[usize]) -> Self {
        AdamState {
            t: 0,
            m: lens.iter().map(|&l| vec![0.0; l]).collect(),
            v: lens.iter().map(|&l| vec![0.0; l]).collect(),
        }
    }

    /// One optimizer step over parallel slices of parameters and
    /// gradients. Increments `t` exactly once.
    pub fn step(
        &mut self,
        cfg: &AdamConfig,
        params: &mut [&mut Tensor],
        grads: &[Vec<f64>],
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "adam step over {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let bias1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bias2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::invalid(format!(
                    "adam slot length mismatch: param {}, grad {}, moments {}",
                    p.len(),
                    g.len(),
                    m.len()
                )));
            }
            for (i, w) in p.values_mut().iter_mut().enumerate() {
                let gi = g[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

/// Global L2 norm over a set of gradient buffers.
pub fn global_norm(grads: &[Vec<f64>]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|&x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Scale all gradients by `max_norm / norm` when the global norm
/// exceeds `max_norm`; otherwise leave them untouched. Returns the
/// pre-clip norm.
pub fn clip_gradients(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}
