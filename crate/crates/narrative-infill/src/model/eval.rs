//! Tape-free inference: the same forward pass as the graph, in plain
//! `f64` loops, for decoding and metrics where gradients are dead
//! weight. Kept numerically in lockstep with the graph ops (same
//! kernels, same accumulation order); the tests pin the equivalence.

use crate::corpus::{EncodedNarrative, PAD_ID};
use crate::nn::gru::GruParams;
use crate::nn::{log_sum_exp, stable_sigmoid, Tensor};
use crate::{Error, Result};

use super::ModelParams;

/// A read-only view over trained parameters with gradient-free forward
/// methods.
pub struct EvalModel<'a> {
    params: &'a ModelParams,
}

fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    debug_assert_eq!(cols, x.len());
    let mut out = vec![0.0; rows];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w.values()[i * cols..(i + 1) * cols];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    out
}

fn affine(w: &Tensor, x: &[f64], b: &Tensor) -> Vec<f64> {
    let mut out = matvec(w, x);
    for (o, bi) in out.iter_mut().zip(b.values()) {
        *o += bi;
    }
    out
}

fn gru_step(p: &GruParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let pre = |w: &Tensor, u: &Tensor, b: &Tensor| -> Vec<f64> {
        let wx = matvec(w, x);
        let uh = matvec(u, h);
        wx.iter().zip(&uh).zip(b.values()).map(|((a, c), d)| (a + c) + d).collect()
    };
    let z: Vec<f64> = pre(&p.wz, &p.uz, &p.bz).into_iter().map(stable_sigmoid).collect();
    let r: Vec<f64> = pre(&p.wr, &p.ur, &p.br).into_iter().map(stable_sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let wx = matvec(&p.wh, x);
    let uh = matvec(&p.uh, &rh);
    let cand: Vec<f64> = wx
        .iter()
        .zip(&uh)
        .zip(p.bh.values())
        .map(|((a, c), d)| ((a + c) + d).tanh())
        .collect();
    (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect()
}

impl<'a> EvalModel<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        EvalModel { params }
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    /// Contextual globals for a (pre-masked) feature matrix: one
    /// `2 * H_e` vector per step.
    pub fn globals(&self, features_masked: &Tensor) -> Result<Vec<Vec<f64>>> {
        let shape = features_masked.shape();
        if shape.len() != 2 || shape[1] != self.params.d_img() {
            return Err(Error::ShapeMismatch {
                op: "eval_globals",
                details: format!(
                    "expected [n, {}] features, got {shape:?}",
                    self.params.d_img()
                ),
            });
        }
        let n = shape[0];
        if n == 0 {
            return Err(Error::invalid("cannot encode a narrative with no steps"));
        }
        let p = self.params;
        let locals: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                affine(&p.proj_w, features_masked.row(k), &p.proj_b)
                    .into_iter()
                    .map(f64::tanh)
                    .collect()
            })
            .collect();
        let hidden = p.encoder_hidden();
        let mut fwd = vec![0.0; hidden];
        let mut fwd_states = Vec::with_capacity(n);
        for local in &locals {
            fwd = gru_step(&p.enc_fwd, local, &fwd);
            fwd_states.push(fwd.clone());
        }
        let mut bwd = vec![0.0; hidden];
        let mut bwd_states = vec![Vec::new(); n];
        for (k, local) in locals.iter().enumerate().rev() {
            bwd = gru_step(&p.enc_bwd, local, &bwd);
            bwd_states[k] = bwd.clone();
        }
        Ok(fwd_states
            .into_iter()
            .zip(bwd_states)
            .map(|(mut f, b)| {
                f.extend(b);
                f
            })
            .collect())
    }

    /// Decoder start state for one step's global feature.
    pub fn decoder_init(&self, g_k: &[f64]) -> Vec<f64> {
        affine(&self.params.dec_init_w, g_k, &self.params.dec_init_b)
            .into_iter()
            .map(f64::tanh)
            .collect()
    }

    /// Advance the decoder by feeding one token.
    pub fn decoder_step(&self, token: u32, h: &[f64]) -> Vec<f64> {
        let e = self.params.embed_dim();
        let r = token as usize;
        let x = &self.params.embed.values()[r * e..(r + 1) * e];
        gru_step(&self.params.dec, x, h)
    }

    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        affine(&self.params.out_w, h, &self.params.out_b)
    }

    /// Log-softmax over the vocabulary for a decoder state.
    pub fn log_probs(&self, h: &[f64]) -> Vec<f64> {
        let logits = self.logits(h);
        let lse = log_sum_exp(&logits);
        logits.into_iter().map(|v| v - lse).collect()
    }

    /// Fraction of non-PAD target positions whose argmax prediction is
    /// the reference token, teacher-forced with unmasked features.
    pub fn teacher_forced_accuracy(&self, set: &[EncodedNarrative]) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::invalid("accuracy over an empty set"));
        }
        let mut correct = 0usize;
        let mut total = 0usize;
        for enc in set {
            let globals = self.globals(&enc.feature_matrix)?;
            for (k, row) in enc.token_ids.iter().enumerate() {
                let mut h = self.decoder_init(&globals[k]);
                for t in 0..enc.step_lengths[k] + 1 {
                    h = self.decoder_step(row[t], &h);
                    let target = row[t + 1];
                    if target == PAD_ID {
                        continue;
                    }
                    let logits = self.logits(&h);
                    // Ties go to the lowest id, matching the decoder's
                    // tie-break convention.
                    let mut pred = 0usize;
                    for (i, &v) in logits.iter().enumerate() {
                        if v > logits[pred] {
                            pred = i;
                        }
                    }
                    total += 1;
                    if pred as u32 == target {
                        correct += 1;
                    }
                }
            }
        }
        Ok(correct as f64 / total as f64)
    }
}
