//! The training loop: epoch shuffling, mask planning, batched Adam
//! updates with gradient clipping, divergence detection and logging.
//!
//! Determinism contract: one master stream (seeded from the config)
//! drives initialization, shuffling, mask plans and per-narrative
//! dropout sub-seeds, in that order. Narrative gradients are computed
//! from their sub-seeds only and summed in shuffle order, so results
//! are bitwise reproducible regardless of worker-thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::EncodedNarrative;
use crate::nn::checkpoint::OptimizerSnapshot;
use crate::nn::optim::{clip_gradients, AdamConfig, AdamState};
use crate::nn::{Graph, Tensor};
use crate::{Error, Result};

use super::forward::{narrative_loss, narrative_loss_graph};
use super::mask::{mask_count_for_epoch, sample_mask_indices, MaskPlan};
use super::{ModelConfig, ModelParams};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean masked teacher-forced loss over the training set.
    pub train_loss: f64,
    /// Mean unmasked loss over the validation set, if one was given.
    pub val_loss: Option<f64>,
    /// Scheduled number of masked steps per narrative this epoch
    /// (before clamping to short narratives).
    pub mask_count: usize,
}

/// Everything `train` hands back.
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub params: ModelParams,
    /// Parameters at the best validation loss; the final parameters
    /// when no validation set was given.
    pub best_params: ModelParams,
    pub best_epoch: usize,
    /// Optimizer state taken at the same moment as `best_params`.
    pub optimizer: OptimizerSnapshot,
    pub logs: Vec<EpochLog>,
}

/// Per-narrative work order for one epoch, planned up front so the
/// master stream never depends on batch layout or thread count.
struct Job {
    narrative: usize,
    plan: MaskPlan,
    dropout_seed: u64,
}

fn narrative_grads(
    params: &ModelParams,
    encoded: &EncodedNarrative,
    plan: &MaskPlan,
    dropout: f64,
    dropout_seed: u64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let g = Graph::new();
    let bound = params.bind(&g, true);
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let loss = narrative_loss_graph(&g, &bound, encoded, plan, dropout, true, &mut rng)?;
    let value = g.scalar_value(loss);
    g.backward(loss)?;
    let grads = bound
        .ids()
        .iter()
        .map(|&id| g.grad(id).expect("trainable leaves always carry gradients"))
        .collect();
    Ok((value, grads))
}

/// Mean unmasked eval-mode loss over a narrative set.
pub fn validation_loss(params: &ModelParams, set: &[EncodedNarrative]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("validation loss over an empty set"));
    }
    let losses: Vec<f64> = set
        .par_iter()
        .map(|enc| {
            let mut rng = ChaCha8Rng::seed_from_u64(0); // untouched in eval mode
            narrative_loss(params, enc, &MaskPlan::empty(), 0.0, false, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Train a fresh model on `train_set`, optionally tracking `val_set`.
pub fn train(
    train_set: &[EncodedNarrative],
    val_set: &[EncodedNarrative],
    vocab_len: usize,
    config: &ModelConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::invalid("cannot train on an empty narrative set"));
    }
    config.validate()?;

    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(config, vocab_len, &mut master);
    let mut adam = AdamState::new(&params.lens());
    let adam_cfg = AdamConfig { lr: config.lr, ..AdamConfig::default() };

    let mut logs = Vec::with_capacity(config.epochs);
    let mut best_params = params.clone();
    let mut best_adam = adam.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::INFINITY;

    for epoch in 0..config.epochs {
        let scheduled = config
            .mask_count
            .unwrap_or_else(|| mask_count_for_epoch(epoch, config.epochs, config.variant));

        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut master);
        let jobs: Vec<Job> = order
            .into_iter()
            .map(|narrative| {
                let n = train_set[narrative].n_steps();
                let plan = sample_mask_indices(n, scheduled.min(n), &mut master)?;
                Ok(Job { narrative, plan, dropout_seed: master.gen() })
            })
            .collect::<Result<_>>()?;

        let mut loss_sum = 0.0;
        for (step, batch) in jobs.chunks(config.batch_size).enumerate() {
            let results: Vec<(f64, Vec<Vec<f64>>)> = batch
                .par_iter()
                .map(|job| {
                    narrative_grads(
                        &params,
                        &train_set[job.narrative],
                        &job.plan,
                        config.dropout,
                        job.dropout_seed,
                    )
                })
                .collect::<Result<_>>()?;

            let mut batch_loss = 0.0;
            let mut grads: Vec<Vec<f64>> =
                params.lens().iter().map(|&len| vec![0.0; len]).collect();
            for (loss, narrative_grads) in &results {
                batch_loss += loss;
                for (acc, g) in grads.iter_mut().zip(narrative_grads) {
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += v;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, step });
            }
            loss_sum += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g.iter_mut() {
                    *v *= scale;
                }
            }
            clip_gradients(&mut grads, config.clip);
            let mut tensors: Vec<&mut Tensor> =
                params.named_mut().into_iter().map(|(_, t)| t).collect();
            adam.step(&adam_cfg, &mut tensors, &grads)?;
        }

        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss =
            if val_set.is_empty() { None } else { Some(validation_loss(&params, val_set)?) };
        if let Some(v) = val_loss {
            if v < best_val {
                best_val = v;
                best_params = params.clone();
                best_adam = adam.clone();
                best_epoch = epoch;
            }
        }
        logs.push(EpochLog { epoch, train_loss, val_loss, mask_count: scheduled });
    }

    if val_set.is_empty() {
        best_params = params.clone();
        best_adam = adam.clone();
        best_epoch = config.epochs.saturating_sub(1);
    }
    let optimizer = OptimizerSnapshot { config: adam_cfg, state: best_adam };
    Ok(TrainOutcome { params, best_params, best_epoch, optimizer, logs })
}
