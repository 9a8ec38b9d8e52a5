//! Differentiable forward passes: feature projection, narrative context
//! encoding, teacher-forced decoding and the per-narrative loss.

use rand::Rng;

use crate::corpus::{EncodedNarrative, BOS_ID, PAD_ID};
use crate::nn::gru::bigru;
use crate::nn::{Graph, NodeId, Tensor};
use crate::{Error, Result};

use super::mask::{apply_mask, MaskPlan};
use super::params::BoundParams;

/// Graph nodes of one encoded narrative: projected (and, at train time,
/// dropout-thinned) local features plus the bidirectional globals, one
/// of each per step.
pub struct NarrativeEncoding {
    /// `n` nodes of width `H_e`, as fed to the context BiGRU.
    pub locals: Vec<NodeId>,
    /// `n` nodes of width `2 * H_e`.
    pub globals: Vec<NodeId>,
}

/// Encode pre-masked feature rows that already live on the graph. Rows
/// must be `[D_img]` vectors.
pub fn encode_rows<R: Rng>(
    g: &Graph,
    bound: &BoundParams,
    rows: &[NodeId],
    dropout: f64,
    train: bool,
    rng: &mut R,
) -> Result<NarrativeEncoding> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot encode a narrative with no steps"));
    }
    let mut locals = Vec::with_capacity(rows.len());
    for &row in rows {
        let projected = g.tanh(g.add(g.matmul(bound.proj_w, row)?, bound.proj_b)?);
        locals.push(g.dropout(projected, dropout, train, rng)?);
    }
    let hidden = g.shape(bound.proj_b)[0];
    let globals = bigru(g, &bound.enc_fwd, &bound.enc_bwd, &locals, hidden)?;
    Ok(NarrativeEncoding { locals, globals })
}

/// Project and contextualize a masked feature matrix. Masking must
/// already have been applied; rows enter the graph as constants.
pub fn encode_narrative_context<R: Rng>(
    g: &Graph,
    bound: &BoundParams,
    features_masked: &Tensor,
    dropout: f64,
    train: bool,
    rng: &mut R,
) -> Result<NarrativeEncoding> {
    let shape = features_masked.shape();
    if shape.len() != 2 {
        return Err(Error::ShapeMismatch {
            op: "encode_narrative_context",
            details: format!("expected rank-2 features, got {shape:?}"),
        });
    }
    let rows: Vec<NodeId> = (0..shape[0])
        .map(|k| g.constant(&Tensor::vector(features_masked.row(k).to_vec())))
        .collect();
    encode_rows(g, bound, &rows, dropout, train, rng)
}

/// Decoder initial hidden state for one step: `tanh(W g_k + b)`.
pub fn decoder_init(g: &Graph, bound: &BoundParams, g_k: NodeId) -> Result<NodeId> {
    Ok(g.tanh(g.add(g.matmul(bound.dec_init_w, g_k)?, bound.dec_init_b)?))
}

/// Unroll the decoder over the first `positions` inputs of a target
/// row, producing one `[V]` logit row per input position (position t
/// predicts `target_ids[t + 1]`).
fn unrolled_logit_rows(
    g: &Graph,
    bound: &BoundParams,
    g_k: NodeId,
    target_ids: &[u32],
    positions: usize,
) -> Result<Vec<NodeId>> {
    if target_ids.first() != Some(&BOS_ID) {
        return Err(Error::invalid(format!(
            "decoder target row must start with BOS, got {:?}",
            target_ids.first()
        )));
    }
    debug_assert!(positions < target_ids.len());
    let emb = g.embedding(bound.embed, &target_ids[..positions])?;
    let mut h = decoder_init(g, bound, g_k)?;
    let mut rows = Vec::with_capacity(positions);
    for t in 0..positions {
        let x = g.row(emb, t)?;
        h = bound.dec.step(g, x, h)?;
        rows.push(g.add(g.matmul(bound.out_w, h)?, bound.out_b)?);
    }
    Ok(rows)
}

/// Teacher-forced logits for one step given its global feature:
/// `(W - 1, V)` where `W` is the id-row width.
pub fn decode_step_teacher_forced(
    g: &Graph,
    bound: &BoundParams,
    g_k: NodeId,
    target_ids: &[u32],
) -> Result<NodeId> {
    if target_ids.len() < 2 {
        return Err(Error::invalid("target row needs at least BOS and one prediction"));
    }
    let rows = unrolled_logit_rows(g, bound, g_k, target_ids, target_ids.len() - 1)?;
    g.stack_rows(&rows)
}

/// Build the full training loss of one narrative on the graph: mask,
/// encode, decode every step teacher-forced, and take one mean
/// cross-entropy over all non-PAD target positions of all steps
/// (masked steps included).
///
/// The unroll per step stops after predicting EOS — later positions
/// would only ever predict PAD, which the loss ignores, so the value
/// and every gradient are unchanged by the truncation.
pub fn narrative_loss_graph<R: Rng>(
    g: &Graph,
    bound: &BoundParams,
    encoded: &EncodedNarrative,
    plan: &MaskPlan,
    dropout: f64,
    train: bool,
    rng: &mut R,
) -> Result<NodeId> {
    let masked = apply_mask(&encoded.feature_matrix, plan)?;
    let enc = encode_narrative_context(g, bound, &masked, dropout, train, rng)?;
    let width = encoded.row_width();
    let mut logit_rows = Vec::new();
    let mut targets = Vec::new();
    for (k, row) in encoded.token_ids.iter().enumerate() {
        let positions = (encoded.step_lengths[k] + 1).min(width - 1);
        logit_rows.extend(unrolled_logit_rows(g, bound, enc.globals[k], row, positions)?);
        targets.extend_from_slice(&row[1..positions + 1]);
    }
    let logits = g.stack_rows(&logit_rows)?;
    g.cross_entropy(logits, &targets, PAD_ID)
}

/// Convenience wrapper computing the loss value on a throwaway graph.
pub fn narrative_loss<R: Rng>(
    params: &super::ModelParams,
    encoded: &EncodedNarrative,
    plan: &MaskPlan,
    dropout: f64,
    train: bool,
    rng: &mut R,
) -> Result<f64> {
    let g = Graph::new();
    let bound = params.bind(&g, false);
    let loss = narrative_loss_graph(&g, &bound, encoded, plan, dropout, train, rng)?;
    Ok(g.scalar_value(loss))
}
