//! GRU cells and the bidirectional encoder pass.
//!
//! Gate convention, fixed across the crate:
//!
//! ```text
//! z  = sigmoid(Wz x + Uz h + bz)
//! r  = sigmoid(Wr x + Ur h + br)
//! h~ = tanh(Wh x + Uh (r * h) + bh)
//! h' = (1 - z) * h + z * h~
//! ```
//!
//! so all-zero parameters halve the hidden state each step.

use rand::Rng;

use crate::Result;

use super::{Graph, NodeId, Tensor};

/// Host-side storage for one GRU cell: three input matrices `H x X`,
/// three hidden matrices `H x H` and three biases `H`.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub wz: Tensor,
    pub uz: Tensor,
    pub bz: Tensor,
    pub wr: Tensor,
    pub ur: Tensor,
    pub br: Tensor,
    pub wh: Tensor,
    pub uh: Tensor,
    pub bh: Tensor,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            wz: Tensor::zeros(&[hidden, input]),
            uz: Tensor::zeros(&[hidden, hidden]),
            bz: Tensor::zeros(&[hidden]),
            wr: Tensor::zeros(&[hidden, input]),
            ur: Tensor::zeros(&[hidden, hidden]),
            br: Tensor::zeros(&[hidden]),
            wh: Tensor::zeros(&[hidden, input]),
            uh: Tensor::zeros(&[hidden, hidden]),
            bh: Tensor::zeros(&[hidden]),
        }
    }

    /// Weight matrices drawn uniformly from `(lo, hi)`, biases zero.
    pub fn init_uniform<R: Rng>(input: usize, hidden: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        GruParams {
            wz: Tensor::uniform(&[hidden, input], lo, hi, rng),
            uz: Tensor::uniform(&[hidden, hidden], lo, hi, rng),
            bz: Tensor::zeros(&[hidden]),
            wr: Tensor::uniform(&[hidden, input], lo, hi, rng),
            ur: Tensor::uniform(&[hidden, hidden], lo, hi, rng),
            br: Tensor::zeros(&[hidden]),
            wh: Tensor::uniform(&[hidden, input], lo, hi, rng),
            uh: Tensor::uniform(&[hidden, hidden], lo, hi, rng),
            bh: Tensor::zeros(&[hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.bz.shape()[0]
    }

    /// Field views in the crate-wide canonical order (gate-major:
    /// z, r, h; within each gate W, U, b is interleaved as below).
    pub fn entries(&self) -> [(&'static str, &Tensor); 9] {
        [
            ("wz", &self.wz),
            ("uz", &self.uz),
            ("bz", &self.bz),
            ("wr", &self.wr),
            ("ur", &self.ur),
            ("br", &self.br),
            ("wh", &self.wh),
            ("uh", &self.uh),
            ("bh", &self.bh),
        ]
    }

    pub fn entries_mut(&mut self) -> [(&'static str, &mut Tensor); 9] {
        [
            ("wz", &mut self.wz),
            ("uz", &mut self.uz),
            ("bz", &mut self.bz),
            ("wr", &mut self.wr),
            ("ur", &mut self.ur),
            ("br", &mut self.br),
            ("wh", &mut self.wh),
            ("uh", &mut self.uh),
            ("bh", &mut self.bh),
        ]
    }

    /// Insert every tensor as a graph leaf, in canonical order.
    pub fn bind(&self, g: &Graph, trainable: bool) -> GruCell {
        let ids: Vec<NodeId> =
            self.entries().iter().map(|(_, t)| g.leaf(t, trainable)).collect();
        GruCell::from_ids(&ids)
    }
}

/// Graph-bound GRU cell: the nine parameter leaves of one [`GruParams`].
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub wz: NodeId,
    pub uz: NodeId,
    pub bz: NodeId,
    pub wr: NodeId,
    pub ur: NodeId,
    pub br: NodeId,
    pub wh: NodeId,
    pub uh: NodeId,
    pub bh: NodeId,
}

impl GruCell {
    /// Reassemble from nine NodeIds in canonical [`GruParams::entries`]
    /// order.
    pub fn from_ids(ids: &[NodeId]) -> Self {
        assert_eq!(ids.len(), 9, "a GRU cell has exactly 9 parameter tensors");
        GruCell {
            wz: ids[0],
            uz: ids[1],
            bz: ids[2],
            wr: ids[3],
            ur: ids[4],
            br: ids[5],
            wh: ids[6],
            uh: ids[7],
            bh: ids[8],
        }
    }

    /// One recurrence step: `x` is `[X]`, `h` is `[H]`, result is `[H]`.
    pub fn step(&self, g: &Graph, x: NodeId, h: NodeId) -> Result<NodeId> {
        let z = g.sigmoid(g.add(g.add(g.matmul(self.wz, x)?, g.matmul(self.uz, h)?)?, self.bz)?);
        let r = g.sigmoid(g.add(g.add(g.matmul(self.wr, x)?, g.matmul(self.ur, h)?)?, self.br)?);
        let rh = g.mul(r, h)?;
        let cand =
            g.tanh(g.add(g.add(g.matmul(self.wh, x)?, g.matmul(self.uh, rh)?)?, self.bh)?);
        let hidden = g.shape(h)[0];
        let ones = g.constant(&Tensor::vector(vec![1.0; hidden]));
        let keep = g.mul(g.sub(ones, z)?, h)?;
        let update = g.mul(z, cand)?;
        g.add(keep, update)
    }
}

/// Zero initial state of width `hidden`.
pub fn zero_state(g: &Graph, hidden: usize) -> NodeId {
    g.constant(&Tensor::zeros(&[hidden]))
}

/// Run a cell over a sequence from a zero initial state, returning the
/// hidden state after each input.
pub fn gru_sequence(
    g: &Graph,
    cell: &GruCell,
    inputs: &[NodeId],
    hidden: usize,
) -> Result<Vec<NodeId>> {
    let mut h = zero_state(g, hidden);
    let mut states = Vec::with_capacity(inputs.len());
    for &x in inputs {
        h = cell.step(g, x, h)?;
        states.push(h);
    }
    Ok(states)
}

/// Bidirectional pass: forward states left-to-right, backward states
/// right-to-left, both from zero initial states; output at position k
/// is `concat(fwd_k, bwd_k)` of width `2 * hidden`.
pub fn bigru(
    g: &Graph,
    fwd: &GruCell,
    bwd: &GruCell,
    inputs: &[NodeId],
    hidden: usize,
) -> Result<Vec<NodeId>> {
    let fwd_states = gru_sequence(g, fwd, inputs, hidden)?;
    let reversed: Vec<NodeId> = inputs.iter().rev().copied().collect();
    let mut bwd_states = gru_sequence(g, bwd, &reversed, hidden)?;
    bwd_states.reverse();
    fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(f, b)| g.concat(&[f, b]))
        .collect()
}
