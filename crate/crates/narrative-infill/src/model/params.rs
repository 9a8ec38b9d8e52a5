//! All trainable weights of the architecture, their initialization,
//! graph binding and checkpoint round-trip.

use rand::Rng;

use crate::nn::checkpoint::{Checkpoint, OptimizerSnapshot};
use crate::nn::gru::{GruCell, GruParams};
use crate::nn::{Graph, NodeId, Tensor};
use crate::{Error, Result};

use super::ModelConfig;

/// Initialization range for weight matrices; biases start at zero.
pub const INIT_RANGE: f64 = 0.08;

/// Host-side parameter storage. The canonical tensor order — the one
/// used by [`named`](ModelParams::named), [`bind`](ModelParams::bind),
/// the optimizer slots and checkpoints — is: projection, forward
/// encoder GRU, backward encoder GRU, decoder GRU, decoder init,
/// embedding, output layer.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// `[H_e, D_img]` projection of raw features to encoder width.
    pub proj_w: Tensor,
    pub proj_b: Tensor,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    /// Decoder GRU over embeddings: input `E`, hidden `H_d`.
    pub dec: GruParams,
    /// `[H_d, 2*H_e]` map from a global feature to the decoder's
    /// initial hidden state.
    pub dec_init_w: Tensor,
    pub dec_init_b: Tensor,
    /// `[V, E]` token embedding table.
    pub embed: Tensor,
    /// `[V, H_d]` output projection and `[V]` bias.
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl ModelParams {
    /// Uniform(-0.08, 0.08) weights, zero biases, sized from the config
    /// and the actual vocabulary length.
    pub fn init<R: Rng>(config: &ModelConfig, vocab_len: usize, rng: &mut R) -> Self {
        let (d, he, hd, e) =
            (config.d_img, config.encoder_hidden, config.decoder_hidden, config.embed_dim);
        let u = |shape: &[usize], rng: &mut R| Tensor::uniform(shape, -INIT_RANGE, INIT_RANGE, rng);
        ModelParams {
            proj_w: u(&[he, d], rng),
            proj_b: Tensor::zeros(&[he]),
            enc_fwd: GruParams::init_uniform(he, he, -INIT_RANGE, INIT_RANGE, rng),
            enc_bwd: GruParams::init_uniform(he, he, -INIT_RANGE, INIT_RANGE, rng),
            dec: GruParams::init_uniform(e, hd, -INIT_RANGE, INIT_RANGE, rng),
            dec_init_w: u(&[hd, 2 * he], rng),
            dec_init_b: Tensor::zeros(&[hd]),
            embed: u(&[vocab_len, e], rng),
            out_w: u(&[vocab_len, hd], rng),
            out_b: Tensor::zeros(&[vocab_len]),
        }
    }

    pub fn zeros(config: &ModelConfig, vocab_len: usize) -> Self {
        let (d, he, hd, e) =
            (config.d_img, config.encoder_hidden, config.decoder_hidden, config.embed_dim);
        ModelParams {
            proj_w: Tensor::zeros(&[he, d]),
            proj_b: Tensor::zeros(&[he]),
            enc_fwd: GruParams::zeros(he, he),
            enc_bwd: GruParams::zeros(he, he),
            dec: GruParams::zeros(e, hd),
            dec_init_w: Tensor::zeros(&[hd, 2 * he]),
            dec_init_b: Tensor::zeros(&[hd]),
            embed: Tensor::zeros(&[vocab_len, e]),
            out_w: Tensor::zeros(&[vocab_len, hd]),
            out_b: Tensor::zeros(&[vocab_len]),
        }
    }

    pub fn d_img(&self) -> usize {
        self.proj_w.shape()[1]
    }

    pub fn encoder_hidden(&self) -> usize {
        self.proj_w.shape()[0]
    }

    pub fn decoder_hidden(&self) -> usize {
        self.dec_init_w.shape()[0]
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.shape()[1]
    }

    pub fn vocab_len(&self) -> usize {
        self.embed.shape()[0]
    }

    /// Named views over every tensor in canonical order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::with_capacity(34);
        out.push(("proj_w".into(), &self.proj_w));
        out.push(("proj_b".into(), &self.proj_b));
        for (prefix, cell) in
            [("enc_fwd", &self.enc_fwd), ("enc_bwd", &self.enc_bwd), ("dec", &self.dec)]
        {
            for (suffix, t) in cell.entries() {
                out.push((format!("{prefix}.{suffix}"), t));
            }
        }
        out.push(("dec_init_w".into(), &self.dec_init_w));
        out.push(("dec_init_b".into(), &self.dec_init_b));
        out.push(("embed".into(), &self.embed));
        out.push(("out_w".into(), &self.out_w));
        out.push(("out_b".into(), &self.out_b));
        out
    }

    /// Mutable views in the same order as [`named`](Self::named).
    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::with_capacity(34);
        out.push(("proj_w".into(), &mut self.proj_w));
        out.push(("proj_b".into(), &mut self.proj_b));
        for (prefix, cell) in [
            ("enc_fwd", &mut self.enc_fwd),
            ("enc_bwd", &mut self.enc_bwd),
            ("dec", &mut self.dec),
        ] {
            for (suffix, t) in cell.entries_mut() {
                out.push((format!("{prefix}.{suffix}"), t));
            }
        }
        out.push(("dec_init_w".into(), &mut self.dec_init_w));
        out.push(("dec_init_b".into(), &mut self.dec_init_b));
        out.push(("embed".into(), &mut self.embed));
        out.push(("out_w".into(), &mut self.out_w));
        out.push(("out_b".into(), &mut self.out_b));
        out
    }

    /// Flat value counts per tensor, for optimizer slot allocation.
    pub fn lens(&self) -> Vec<usize> {
        self.named().iter().map(|(_, t)| t.len()).collect()
    }

    /// Insert every tensor as a graph leaf in canonical order.
    pub fn bind(&self, g: &Graph, trainable: bool) -> BoundParams {
        let ids: Vec<NodeId> =
            self.named().iter().map(|(_, t)| g.leaf(t, trainable)).collect();
        BoundParams::from_ids(&ids)
    }

    /// Package into a checkpoint together with optimizer state.
    pub fn to_checkpoint(&self, optimizer: OptimizerSnapshot) -> Checkpoint {
        Checkpoint {
            params: self.named().into_iter().map(|(n, t)| (n, t.clone())).collect(),
            optimizer,
        }
    }

    /// Rebuild from a checkpoint, verifying names, order and shape
    /// consistency.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<ModelParams> {
        fn shaped(
            params: &[(String, Tensor)],
            idx: usize,
            name: &str,
            rank: usize,
        ) -> Result<Tensor> {
            let (found, tensor) = params.get(idx).ok_or_else(|| {
                Error::Checkpoint(format!("missing parameter {name} at position {idx}"))
            })?;
            if found != name {
                return Err(Error::Checkpoint(format!(
                    "parameter {idx} is named {found:?}, expected {name:?}"
                )));
            }
            if tensor.shape().len() != rank {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected rank {rank}",
                    tensor.shape()
                )));
            }
            Ok(tensor.clone())
        }
        fn gru(params: &[(String, Tensor)], base: usize, prefix: &str) -> Result<GruParams> {
            Ok(GruParams {
                wz: shaped(params, base, &format!("{prefix}.wz"), 2)?,
                uz: shaped(params, base + 1, &format!("{prefix}.uz"), 2)?,
                bz: shaped(params, base + 2, &format!("{prefix}.bz"), 1)?,
                wr: shaped(params, base + 3, &format!("{prefix}.wr"), 2)?,
                ur: shaped(params, base + 4, &format!("{prefix}.ur"), 2)?,
                br: shaped(params, base + 5, &format!("{prefix}.br"), 1)?,
                wh: shaped(params, base + 6, &format!("{prefix}.wh"), 2)?,
                uh: shaped(params, base + 7, &format!("{prefix}.uh"), 2)?,
                bh: shaped(params, base + 8, &format!("{prefix}.bh"), 1)?,
            })
        }
        let p = &ck.params;
        if p.len() != 34 {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} parameters, expected 34",
                p.len()
            )));
        }
        let params = ModelParams {
            proj_w: shaped(p, 0, "proj_w", 2)?,
            proj_b: shaped(p, 1, "proj_b", 1)?,
            enc_fwd: gru(p, 2, "enc_fwd")?,
            enc_bwd: gru(p, 11, "enc_bwd")?,
            dec: gru(p, 20, "dec")?,
            dec_init_w: shaped(p, 29, "dec_init_w", 2)?,
            dec_init_b: shaped(p, 30, "dec_init_b", 1)?,
            embed: shaped(p, 31, "embed", 2)?,
            out_w: shaped(p, 32, "out_w", 2)?,
            out_b: shaped(p, 33, "out_b", 1)?,
        };
        params.check_consistency()?;
        Ok(params)
    }

    /// Cross-tensor shape constraints that tie the architecture together.
    pub fn check_consistency(&self) -> Result<()> {
        let he = self.encoder_hidden();
        let hd = self.decoder_hidden();
        let e = self.embed_dim();
        let v = self.vocab_len();
        let checks = [
            (self.proj_b.shape() == [he], "proj_b matches projection rows"),
            (self.enc_fwd.bz.shape() == [he], "forward encoder hidden width"),
            (self.enc_fwd.wz.shape() == [he, he], "forward encoder input width"),
            (self.enc_bwd.bz.shape() == [he], "backward encoder hidden width"),
            (self.enc_bwd.wz.shape() == [he, he], "backward encoder input width"),
            (self.dec.bz.shape() == [hd], "decoder hidden width"),
            (self.dec.wz.shape() == [hd, e], "decoder consumes embeddings"),
            (self.dec_init_w.shape() == [hd, 2 * he], "decoder init consumes globals"),
            (self.dec_init_b.shape() == [hd], "decoder init bias"),
            (self.out_w.shape() == [v, hd], "output layer reads decoder state"),
            (self.out_b.shape() == [v], "output bias per token"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::Checkpoint(format!("inconsistent shapes: {what}")));
            }
        }
        Ok(())
    }
}

/// Graph-bound counterpart of [`ModelParams`].
pub struct BoundParams {
    pub proj_w: NodeId,
    pub proj_b: NodeId,
    pub enc_fwd: GruCell,
    pub enc_bwd: GruCell,
    pub dec: GruCell,
    pub dec_init_w: NodeId,
    pub dec_init_b: NodeId,
    pub embed: NodeId,
    pub out_w: NodeId,
    pub out_b: NodeId,
}

impl BoundParams {
    /// Reassemble from 34 leaf ids in canonical order. Useful when the
    /// leaves were created by external drivers such as the gradient
    /// checker.
    pub fn from_ids(ids: &[NodeId]) -> BoundParams {
        assert_eq!(ids.len(), 34, "the model has exactly 34 parameter tensors");
        BoundParams {
            proj_w: ids[0],
            proj_b: ids[1],
            enc_fwd: GruCell::from_ids(&ids[2..11]),
            enc_bwd: GruCell::from_ids(&ids[11..20]),
            dec: GruCell::from_ids(&ids[20..29]),
            dec_init_w: ids[29],
            dec_init_b: ids[30],
            embed: ids[31],
            out_w: ids[32],
            out_b: ids[33],
        }
    }

    /// The leaf ids in canonical order (for gradient extraction).
    pub fn ids(&self) -> Vec<NodeId> {
        let mut ids = vec![self.proj_w, self.proj_b];
        for cell in [&self.enc_fwd, &self.enc_bwd, &self.dec] {
            ids.extend([
                cell.wz, cell.uz, cell.bz, cell.wr, cell.ur, cell.br, cell.wh, cell.uh, cell.bh,
            ]);
        }
        ids.extend([self.dec_init_w, self.dec_init_b, self.embed, self.out_w, self.out_b]);
        ids
    }
}
