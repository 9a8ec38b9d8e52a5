//! Central finite-difference verification of the autodiff engine.
//!
//! [`gradient_check`] compares analytic gradients of a scalar-valued
//! graph function against `(f(x+eps) - f(x-eps)) / (2 eps)` coordinate
//! by coordinate, and [`standard_suite`] runs that comparison over
//! every differentiable op in the crate plus two recurrent
//! compositions, with per-op tolerances. Polynomial ops are held to a
//! much tighter bound since central differences are exact for them up
//! to roundoff.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

use super::gru::{bigru, GruCell, GruParams};
use super::{Graph, NodeId, Tensor};

/// Relative-error denominator floor.
const DENOM_FLOOR: f64 = 1e-8;

/// Default perturbation used by the suite.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct OpCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn evaluate<F>(inputs: &[Tensor], f: &F) -> Result<f64>
where
    F: Fn(&Graph, &[NodeId]) -> Result<NodeId>,
{
    let g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t, true)).collect();
    let loss = f(&g, &ids)?;
    if !g.shape(loss).is_empty() {
        return Err(Error::invalid(format!(
            "gradient check needs a scalar function, got shape {:?}",
            g.shape(loss)
        )));
    }
    Ok(g.scalar_value(loss))
}

/// Maximum relative error between analytic and central finite
/// differences over every coordinate of every input.
///
/// The function must be deterministic: it is evaluated twice up front
/// and any bitwise disagreement aborts the check as unreliable.
pub fn gradient_check<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<f64>
where
    F: Fn(&Graph, &[NodeId]) -> Result<NodeId>,
{
    let first = evaluate(inputs, &f)?;
    let second = evaluate(inputs, &f)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::UnreliableCheck(format!(
            "two forward passes disagree: {first} vs {second}"
        )));
    }

    let analytic: Vec<Vec<f64>> = {
        let g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t, true)).collect();
        let loss = f(&g, &ids)?;
        g.backward(loss)?;
        ids.iter().map(|&id| g.grad(id).unwrap_or_default()).collect()
    };

    let mut worst = 0.0f64;
    let mut perturbed: Vec<Tensor> = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        for coord in 0..input.len() {
            let original = input.values()[coord];
            perturbed[which].values_mut()[coord] = original + eps;
            let up = evaluate(&perturbed, &f)?;
            perturbed[which].values_mut()[coord] = original - eps;
            let down = evaluate(&perturbed, &f)?;
            perturbed[which].values_mut()[coord] = original;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[which][coord];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Loss reduction used everywhere below: a weighted sum with fixed
/// random weights, so no gradient is structurally zero (a plain sum
/// would kill softmax gradients entirely).
fn weighted_sum(g: &Graph, x: NodeId, weights: &Tensor) -> Result<NodeId> {
    let w = g.constant(weights);
    Ok(g.sum(g.mul(x, w)?))
}

fn check<F>(name: &'static str, tolerance: f64, inputs: &[Tensor], f: F) -> Result<OpCheck>
where
    F: Fn(&Graph, &[NodeId]) -> Result<NodeId>,
{
    let max_rel_err = gradient_check(inputs, DEFAULT_EPS, f)?;
    Ok(OpCheck { name, max_rel_err, tolerance, pass: max_rel_err < tolerance })
}

/// Like [`check`], but adds a linear anchor `sum_i <a_i, x_i - c_i>`
/// to the loss, with `c_i` fixed at the unperturbed inputs and anchor
/// magnitudes drawn from `[lo, hi)` with random sign.
///
/// A coordinate whose loss gradient lands near zero turns its check
/// into pure roundoff: at eps = 1e-5 the central difference of two
/// ~O(1) losses resolves ~1e-11 at best, which over the 1e-8
/// denominator floor reads as a relative error of ~1e-3 no matter how
/// correct the analytic gradient is. The anchor shifts every total
/// gradient away from zero — choosing `lo` above the largest gradient
/// the bare fixture can produce bounds the total below by the gap —
/// while the `- c_i` centering keeps the loss value at the evaluation
/// point unchanged, so the roundoff itself does not grow with the
/// anchor. Linear terms leave polynomial losses polynomial, and a
/// wrong path gradient still shifts the anchored total one-for-one.
fn anchored<F>(
    name: &'static str,
    tolerance: f64,
    inputs: Vec<Tensor>,
    (lo, hi): (f64, f64),
    rng: &mut ChaCha8Rng,
    f: F,
) -> Result<OpCheck>
where
    F: Fn(&Graph, &[NodeId]) -> Result<NodeId>,
{
    let anchors: Vec<Tensor> = inputs
        .iter()
        .map(|input| {
            let values = (0..input.len())
                .map(|_| {
                    let u: f64 = rng.gen_range(-1.0..1.0);
                    lo.copysign(u) + (hi - lo) * u
                })
                .collect();
            Tensor::new(input.shape(), values).expect("anchor shape")
        })
        .collect();
    let centers = inputs.clone();
    check(name, tolerance, &inputs, move |g, ids| {
        let mut loss = f(g, ids)?;
        for ((&id, anchor), center) in ids.iter().zip(&anchors).zip(&centers) {
            let centered = g.sub(id, g.constant(center))?;
            loss = g.add(loss, weighted_sum(g, centered, anchor)?)?;
        }
        Ok(loss)
    })
}

/// Finite-difference checks for every differentiable op, plus a GRU
/// cell with cross-entropy and a two-step bidirectional
/// encoder/decoder composition.
pub fn standard_suite(seed: u64) -> Result<Vec<OpCheck>> {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    fn t(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::uniform(shape, -0.8, 0.8, rng)
    }

    const POLY: f64 = 1e-8;
    const SMOOTH: f64 = 1e-4;
    // Anchor magnitudes per fixture family, each `lo` above the
    // largest gradient the bare fixture can produce (all values and
    // reduction weights below are drawn from [-0.8, 0.8]).
    const ELEMENTWISE: (f64, f64) = (1.4, 1.8);
    const MATMUL: (f64, f64) = (2.4, 2.8);

    let mut checks = Vec::new();

    let w6 = t(&[6], rng);
    checks.push(anchored("add", POLY, vec![t(&[6], rng), t(&[6], rng)], ELEMENTWISE, rng, {
        let w = w6.clone();
        move |g, ids| weighted_sum(g, g.add(ids[0], ids[1])?, &w)
    })?);
    checks.push(anchored("sub", POLY, vec![t(&[6], rng), t(&[6], rng)], ELEMENTWISE, rng, {
        let w = w6.clone();
        move |g, ids| weighted_sum(g, g.sub(ids[0], ids[1])?, &w)
    })?);
    checks.push(anchored("mul", POLY, vec![t(&[6], rng), t(&[6], rng)], ELEMENTWISE, rng, {
        let w = w6.clone();
        move |g, ids| weighted_sum(g, g.mul(ids[0], ids[1])?, &w)
    })?);

    let w32 = t(&[3, 2], rng);
    checks.push(anchored("matmul_matrix", POLY, vec![t(&[3, 4], rng), t(&[4, 2], rng)], MATMUL, rng, {
        let w = w32.clone();
        move |g, ids| weighted_sum(g, g.matmul(ids[0], ids[1])?, &w)
    })?);
    let w3 = t(&[3], rng);
    checks.push(anchored("matmul_vector", POLY, vec![t(&[3, 4], rng), t(&[4], rng)], MATMUL, rng, {
        let w = w3.clone();
        move |g, ids| weighted_sum(g, g.matmul(ids[0], ids[1])?, &w)
    })?);

    let w5 = t(&[5], rng);
    checks.push(anchored("concat", POLY, vec![t(&[2], rng), t(&[3], rng)], ELEMENTWISE, rng, {
        let w = w5.clone();
        move |g, ids| weighted_sum(g, g.concat(&[ids[0], ids[1]])?, &w)
    })?);
    let w23 = t(&[2, 3], rng);
    checks.push(anchored("stack_rows", POLY, vec![t(&[3], rng), t(&[3], rng)], ELEMENTWISE, rng, {
        let w = w23.clone();
        move |g, ids| weighted_sum(g, g.stack_rows(&[ids[0], ids[1]])?, &w)
    })?);
    let w4 = t(&[4], rng);
    checks.push(anchored("row", POLY, vec![t(&[3, 4], rng)], ELEMENTWISE, rng, {
        let w = w4.clone();
        move |g, ids| weighted_sum(g, g.row(ids[0], 1)?, &w)
    })?);
    // Every gradient of a plain sum is exactly 1, so it needs no anchor.
    checks.push(check("sum", POLY, &[t(&[7], rng)], |g, ids| Ok(g.sum(ids[0])))?);

    let w43 = t(&[4, 3], rng);
    checks.push(anchored("embedding", POLY, vec![t(&[5, 3], rng)], (2.0, 2.4), rng, {
        let w = w43.clone();
        move |g, ids| weighted_sum(g, g.embedding(ids[0], &[2, 0, 4, 2])?, &w)
    })?);

    let mask: Vec<f64> = (0..6).map(|i| if i % 3 == 0 { 0.0 } else { 1.25 }).collect();
    checks.push(anchored("dropout", POLY, vec![t(&[6], rng)], ELEMENTWISE, rng, {
        let w = w6.clone();
        move |g, ids| weighted_sum(g, g.dropout_with_mask(ids[0], mask.clone()), &w)
    })?);

    checks.push(anchored("sigmoid", SMOOTH, vec![t(&[6], rng)], (0.5, 0.8), rng, {
        let w = w6.clone();
        move |g, ids| weighted_sum(g, g.sigmoid(ids[0]), &w)
    })?);
    checks.push(anchored("tanh", SMOOTH, vec![t(&[6], rng)], (1.2, 1.6), rng, {
        let w = w6.clone();
        move |g, ids| weighted_sum(g, g.tanh(ids[0]), &w)
    })?);
    checks.push(anchored("softmax", SMOOTH, vec![t(&[2, 3], rng)], (2.0, 2.4), rng, {
        let w = w23.clone();
        move |g, ids| weighted_sum(g, g.softmax(ids[0])?, &w)
    })?);
    // Bounded logits keep every softmax probability well away from its
    // 0/1 target, so the bare gradients are already >= ~0.01.
    checks.push(check("cross_entropy", SMOOTH, &[t(&[3, 5], rng)], |g, ids| {
        g.cross_entropy(ids[0], &[4, 0, 2], u32::MAX)
    })?);

    // GRU cell driving a linear readout into cross-entropy. The two
    // recurrent compositions keep their anchors small so the check is
    // still dominated by the path gradients under test.
    let gru_inputs: Vec<Tensor> = {
        let cell = GruParams::init_uniform(3, 2, -0.8, 0.8, rng);
        let mut v: Vec<Tensor> = vec![t(&[3], rng), t(&[2], rng)];
        v.extend(cell.entries().iter().map(|(_, t)| (*t).clone()));
        v.push(t(&[4, 2], rng));
        v.push(t(&[4], rng));
        v
    };
    checks.push(anchored("gru_cell_xent", SMOOTH, gru_inputs, (0.05, 0.2), rng, |g, ids| {
        let cell = GruCell::from_ids(&ids[2..11]);
        let h = cell.step(g, ids[0], ids[1])?;
        let logits = g.stack_rows(&[g.add(g.matmul(ids[11], h)?, ids[12])?])?;
        g.cross_entropy(logits, &[3], u32::MAX)
    })?);

    // Two-step bidirectional encoder feeding a teacher-forced GRU
    // decoder with an embedding table and output layer.
    let e2e_inputs: Vec<Tensor> = {
        let fwd = GruParams::init_uniform(3, 2, -0.8, 0.8, rng);
        let bwd = GruParams::init_uniform(3, 2, -0.8, 0.8, rng);
        let dec = GruParams::init_uniform(2, 3, -0.8, 0.8, rng);
        let mut v: Vec<Tensor> = vec![t(&[3], rng), t(&[3], rng)];
        for cell in [&fwd, &bwd, &dec] {
            v.extend(cell.entries().iter().map(|(_, t)| (*t).clone()));
        }
        v.push(t(&[3, 4], rng)); // decoder init from the 2*2 global
        v.push(t(&[3], rng));
        v.push(t(&[4, 2], rng)); // embedding table, V=4
        v.push(t(&[4, 3], rng)); // output layer
        v.push(t(&[4], rng));
        v
    };
    checks.push(anchored("bigru_decoder_xent", SMOOTH, e2e_inputs, (0.05, 0.2), rng, |g, ids| {
        let fwd = GruCell::from_ids(&ids[2..11]);
        let bwd = GruCell::from_ids(&ids[11..20]);
        let dec = GruCell::from_ids(&ids[20..29]);
        let (init_w, init_b) = (ids[29], ids[30]);
        let (table, out_w, out_b) = (ids[31], ids[32], ids[33]);

        let globals = bigru(g, &fwd, &bwd, &[ids[0], ids[1]], 2)?;
        let emb = g.embedding(table, &[1, 3])?;
        let mut logit_rows = Vec::new();
        let mut targets = Vec::new();
        for (&g_k, step_targets) in globals.iter().zip([[3u32, 2], [2, 1]]) {
            let mut h = g.tanh(g.add(g.matmul(init_w, g_k)?, init_b)?);
            for pos in 0..2 {
                let x = g.row(emb, pos)?;
                h = dec.step(g, x, h)?;
                logit_rows.push(g.add(g.matmul(out_w, h)?, out_b)?);
            }
            targets.extend(step_targets);
        }
        let logits = g.stack_rows(&logit_rows)?;
        g.cross_entropy(logits, &targets, u32::MAX)
    })?);

    Ok(checks)
}
