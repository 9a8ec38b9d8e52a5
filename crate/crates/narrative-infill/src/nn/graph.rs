//! Reverse-mode autodiff on a flat tape.
//!
//! A [`Graph`] owns every intermediate tensor of one forward pass as a
//! [`Node`] in insertion order, which is already a topological order, so
//! [`Graph::backward`] is a single reverse sweep. Ops record their parent
//! ids; parents always precede children on the tape.
//!
//! The op set is deliberately small: exactly what GRU encoder/decoder
//! stacks with an embedding table, a softmax output layer and a padded
//! cross-entropy loss require.

use std::cell::RefCell;

use rand::Rng;

use crate::{Error, Result};

use super::Tensor;

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Matmul(NodeId, NodeId),
    Concat(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    Row(NodeId, usize),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    Sum(NodeId),
    Embedding { table: NodeId, ids: Vec<u32> },
    Dropout { input: NodeId, mask: Vec<f64> },
    CrossEntropy { logits: NodeId, targets: Vec<u32>, ignore: u32 },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
    /// Empty until `backward` runs; then same length as `values` for
    /// nodes that require gradients.
    grad: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// A single-threaded forward tape. Create one per forward/backward pass.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.borrow().len()
    }

    fn push(&self, shape: Vec<usize>, values: Vec<f64>, requires_grad: bool, op: Op) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { shape, values, grad: Vec::new(), requires_grad, op });
        NodeId(nodes.len() - 1)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes.borrow()[id.0].requires_grad
    }

    /// Insert a tensor as a leaf. `requires_grad` marks it as a target
    /// for gradient accumulation.
    pub fn leaf(&self, t: &Tensor, requires_grad: bool) -> NodeId {
        self.push(t.shape().to_vec(), t.values().to_vec(), requires_grad, Op::Leaf)
    }

    /// Leaf that never receives gradients.
    pub fn constant(&self, t: &Tensor) -> NodeId {
        self.leaf(t, false)
    }

    pub fn shape(&self, id: NodeId) -> Vec<usize> {
        self.nodes.borrow()[id.0].shape.clone()
    }

    pub fn value(&self, id: NodeId) -> Vec<f64> {
        self.nodes.borrow()[id.0].values.clone()
    }

    /// Read a node's values without cloning.
    pub fn with_values<T>(&self, id: NodeId, f: impl FnOnce(&[f64]) -> T) -> T {
        f(&self.nodes.borrow()[id.0].values)
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        let nodes = self.nodes.borrow();
        debug_assert_eq!(nodes[id.0].values.len(), 1);
        nodes[id.0].values[0]
    }

    /// Gradient accumulated by the last `backward`, if this node
    /// required one.
    pub fn grad(&self, id: NodeId) -> Option<Vec<f64>> {
        let nodes = self.nodes.borrow();
        let n = &nodes[id.0];
        if n.grad.is_empty() && !n.values.is_empty() {
            None
        } else {
            Some(n.grad.clone())
        }
    }

    fn binary_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<Vec<usize>> {
        let nodes = self.nodes.borrow();
        let (sa, sb) = (&nodes[a.0].shape, &nodes[b.0].shape);
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                details: format!("lhs {:?} vs rhs {:?}", sa, sb),
            });
        }
        Ok(sa.clone())
    }

    pub fn add(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.binary_shape("add", a, b)?;
        let values = {
            let nodes = self.nodes.borrow();
            nodes[a.0]
                .values
                .iter()
                .zip(&nodes[b.0].values)
                .map(|(x, y)| x + y)
                .collect()
        };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(shape, values, rg, Op::Add(a, b)))
    }

    pub fn sub(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.binary_shape("sub", a, b)?;
        let values = {
            let nodes = self.nodes.borrow();
            nodes[a.0]
                .values
                .iter()
                .zip(&nodes[b.0].values)
                .map(|(x, y)| x - y)
                .collect()
        };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(shape, values, rg, Op::Sub(a, b)))
    }

    pub fn mul(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.binary_shape("mul", a, b)?;
        let values = {
            let nodes = self.nodes.borrow();
            nodes[a.0]
                .values
                .iter()
                .zip(&nodes[b.0].values)
                .map(|(x, y)| x * y)
                .collect()
        };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(shape, values, rg, Op::Mul(a, b)))
    }

    /// Matrix product. Supports `[m,k] x [k,n] -> [m,n]` and the
    /// matrix-vector case `[m,k] x [k] -> [m]`.
    pub fn matmul(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (shape, values) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            match (na.shape.as_slice(), nb.shape.as_slice()) {
                (&[m, k], &[k2, n]) if k == k2 => {
                    let mut out = vec![0.0; m * n];
                    for i in 0..m {
                        let arow = &na.values[i * k..(i + 1) * k];
                        let orow = &mut out[i * n..(i + 1) * n];
                        for (j, &aij) in arow.iter().enumerate() {
                            let brow = &nb.values[j * n..(j + 1) * n];
                            for (o, &bjn) in orow.iter_mut().zip(brow) {
                                *o += aij * bjn;
                            }
                        }
                    }
                    (vec![m, n], out)
                }
                (&[m, k], &[k2]) if k == k2 => {
                    let mut out = vec![0.0; m];
                    for (i, o) in out.iter_mut().enumerate() {
                        let arow = &na.values[i * k..(i + 1) * k];
                        let mut acc = 0.0;
                        for (aij, x) in arow.iter().zip(&nb.values) {
                            acc += aij * x;
                        }
                        *o = acc;
                    }
                    (vec![m], out)
                }
                (sa, sb) => {
                    return Err(Error::ShapeMismatch {
                        op: "matmul",
                        details: format!("lhs {:?} vs rhs {:?}", sa, sb),
                    })
                }
            }
        };
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(shape, values, rg, Op::Matmul(a, b)))
    }

    /// Concatenate rank-1 tensors into one vector.
    pub fn concat(&self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        let (values, rg) = {
            let nodes = self.nodes.borrow();
            let mut values = Vec::new();
            let mut rg = false;
            for &p in parts {
                let n = &nodes[p.0];
                if n.shape.len() != 1 {
                    return Err(Error::ShapeMismatch {
                        op: "concat",
                        details: format!("expected rank-1 parts, got {:?}", n.shape),
                    });
                }
                values.extend_from_slice(&n.values);
                rg |= n.requires_grad;
            }
            (values, rg)
        };
        let len = values.len();
        Ok(self.push(vec![len], values, rg, Op::Concat(parts.to_vec())))
    }

    /// Stack equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&self, rows: &[NodeId]) -> Result<NodeId> {
        if rows.is_empty() {
            return Err(Error::invalid("stack_rows of zero rows"));
        }
        let (values, cols, rg) = {
            let nodes = self.nodes.borrow();
            let cols = match nodes[rows[0].0].shape.as_slice() {
                &[c] => c,
                s => {
                    return Err(Error::ShapeMismatch {
                        op: "stack_rows",
                        details: format!("expected rank-1 rows, got {:?}", s),
                    })
                }
            };
            let mut values = Vec::with_capacity(rows.len() * cols);
            let mut rg = false;
            for &r in rows {
                let n = &nodes[r.0];
                if n.shape.as_slice() != [cols] {
                    return Err(Error::ShapeMismatch {
                        op: "stack_rows",
                        details: format!("row {:?} vs expected [{}]", n.shape, cols),
                    });
                }
                values.extend_from_slice(&n.values);
                rg |= n.requires_grad;
            }
            (values, cols, rg)
        };
        Ok(self.push(vec![rows.len(), cols], values, rg, Op::StackRows(rows.to_vec())))
    }

    /// Extract row `i` of a rank-2 tensor as a vector.
    pub fn row(&self, x: NodeId, i: usize) -> Result<NodeId> {
        let (values, cols) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[x.0];
            match n.shape.as_slice() {
                &[rows, cols] if i < rows => {
                    (n.values[i * cols..(i + 1) * cols].to_vec(), cols)
                }
                s => {
                    return Err(Error::ShapeMismatch {
                        op: "row",
                        details: format!("row {} of shape {:?}", i, s),
                    })
                }
            }
        };
        let rg = self.requires(x);
        Ok(self.push(vec![cols], values, rg, Op::Row(x, i)))
    }

    pub fn sigmoid(&self, x: NodeId) -> NodeId {
        let values: Vec<f64> = self.with_values(x, |v| v.iter().map(|&x| stable_sigmoid(x)).collect());
        let shape = self.shape(x);
        let rg = self.requires(x);
        self.push(shape, values, rg, Op::Sigmoid(x))
    }

    pub fn tanh(&self, x: NodeId) -> NodeId {
        let values: Vec<f64> = self.with_values(x, |v| v.iter().map(|x| x.tanh()).collect());
        let shape = self.shape(x);
        let rg = self.requires(x);
        self.push(shape, values, rg, Op::Tanh(x))
    }

    /// Softmax over the last axis of a rank-1 or rank-2 tensor.
    pub fn softmax(&self, x: NodeId) -> Result<NodeId> {
        let shape = self.shape(x);
        let cols = match shape.as_slice() {
            &[c] => c,
            &[_, c] => c,
            s => {
                return Err(Error::ShapeMismatch {
                    op: "softmax",
                    details: format!("expected rank 1 or 2, got {:?}", s),
                })
            }
        };
        let values = self.with_values(x, |v| {
            let mut out = Vec::with_capacity(v.len());
            for chunk in v.chunks(cols) {
                out.extend(softmax_slice(chunk));
            }
            out
        });
        let rg = self.requires(x);
        Ok(self.push(shape, values, rg, Op::Softmax(x)))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&self, x: NodeId) -> NodeId {
        let total = self.with_values(x, |v| v.iter().sum());
        let rg = self.requires(x);
        self.push(vec![], vec![total], rg, Op::Sum(x))
    }

    /// Gather rows of an embedding table: `table [V,E]`, `ids [L]` -> `[L,E]`.
    pub fn embedding(&self, table: NodeId, ids: &[u32]) -> Result<NodeId> {
        if ids.is_empty() {
            return Err(Error::invalid("embedding lookup with no ids"));
        }
        let (values, e) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[table.0];
            let (v, e) = match n.shape.as_slice() {
                &[v, e] => (v, e),
                s => {
                    return Err(Error::ShapeMismatch {
                        op: "embedding",
                        details: format!("table must be rank-2, got {:?}", s),
                    })
                }
            };
            let mut values = Vec::with_capacity(ids.len() * e);
            for &id in ids {
                let id = id as usize;
                if id >= v {
                    return Err(Error::invalid(format!(
                        "embedding id {} out of range for table with {} rows",
                        id, v
                    )));
                }
                values.extend_from_slice(&n.values[id * e..(id + 1) * e]);
            }
            (values, e)
        };
        let rg = self.requires(table);
        Ok(self.push(
            vec![ids.len(), e],
            values,
            rg,
            Op::Embedding { table, ids: ids.to_vec() },
        ))
    }

    /// Inverted dropout: at train time zero each entry with probability
    /// `drop_p` and scale survivors by `1/(1-drop_p)`. In eval mode the
    /// input passes through untouched.
    pub fn dropout<R: Rng>(
        &self,
        x: NodeId,
        drop_p: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<NodeId> {
        if !(0.0..1.0).contains(&drop_p) {
            return Err(Error::invalid(format!("dropout probability {} not in [0,1)", drop_p)));
        }
        if !train || drop_p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - drop_p;
        let len = self.with_values(x, |v| v.len());
        let mask: Vec<f64> = (0..len)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        Ok(self.dropout_with_mask(x, mask))
    }

    /// Dropout with a caller-supplied mask; used by tests to freeze the mask.
    pub fn dropout_with_mask(&self, x: NodeId, mask: Vec<f64>) -> NodeId {
        let values: Vec<f64> =
            self.with_values(x, |v| v.iter().zip(&mask).map(|(a, m)| a * m).collect());
        let shape = self.shape(x);
        let rg = self.requires(x);
        self.push(shape, values, rg, Op::Dropout { input: x, mask })
    }

    /// Mean negative log-likelihood of `targets` under `softmax(logits)`,
    /// skipping positions whose target equals `ignore`.
    pub fn cross_entropy(&self, logits: NodeId, targets: &[u32], ignore: u32) -> Result<NodeId> {
        let (loss, n_used) = {
            let nodes = self.nodes.borrow();
            let n = &nodes[logits.0];
            let (rows, cols) = match n.shape.as_slice() {
                &[r, c] => (r, c),
                s => {
                    return Err(Error::ShapeMismatch {
                        op: "cross_entropy",
                        details: format!("logits must be rank-2, got {:?}", s),
                    })
                }
            };
            if targets.len() != rows {
                return Err(Error::ShapeMismatch {
                    op: "cross_entropy",
                    details: format!("{} logit rows vs {} targets", rows, targets.len()),
                });
            }
            let mut total = 0.0;
            let mut used = 0usize;
            for (i, &t) in targets.iter().enumerate() {
                if t == ignore {
                    continue;
                }
                if t as usize >= cols {
                    return Err(Error::invalid(format!(
                        "cross entropy target {} out of range for {} classes",
                        t, cols
                    )));
                }
                let row = &n.values[i * cols..(i + 1) * cols];
                total += log_sum_exp(row) - row[t as usize];
                used += 1;
            }
            if used == 0 {
                return Err(Error::EmptyLoss);
            }
            (total / used as f64, used)
        };
        let _ = n_used;
        let rg = self.requires(logits);
        Ok(self.push(
            vec![],
            vec![loss],
            rg,
            Op::CrossEntropy { logits, targets: targets.to_vec(), ignore },
        ))
    }

    /// Reverse sweep from a scalar loss. Fills gradients for every node
    /// that requires them; unused parameters end up with zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        if nodes[loss.0].values.len() != 1 {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.0].shape
            )));
        }
        for n in nodes.iter_mut() {
            if n.requires_grad {
                n.grad.clear();
                n.grad.resize(n.values.len(), 0.0);
            } else {
                n.grad.clear();
            }
        }
        if !nodes[loss.0].requires_grad {
            // Nothing upstream wants gradients; leaf grads stay zero.
            return Ok(());
        }
        nodes[loss.0].grad[0] = 1.0;

        for i in (0..=loss.0).rev() {
            if !nodes[i].requires_grad {
                continue;
            }
            let (before, rest) = nodes.split_at_mut(i);
            let node = &rest[0];
            if node.grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = &node.grad;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(before, *a, g, |gi, _| gi);
                    accumulate(before, *b, g, |gi, _| gi);
                }
                Op::Sub(a, b) => {
                    accumulate(before, *a, g, |gi, _| gi);
                    accumulate(before, *b, g, |gi, _| -gi);
                }
                Op::Mul(a, b) => {
                    let bv = before[b.0].values.clone();
                    accumulate(before, *a, g, |gi, i| gi * bv[i]);
                    let av = before[a.0].values.clone();
                    accumulate(before, *b, g, |gi, i| gi * av[i]);
                }
                Op::Matmul(a, b) => backward_matmul(before, *a, *b, &node.shape, g),
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = before[p.0].values.len();
                        if before[p.0].requires_grad {
                            let dst = &mut before[p.0].grad;
                            for (d, s) in dst.iter_mut().zip(&g[offset..offset + len]) {
                                *d += s;
                            }
                        }
                        offset += len;
                    }
                }
                Op::StackRows(rows) => {
                    let cols = node.shape[1];
                    for (r, &p) in rows.iter().enumerate() {
                        if before[p.0].requires_grad {
                            let dst = &mut before[p.0].grad;
                            for (d, s) in dst.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                                *d += s;
                            }
                        }
                    }
                }
                Op::Row(x, i) => {
                    if before[x.0].requires_grad {
                        let cols = node.values.len();
                        let dst = &mut before[x.0].grad[i * cols..(i + 1) * cols];
                        for (d, s) in dst.iter_mut().zip(g) {
                            *d += s;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let y = &node.values;
                    accumulate(before, *x, g, |gi, i| gi * y[i] * (1.0 - y[i]));
                }
                Op::Tanh(x) => {
                    let y = &node.values;
                    accumulate(before, *x, g, |gi, i| gi * (1.0 - y[i] * y[i]));
                }
                Op::Softmax(x) => {
                    if before[x.0].requires_grad {
                        let cols = *node.shape.last().unwrap();
                        let y = &node.values;
                        let dst = &mut before[x.0].grad;
                        for r in 0..y.len() / cols {
                            let yr = &y[r * cols..(r + 1) * cols];
                            let gr = &g[r * cols..(r + 1) * cols];
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            let dr = &mut dst[r * cols..(r + 1) * cols];
                            for ((d, &yi), &gi) in dr.iter_mut().zip(yr).zip(gr) {
                                *d += yi * (gi - dot);
                            }
                        }
                    }
                }
                Op::Sum(x) => {
                    let s = g[0];
                    accumulate(before, *x, &vec![s; before[x.0].values.len()], |gi, _| gi);
                }
                Op::Embedding { table, ids } => {
                    if before[table.0].requires_grad {
                        let e = node.shape[1];
                        let dst = &mut before[table.0].grad;
                        for (r, &id) in ids.iter().enumerate() {
                            let drow = &mut dst[id as usize * e..(id as usize + 1) * e];
                            for (d, s) in drow.iter_mut().zip(&g[r * e..(r + 1) * e]) {
                                *d += s;
                            }
                        }
                    }
                }
                Op::Dropout { input, mask } => {
                    accumulate(before, *input, g, |gi, i| gi * mask[i]);
                }
                Op::CrossEntropy { logits, targets, ignore } => {
                    if before[logits.0].requires_grad {
                        let lnode = &before[logits.0];
                        let cols = lnode.shape[1];
                        let used = targets.iter().filter(|&&t| t != *ignore).count() as f64;
                        let scale = g[0] / used;
                        let mut deltas = Vec::with_capacity(lnode.values.len());
                        for (i, &t) in targets.iter().enumerate() {
                            let row = &lnode.values[i * cols..(i + 1) * cols];
                            if t == *ignore {
                                deltas.extend(std::iter::repeat(0.0).take(cols));
                            } else {
                                let sm = softmax_slice(row);
                                for (j, p) in sm.into_iter().enumerate() {
                                    let onehot = if j == t as usize { 1.0 } else { 0.0 };
                                    deltas.push(scale * (p - onehot));
                                }
                            }
                        }
                        let dst = &mut before[logits.0].grad;
                        for (d, s) in dst.iter_mut().zip(&deltas) {
                            *d += s;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate(nodes: &mut [Node], target: NodeId, g: &[f64], f: impl Fn(f64, usize) -> f64) {
    if nodes[target.0].requires_grad {
        let dst = &mut nodes[target.0].grad;
        for (i, (d, &gi)) in dst.iter_mut().zip(g).enumerate() {
            *d += f(gi, i);
        }
    }
}

fn backward_matmul(nodes: &mut [Node], a: NodeId, b: NodeId, out_shape: &[usize], g: &[f64]) {
    let a_shape = nodes[a.0].shape.clone();
    let (m, k) = (a_shape[0], a_shape[1]);
    match out_shape.len() {
        // [m,k] x [k,n] -> [m,n]
        2 => {
            let n = out_shape[1];
            if nodes[a.0].requires_grad {
                let bv = nodes[b.0].values.clone();
                let da = &mut nodes[a.0].grad;
                for i in 0..m {
                    for j in 0..k {
                        let mut acc = 0.0;
                        let grow = &g[i * n..(i + 1) * n];
                        let brow = &bv[j * n..(j + 1) * n];
                        for (gi, bi) in grow.iter().zip(brow) {
                            acc += gi * bi;
                        }
                        da[i * k + j] += acc;
                    }
                }
            }
            if nodes[b.0].requires_grad {
                let av = nodes[a.0].values.clone();
                let db = &mut nodes[b.0].grad;
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for j in 0..k {
                        let aij = av[i * k + j];
                        let drow = &mut db[j * n..(j + 1) * n];
                        for (d, gi) in drow.iter_mut().zip(grow) {
                            *d += aij * gi;
                        }
                    }
                }
            }
        }
        // [m,k] x [k] -> [m]
        1 => {
            if nodes[a.0].requires_grad {
                let xv = nodes[b.0].values.clone();
                let da = &mut nodes[a.0].grad;
                for (i, &gi) in g.iter().enumerate() {
                    let drow = &mut da[i * k..(i + 1) * k];
                    for (d, &xj) in drow.iter_mut().zip(&xv) {
                        *d += gi * xj;
                    }
                }
            }
            if nodes[b.0].requires_grad {
                let av = nodes[a.0].values.clone();
                let db = &mut nodes[b.0].grad;
                for (i, &gi) in g.iter().enumerate() {
                    let arow = &av[i * k..(i + 1) * k];
                    for (d, &aij) in db.iter_mut().zip(arow) {
                        *d += gi * aij;
                    }
                }
            }
        }
        _ => unreachable!("matmul output rank checked at forward time"),
    }
}

pub(crate) fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_slice(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}
