//! Plain dense tensors: the data carrier for parameters, features and I/O.
//!
//! Differentiable computation happens on [`Graph`](super::Graph) nodes;
//! a `Tensor` is just shape + row-major values and is what optimizers and
//! checkpoints operate on.

use crate::{Error, Result};
use rand::Rng;

/// Dense row-major tensor of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if values.len() != expect {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                details: format!("shape {:?} wants {} values, got {}", shape, expect, values.len()),
            });
        }
        Ok(Tensor { shape: shape.to_vec(), values })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), values: vec![0.0; n] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![], values: vec![v] }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Tensor { shape: vec![values.len()], values }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Tensor::new(&[rows, cols], values)
    }

    /// All entries drawn i.i.d. uniform from `[lo, hi)`.
    pub fn uniform<R: Rng>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        Tensor { shape: shape.to_vec(), values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        assert_eq!(self.shape.len(), 2, "row() needs a rank-2 tensor");
        let cols = self.shape[1];
        &self.values[i * cols..(i + 1) * cols]
    }
}
