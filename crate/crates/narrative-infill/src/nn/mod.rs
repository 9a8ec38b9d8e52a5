//! Numeric kernels: tensors, the autodiff tape, recurrent cells, the
//! optimizer and checkpoint (de)serialization.

mod graph;
mod tensor;

pub mod checkpoint;
pub mod gradcheck;
pub mod gru;
pub mod optim;

pub use graph::{Graph, NodeId};
pub use tensor::Tensor;

pub(crate) use graph::{log_sum_exp, stable_sigmoid};
