//! Narrative infilling at desk scale: train GRU sequence models that
//! generate multi-step narrative text from sequences of image feature
//! vectors, mask selected steps to a zero tensor so the model learns to
//! bridge surrounding context, decode with beam search, and score the
//! output with corpus-level n-gram metrics.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`corpus`]: loading, tokenizing, encoding and characterizing
//!   narrative corpora of paired image features and step texts.
//! - [`nn`]: a minimal reverse-mode autodiff engine with the op set the
//!   models need, Adam with global-norm clipping, checkpoints, and a
//!   finite-difference gradient checker.
//! - [`model`]: the cross-entropy baseline and its infilling variants,
//!   the mask schedule, and the training loop.
//! - [`infer`]: greedy/beam decoding and inference-time infilling.
//! - [`metrics`]: corpus BLEU-1..4, ROUGE-L and METEOR-lite with
//!   per-infill-index stratification.
//! - [`synth`]: a seeded synthetic corpus generator with a controllable
//!   degree of word overlap between neighboring steps.

pub mod corpus;
pub mod error;
pub mod infer;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod synth;

pub use error::{Error, Result};
