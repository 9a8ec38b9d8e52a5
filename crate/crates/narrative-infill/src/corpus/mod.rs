//! Narrative corpora: loading, tokenization, vocabulary construction,
//! id encoding, seeded splitting and descriptive statistics.
//!
//! A corpus is a list of [`Narrative`]s, each an ordered sequence of
//! [`Step`]s pairing one precomputed image feature vector with one text.
//! The on-disk format is UTF-8 JSON-lines, one narrative per line; see
//! [`io`] for the exact schema and the binary feature-file layout.

mod encode;
mod io;
mod split;
mod stats;
mod tokenize;
mod vocab;

pub use encode::{decode_tokens, encode_corpus, encode_narrative, EncodedNarrative};
pub use io::{load_corpus, read_feature_file, write_corpus, write_feature_file};
pub use split::split_corpus;
pub use stats::{corpus_stats, unique_word_fraction, StatsReport, UniqueWordFractions};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, BOS_ID, EOS_ID, PAD_ID, UNK_ID};

use crate::{Error, Result};

/// Where a step's feature vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    /// Referenced binary feature file.
    File,
    /// Inline JSON array.
    Inline,
    /// Produced by the synthetic generator.
    Synthetic,
}

/// One narrative step: a text (with its tokenization) and the image
/// feature vector it is grounded in.
#[derive(Debug, Clone)]
pub struct Step {
    pub text: String,
    pub tokens: Vec<String>,
    pub feature: Vec<f64>,
    pub feature_source: FeatureSource,
}

impl Step {
    pub fn new(text: impl Into<String>, feature: Vec<f64>, source: FeatureSource) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Step { text, tokens, feature, feature_source: source }
    }
}

/// An ordered sequence of steps sharing one feature dimensionality.
#[derive(Debug, Clone)]
pub struct Narrative {
    pub id: String,
    pub category: String,
    pub steps: Vec<Step>,
}

impl Narrative {
    /// Validate the structural invariants: at least one step, and all
    /// steps sharing one feature dimension.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Narrative {
                id: self.id.clone(),
                message: "narrative has no steps".into(),
            });
        }
        let dim = self.steps[0].feature.len();
        for (k, step) in self.steps.iter().enumerate() {
            if step.feature.len() != dim {
                return Err(Error::Narrative {
                    id: self.id.clone(),
                    message: format!(
                        "step {} has feature dimension {}, step 0 has {}",
                        k,
                        step.feature.len(),
                        dim
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.steps.first().map_or(0, |s| s.feature.len())
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }
}
