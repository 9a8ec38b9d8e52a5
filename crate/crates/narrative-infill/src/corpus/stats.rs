//! Descriptive corpus statistics: step/word averages, type counts and
//! the per-step unique-word fraction.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::Narrative;

/// Aggregate statistics over one corpus, serialized as the `stats`
/// command's JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_narratives: usize,
    pub n_steps_total: usize,
    pub avg_steps: f64,
    pub avg_words_per_step: f64,
    /// Distinct token types across the whole corpus.
    pub vocab_size: usize,
    /// Mean over narratives of the per-narrative mean unique-word
    /// fraction.
    pub avg_unique_word_fraction: f64,
}

/// Per-step unique-word fractions of one narrative.
#[derive(Debug, Clone, PartialEq)]
pub struct UniqueWordFractions {
    /// For step k: |types(k) \ types(all other steps)| / |types(k)|.
    pub fractions: Vec<f64>,
    pub mean: f64,
    /// Steps with no tokens at all; they contribute fraction 0.
    pub empty_steps: Vec<usize>,
}

/// Fraction of each step's word types that appear in no other step of
/// the same narrative. A single-step narrative scores 1.0 (vacuously,
/// every type is unique to the step); an empty step scores 0 and is
/// flagged.
pub fn unique_word_fraction(narrative: &Narrative) -> UniqueWordFractions {
    let types: Vec<HashSet<&str>> = narrative
        .steps
        .iter()
        .map(|s| s.tokens.iter().map(String::as_str).collect())
        .collect();
    let mut fractions = Vec::with_capacity(types.len());
    let mut empty_steps = Vec::new();
    for (k, mine) in types.iter().enumerate() {
        if mine.is_empty() {
            empty_steps.push(k);
            fractions.push(0.0);
            continue;
        }
        let unique = mine
            .iter()
            .filter(|t| types.iter().enumerate().all(|(j, other)| j == k || !other.contains(**t)))
            .count();
        fractions.push(unique as f64 / mine.len() as f64);
    }
    let mean = if fractions.is_empty() {
        0.0
    } else {
        fractions.iter().sum::<f64>() / fractions.len() as f64
    };
    UniqueWordFractions { fractions, mean, empty_steps }
}

/// Aggregate the whole corpus; errors on an empty one.
pub fn corpus_stats(corpus: &[Narrative]) -> Result<StatsReport> {
    if corpus.is_empty() {
        return Err(Error::invalid("cannot compute statistics of an empty corpus"));
    }
    let n_steps_total: usize = corpus.iter().map(Narrative::n_steps).sum();
    let n_words_total: usize =
        corpus.iter().flat_map(|n| n.steps.iter()).map(|s| s.tokens.len()).sum();
    let mut types: HashSet<&str> = HashSet::new();
    for n in corpus {
        for s in &n.steps {
            types.extend(s.tokens.iter().map(String::as_str));
        }
    }
    let unique_sum: f64 = corpus.iter().map(|n| unique_word_fraction(n).mean).sum();
    Ok(StatsReport {
        n_narratives: corpus.len(),
        n_steps_total,
        avg_steps: n_steps_total as f64 / corpus.len() as f64,
        avg_words_per_step: n_words_total as f64 / n_steps_total.max(1) as f64,
        vocab_size: types.len(),
        avg_unique_word_fraction: unique_sum / corpus.len() as f64,
    })
}
