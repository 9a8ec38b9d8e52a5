//! Narrative-to-id encoding for training and decoding back to tokens.

use crate::nn::Tensor;
use crate::Result;

use super::{Narrative, Vocabulary, BOS_ID, EOS_ID, PAD_ID};

/// A narrative rendered as dense model inputs: one feature row and one
/// fixed-width id row per retained step. Every id row is
/// `BOS, t_1 .. t_L, EOS, PAD...` of width `max_words + 2`.
#[derive(Debug, Clone)]
pub struct EncodedNarrative {
    pub id: String,
    /// `n_steps x d_img` features of the retained steps.
    pub feature_matrix: Tensor,
    /// `n_steps` rows, each of width `max_words + 2`.
    pub token_ids: Vec<Vec<u32>>,
    /// Tokens retained per step (after truncation to `max_words`).
    pub step_lengths: Vec<usize>,
}

impl EncodedNarrative {
    pub fn n_steps(&self) -> usize {
        self.token_ids.len()
    }

    pub fn row_width(&self) -> usize {
        self.token_ids.first().map_or(0, Vec::len)
    }
}

/// Keep the first `max_steps` steps, truncate each step's tokens to
/// `max_words`, wrap them in BOS/EOS, and pad to a fixed width.
/// Out-of-vocabulary tokens map to UNK.
pub fn encode_narrative(
    narrative: &Narrative,
    vocab: &Vocabulary,
    max_steps: usize,
    max_words: usize,
) -> Result<EncodedNarrative> {
    narrative.validate()?;
    let steps = &narrative.steps[..narrative.n_steps().min(max_steps)];
    let width = max_words + 2;

    let mut token_ids = Vec::with_capacity(steps.len());
    let mut step_lengths = Vec::with_capacity(steps.len());
    let mut features = Vec::with_capacity(steps.len() * narrative.feature_dim());
    for step in steps {
        let kept = &step.tokens[..step.tokens.len().min(max_words)];
        let mut row = Vec::with_capacity(width);
        row.push(BOS_ID);
        row.extend(kept.iter().map(|t| vocab.id(t)));
        row.push(EOS_ID);
        row.resize(width, PAD_ID);
        token_ids.push(row);
        step_lengths.push(kept.len());
        features.extend_from_slice(&step.feature);
    }
    Ok(EncodedNarrative {
        id: narrative.id.clone(),
        feature_matrix: Tensor::new(&[steps.len(), narrative.feature_dim()], features)?,
        token_ids,
        step_lengths,
    })
}

/// Encode every narrative with shared settings.
pub fn encode_corpus(
    corpus: &[Narrative],
    vocab: &Vocabulary,
    max_steps: usize,
    max_words: usize,
) -> Result<Vec<EncodedNarrative>> {
    corpus.iter().map(|n| encode_narrative(n, vocab, max_steps, max_words)).collect()
}

/// Map an id row back to surface tokens: BOS and PAD are dropped, EOS
/// terminates the row.
pub fn decode_tokens(ids: &[u32], vocab: &Vocabulary) -> Vec<String> {
    let mut out = Vec::new();
    for &id in ids {
        if id == EOS_ID {
            break;
        }
        if id == BOS_ID || id == PAD_ID {
            continue;
        }
        out.push(vocab.token(id).to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FeatureSource, Step, UNK_ID};
    use proptest::prelude::*;

    fn narrative(texts: &[&str]) -> Narrative {
        Narrative {
            id: "n".into(),
            category: "c".into(),
            steps: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Step::new(*t, vec![i as f64, 1.0], FeatureSource::Synthetic))
                .collect(),
        }
    }

    fn vocab_over(texts: &[&str]) -> Vocabulary {
        Vocabulary::build(&[narrative(texts)], 1, 1000)
    }

    #[test]
    fn nine_steps_truncate_to_the_first_five() {
        let texts: Vec<String> = (0..9).map(|i| format!("step number {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let n = narrative(&refs);
        let v = vocab_over(&refs);
        let enc = encode_narrative(&n, &v, 5, 6).unwrap();
        assert_eq!(enc.n_steps(), 5);
        assert_eq!(decode_tokens(&enc.token_ids[4], &v), vec!["step", "number", "4"]);
    }

    #[test]
    fn short_narratives_keep_all_steps() {
        let n = narrative(&["one", "two", "three"]);
        let v = vocab_over(&["one two three"]);
        let enc = encode_narrative(&n, &v, 5, 4).unwrap();
        assert_eq!(enc.n_steps(), 3);
        assert_eq!(enc.feature_matrix.shape(), &[3, 2]);
    }

    #[test]
    fn oov_token_becomes_unk_with_padding() {
        let n = narrative(&["x y"]);
        let v = vocab_over(&["x"]); // vocabulary lacks "y"
        let enc = encode_narrative(&n, &v, 5, 4).unwrap();
        assert_eq!(enc.token_ids[0], vec![BOS_ID, v.id("x"), UNK_ID, EOS_ID, PAD_ID, PAD_ID]);
        assert_eq!(enc.step_lengths[0], 2);
    }

    #[test]
    fn long_steps_truncate_to_max_words() {
        let n = narrative(&["a b c d e f"]);
        let v = vocab_over(&["a b c d e f"]);
        let enc = encode_narrative(&n, &v, 5, 3).unwrap();
        assert_eq!(enc.row_width(), 5);
        assert_eq!(enc.step_lengths[0], 3);
        assert_eq!(decode_tokens(&enc.token_ids[0], &v), vec!["a", "b", "c"]);
    }

    #[test]
    fn every_row_ends_with_eos_then_pads() {
        let n = narrative(&["cut the bread", "serve"]);
        let v = vocab_over(&["cut the bread serve"]);
        let enc = encode_narrative(&n, &v, 5, 6).unwrap();
        for row in &enc.token_ids {
            let eos_at = row.iter().position(|&id| id == EOS_ID).unwrap();
            assert!(row[eos_at + 1..].iter().all(|&id| id == PAD_ID));
            assert_eq!(row.len(), 8);
        }
    }

    proptest! {
        #[test]
        fn round_trip_restores_in_vocab_tokens(
            words in proptest::collection::vec("[a-e]{1,3}", 1..8)
        ) {
            let text = words.join(" ");
            let n = narrative(&[text.as_str()]);
            let v = vocab_over(&[text.as_str()]);
            let enc = encode_narrative(&n, &v, 5, 10).unwrap();
            prop_assert_eq!(decode_tokens(&enc.token_ids[0], &v), words);
        }
    }
}
