//! Corpus-level clipped BLEU-n with a smoothing floor for zero counts.

use std::collections::HashMap;

use crate::Result;

use super::check_paired;

/// Corpus BLEU-n over paired token lists (one reference each): clipped
/// n-gram precisions aggregated over the whole corpus, geometric mean
/// over orders `1..=n`, brevity penalty `exp(1 - r/c)` when `c <= r`.
/// A precision with zero clipped count is floored at
/// `1 / (2 * corpus hypothesis n-gram count)` so the geometric mean
/// survives sparse higher orders; if the corpus has no n-grams at some
/// order at all (or no tokens), the score is 0.
pub fn bleu_n(hypotheses: &[Vec<String>], references: &[Vec<String>], n: usize) -> Result<f64> {
    check_paired(hypotheses, references)?;
    if n == 0 {
        return Err(crate::Error::invalid("BLEU order must be at least 1"));
    }

    let c_total: usize = hypotheses.iter().map(Vec::len).sum();
    let r_total: usize = references.iter().map(Vec::len).sum();
    if c_total == 0 {
        return Ok(0.0);
    }
    let brevity = if c_total > r_total {
        1.0
    } else {
        (1.0 - r_total as f64 / c_total as f64).exp()
    };

    let mut log_sum = 0.0;
    for k in 1..=n {
        let mut clipped = 0usize;
        let mut total = 0usize;
        for (hyp, rf) in hypotheses.iter().zip(references) {
            let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
            for gram in rf.windows(k) {
                *ref_counts.entry(gram).or_insert(0) += 1;
            }
            let mut hyp_counts: HashMap<&[String], usize> = HashMap::new();
            for gram in hyp.windows(k) {
                *hyp_counts.entry(gram).or_insert(0) += 1;
                total += 1;
            }
            for (gram, count) in hyp_counts {
                clipped += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
        }
        if total == 0 {
            return Ok(0.0);
        }
        let precision = if clipped == 0 {
            1.0 / (2.0 * total as f64)
        } else {
            clipped as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    Ok(brevity * (log_sum / n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_corpora_score_one_at_every_order() {
        let corpus = vec![toks("heat the oil"), toks("add the onion and stir")];
        for n in 1..=4 {
            assert_eq!(bleu_n(&corpus, &corpus, n).unwrap(), 1.0, "order {n}");
        }
    }

    #[test]
    fn clipping_caps_repeated_tokens() {
        let hyp = vec![toks("the the the")];
        let rf = vec![toks("the cat")];
        let got = bleu_n(&hyp, &rf, 1).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn brevity_penalty_kicks_in_for_short_hypotheses() {
        let hyp = vec![toks("the cat")];
        let rf = vec![toks("the cat sat")];
        let got = bleu_n(&hyp, &rf, 1).unwrap();
        assert!((got - (-0.5f64).exp()).abs() < 1e-12, "{got}");
    }

    #[test]
    fn zero_bigram_count_hits_the_smoothing_floor() {
        let hyp = vec![toks("a x c")];
        let rf = vec![toks("a b c")];
        // p1 = 2/3; p2 floored at 1/(2*2); BP = 1 (c == r).
        let want = (2.0f64 / 3.0 * 0.25).sqrt();
        let got = bleu_n(&hyp, &rf, 2).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn corpora_without_ngrams_at_some_order_score_zero() {
        let hyp = vec![toks("a"), toks("b")];
        let rf = vec![toks("a"), toks("b")];
        assert_eq!(bleu_n(&hyp, &rf, 2).unwrap(), 0.0);
        let empty_hyp = vec![Vec::<String>::new()];
        let rf1 = vec![toks("a b")];
        assert_eq!(bleu_n(&empty_hyp, &rf1, 1).unwrap(), 0.0);
    }

    #[test]
    fn empty_or_mismatched_corpora_are_rejected() {
        assert!(bleu_n(&[], &[], 1).is_err());
        assert!(bleu_n(&[toks("a")], &[], 1).is_err());
        assert!(bleu_n(&[toks("a")], &[toks("a")], 0).is_err());
    }

    #[test]
    fn pair_order_does_not_matter() {
        let hyps = vec![toks("the cat sat"), toks("a dog"), toks("mix mix well")];
        let refs = vec![toks("the cat sat down"), toks("a dog runs"), toks("mix it well")];
        for n in 1..=4 {
            let forward = bleu_n(&hyps, &refs, n).unwrap();
            let rev_h: Vec<_> = hyps.iter().rev().cloned().collect();
            let rev_r: Vec<_> = refs.iter().rev().cloned().collect();
            let backward = bleu_n(&rev_h, &rev_r, n).unwrap();
            assert!((forward - backward).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn scores_stay_in_the_unit_interval(
            pairs in proptest::collection::vec(
                (
                    proptest::collection::vec("[a-d]", 0..6),
                    proptest::collection::vec("[a-d]", 0..6),
                ),
                1..6,
            ),
            n in 1usize..=4,
        ) {
            let hyps: Vec<Vec<String>> = pairs.iter().map(|(h, _)| h.clone()).collect();
            let refs: Vec<Vec<String>> = pairs.iter().map(|(_, r)| r.clone()).collect();
            let score = bleu_n(&hyps, &refs, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&score), "{score}");
        }
    }
}
