//! METEOR-lite: exact-then-stemmed one-to-one unigram alignment with a
//! fragmentation penalty. Deliberately resource-free (no synonym
//! tables), so published METEOR numbers are only approximately
//! comparable.

use crate::Result;

use super::check_paired;

/// Strip the first matching suffix of `ing`, `ed`, `es`, `s` that
/// leaves at least two characters; otherwise the token is its own stem.
fn stem(token: &str) -> &str {
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(stripped) = token.strip_suffix(suffix) {
            if stripped.chars().count() >= 2 {
                return stripped;
            }
        }
    }
    token
}

/// Greedy one-to-one alignment: every hypothesis token first tries the
/// leftmost unused exact reference match; leftovers then try stems.
/// Returns `(hyp_index, ref_index)` pairs in hypothesis order.
fn align(hyp: &[String], rf: &[String]) -> Vec<(usize, usize)> {
    let mut ref_used = vec![false; rf.len()];
    let mut matched: Vec<Option<usize>> = vec![None; hyp.len()];
    for (i, token) in hyp.iter().enumerate() {
        for (j, candidate) in rf.iter().enumerate() {
            if !ref_used[j] && token == candidate {
                matched[i] = Some(j);
                ref_used[j] = true;
                break;
            }
        }
    }
    for (i, token) in hyp.iter().enumerate() {
        if matched[i].is_some() {
            continue;
        }
        let s = stem(token);
        for (j, candidate) in rf.iter().enumerate() {
            if !ref_used[j] && stem(candidate) == s {
                matched[i] = Some(j);
                ref_used[j] = true;
                break;
            }
        }
    }
    matched.iter().enumerate().filter_map(|(i, j)| j.map(|j| (i, j))).collect()
}

/// Maximal runs that are contiguous and in order on both sides.
fn chunk_count(alignment: &[(usize, usize)]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(i, j) in alignment {
        match prev {
            Some((pi, pj)) if i == pi + 1 && j == pj + 1 => {}
            _ => chunks += 1,
        }
        prev = Some((i, j));
    }
    chunks
}

fn pair_score(hyp: &[String], rf: &[String]) -> f64 {
    if hyp.is_empty() || rf.is_empty() {
        return 0.0;
    }
    let alignment = align(hyp, rf);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / rf.len() as f64;
    let f = 10.0 * p * r / (r + 9.0 * p);
    let frag = chunk_count(&alignment) as f64 / m as f64;
    f * (1.0 - 0.5 * frag.powi(3))
}

/// Mean per-pair METEOR-lite over the corpus.
pub fn meteor_lite(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    check_paired(hypotheses, references)?;
    let total: f64 = hypotheses.iter().zip(references).map(|(h, r)| pair_score(h, r)).sum();
    Ok(total / hypotheses.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_four_token_pair_pays_only_the_single_chunk_penalty() {
        let corpus = vec![toks("heat the oil well")];
        // m = 4, one chunk: F = 1, penalty = 0.5 * (1/4)^3 = 1/128.
        assert_eq!(meteor_lite(&corpus, &corpus).unwrap(), 0.9921875);
    }

    #[test]
    fn token_disjoint_pairs_score_zero() {
        assert_eq!(meteor_lite(&[toks("a b")], &[toks("c d")]).unwrap(), 0.0);
        assert_eq!(meteor_lite(&[Vec::new()], &[toks("a")]).unwrap(), 0.0);
    }

    #[test]
    fn suffix_stripping_matches_inflected_forms() {
        // "cooking" and "cooked" share the stem "cook": m = 1, P = R = 1,
        // F = 1, one chunk over one match => penalty 0.5.
        let got = meteor_lite(&[toks("cooking")], &[toks("cooked")]).unwrap();
        assert_eq!(got, 0.5);

        for (h, r) in [("cats", "cat"), ("boxes", "box"), ("stirred", "stirring")] {
            let got = meteor_lite(&[toks(h)], &[toks(r)]).unwrap();
            assert_eq!(got, 0.5, "{h} vs {r}");
        }
    }

    #[test]
    fn short_tokens_do_not_stem_away() {
        // "is" stripping "s" would leave one character; stays "is".
        assert_eq!(stem("is"), "is");
        assert_eq!(stem("sing"), "sing");
        assert_eq!(stem("singing"), "sing");
        assert_eq!(stem("goes"), "go");
    }

    #[test]
    fn swapped_halves_fragment_into_two_chunks() {
        // Perfect unigram overlap but the halves trade places:
        // m = 4, chunks = 2, F = 1, penalty = 0.5 * (2/4)^3 = 1/16.
        let got = meteor_lite(&[toks("a b c d")], &[toks("c d a b")]).unwrap();
        assert_eq!(got, 0.9375);
    }

    #[test]
    fn exact_matches_claim_references_before_stems() {
        // "cooking" must keep its exact partner even though "cooks"
        // would also stem-match it; "cooks" then takes the stem match.
        let hyp = vec![toks("cooks cooking")];
        let rf = vec![toks("cooking cook")];
        // Staged alignment: cooking->cooking (exact), cooks->cook
        // (stem). The pairs cross, so chunks = 2 = m and the penalty is
        // maximal: F = 1, score = 1 - 0.5 * (2/2)^3 = 0.5. A mixed
        // greedy pass would instead align in order (chunks = 1) and
        // score 0.9375, so this pins the exact-first staging.
        let got = meteor_lite(&hyp, &rf).unwrap();
        assert_eq!(got, 0.5);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(meteor_lite(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn scores_stay_in_the_unit_interval(
            pairs in proptest::collection::vec(
                (
                    proptest::collection::vec("[a-d]{1,4}", 0..6),
                    proptest::collection::vec("[a-d]{1,4}", 0..6),
                ),
                1..6,
            ),
        ) {
            let hyps: Vec<Vec<String>> = pairs.iter().map(|(h, _)| h.clone()).collect();
            let refs: Vec<Vec<String>> = pairs.iter().map(|(_, r)| r.clone()).collect();
            let score = meteor_lite(&hyps, &refs).unwrap();
            prop_assert!((0.0..=1.0).contains(&score), "{score}");
        }
    }
}
