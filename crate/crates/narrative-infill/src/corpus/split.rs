//! Seeded train/validation/test partitioning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

use super::Narrative;

/// Shuffle deterministically by `seed` and cut into train/val/test of
/// sizes `floor(N * train)`, `floor(N * val)`, and the remainder.
pub fn split_corpus(
    corpus: Vec<Narrative>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<Narrative>, Vec<Narrative>, Vec<Narrative>)> {
    let (tr, va, te) = ratios;
    if tr < 0.0 || va < 0.0 || te < 0.0 || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios ({tr}, {va}, {te}) must be non-negative and sum to 1"
        )));
    }
    if corpus.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    let n = corpus.len();
    let n_train = (n as f64 * tr).floor() as usize;
    let n_val = (n as f64 * va).floor() as usize;

    let mut shuffled = corpus;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let mut rest = shuffled.split_off(n_train);
    let test = rest.split_off(n_val);
    Ok((shuffled, rest, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FeatureSource, Step};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn corpus(n: usize) -> Vec<Narrative> {
        (0..n)
            .map(|i| Narrative {
                id: format!("n{i}"),
                category: "c".into(),
                steps: vec![Step::new("x", vec![0.0], FeatureSource::Synthetic)],
            })
            .collect()
    }

    #[test]
    fn hundred_narratives_split_eighty_ten_ten() {
        let (tr, va, te) = split_corpus(corpus(100), (0.8, 0.1, 0.1), 0).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
    }

    #[test]
    fn single_narrative_lands_in_test() {
        let (tr, va, te) = split_corpus(corpus(1), (0.8, 0.1, 0.1), 0).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (0, 0, 1));
    }

    #[test]
    fn same_seed_reproduces_the_partition() {
        let a = split_corpus(corpus(37), (0.8, 0.1, 0.1), 99).unwrap();
        let b = split_corpus(corpus(37), (0.8, 0.1, 0.1), 99).unwrap();
        let ids = |v: &[Narrative]| v.iter().map(|n| n.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a.0), ids(&b.0));
        assert_eq!(ids(&a.1), ids(&b.1));
        assert_eq!(ids(&a.2), ids(&b.2));
    }

    #[test]
    fn bad_ratios_are_rejected() {
        assert!(split_corpus(corpus(5), (0.8, 0.3, 0.1), 0).is_err());
        assert!(split_corpus(corpus(5), (1.2, -0.1, -0.1), 0).is_err());
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(split_corpus(Vec::new(), (0.8, 0.1, 0.1), 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_a_disjoint_exact_cover(n in 1usize..60, seed in 0u64..500) {
            let (tr, va, te) = split_corpus(corpus(n), (0.8, 0.1, 0.1), seed).unwrap();
            let mut seen = BTreeSet::new();
            for part in [&tr, &va, &te] {
                for narrative in part {
                    prop_assert!(seen.insert(narrative.id.clone()), "duplicate {}", narrative.id);
                }
            }
            prop_assert_eq!(seen.len(), n);
        }
    }
}
