//! Zero-masking of step features: the schedule, the sampler and the
//! application to a feature matrix.

use rand::Rng;

use crate::nn::Tensor;
use crate::{Error, Result};

use super::Variant;

/// The set of step indices whose features are zeroed for one narrative,
/// plus the scheduled count that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MaskPlan {
    /// Sorted, distinct step indices.
    pub masked_indices: Vec<usize>,
    pub epoch_mask_count: usize,
}

impl MaskPlan {
    pub fn empty() -> MaskPlan {
        MaskPlan::default()
    }

    pub fn single(index: usize) -> MaskPlan {
        MaskPlan { masked_indices: vec![index], epoch_mask_count: 1 }
    }

    pub fn contains(&self, step: usize) -> bool {
        self.masked_indices.binary_search(&step).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.masked_indices.is_empty()
    }
}

/// Masked steps per narrative at a given epoch: XE never masks,
/// V-Infill always masks one step, and V-InfillR ramps 0 -> 1 -> 2 at
/// the first and second quarter boundaries of the epoch budget.
pub fn mask_count_for_epoch(epoch: usize, total_epochs: usize, variant: Variant) -> usize {
    match variant {
        Variant::Xe => 0,
        Variant::VInfill => 1,
        Variant::VInfillR => {
            if epoch < total_epochs / 4 {
                0
            } else if epoch < total_epochs / 2 {
                1
            } else {
                2
            }
        }
    }
}

/// Draw `count` distinct step indices uniformly. A count of zero
/// consumes no randomness at all, so a variant that never masks leaves
/// the RNG stream untouched.
pub fn sample_mask_indices<R: Rng>(
    n_steps: usize,
    count: usize,
    rng: &mut R,
) -> Result<MaskPlan> {
    if count > n_steps {
        return Err(Error::invalid(format!(
            "cannot mask {count} of {n_steps} steps"
        )));
    }
    if count == 0 {
        return Ok(MaskPlan::empty());
    }
    let mut masked_indices = rand::seq::index::sample(rng, n_steps, count).into_vec();
    masked_indices.sort_unstable();
    Ok(MaskPlan { masked_indices, epoch_mask_count: count })
}

/// Zero the rows of `features` named by the plan; all other rows are
/// copied bit-identically.
pub fn apply_mask(features: &Tensor, plan: &MaskPlan) -> Result<Tensor> {
    let shape = features.shape();
    if shape.len() != 2 {
        return Err(Error::ShapeMismatch {
            op: "apply_mask",
            details: format!("expected a rank-2 feature matrix, got {shape:?}"),
        });
    }
    let (n, d) = (shape[0], shape[1]);
    if let Some(&bad) = plan.masked_indices.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!(
            "mask index {bad} out of range for {n} steps"
        )));
    }
    let mut out = features.clone();
    for &i in &plan.masked_indices {
        out.values_mut()[i * d..(i + 1) * d].fill(0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_matches_the_quarter_table() {
        use Variant::VInfillR;
        // T = 100: the quarters break at 25 and 50.
        assert_eq!(mask_count_for_epoch(10, 100, VInfillR), 0);
        assert_eq!(mask_count_for_epoch(30, 100, VInfillR), 1);
        assert_eq!(mask_count_for_epoch(60, 100, VInfillR), 2);
        assert_eq!(mask_count_for_epoch(99, 100, VInfillR), 2);
    }

    #[test]
    fn schedule_is_monotone_and_capped_for_small_budgets() {
        for total in [4, 10, 100] {
            let counts: Vec<usize> = (0..total)
                .map(|e| mask_count_for_epoch(e, total, Variant::VInfillR))
                .collect();
            assert!(counts.windows(2).all(|w| w[0] <= w[1]), "T={total}: {counts:?}");
            assert!(counts.iter().all(|&c| c <= 2));
            assert_eq!(*counts.last().unwrap(), 2);
        }
    }

    #[test]
    fn fixed_variants_ignore_the_epoch() {
        for epoch in [0, 7, 99] {
            assert_eq!(mask_count_for_epoch(epoch, 100, Variant::Xe), 0);
            assert_eq!(mask_count_for_epoch(epoch, 100, Variant::VInfill), 1);
        }
    }

    #[test]
    fn count_zero_does_not_touch_the_rng() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let plan = sample_mask_indices(5, 0, &mut a).unwrap();
        assert!(plan.is_empty());
        assert_eq!(a.gen::<u64>(), b.gen::<u64>(), "RNG advanced on an empty plan");
    }

    #[test]
    fn oversized_count_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_mask_indices(3, 4, &mut rng).is_err());
    }

    #[test]
    fn two_of_five_are_always_distinct_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let plan = sample_mask_indices(5, 2, &mut rng).unwrap();
            assert_eq!(plan.masked_indices.len(), 2);
            assert!(plan.masked_indices[0] < plan.masked_indices[1]);
            assert!(plan.masked_indices[1] < 5);
        }
    }

    #[test]
    fn single_index_draws_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 100_000;
        let mut hits = [0usize; 5];
        for _ in 0..n {
            let plan = sample_mask_indices(5, 1, &mut rng).unwrap();
            hits[plan.masked_indices[0]] += 1;
        }
        for (i, &h) in hits.iter().enumerate() {
            let freq = h as f64 / n as f64;
            assert!((freq - 0.2).abs() < 0.01, "index {i} frequency {freq}");
        }
    }

    #[test]
    fn masked_rows_zero_out_and_others_stay_bit_identical() {
        let features = Tensor::matrix(
            5,
            2,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
        )
        .unwrap();
        let masked = apply_mask(&features, &MaskPlan::single(1)).unwrap();
        assert_eq!(masked.row(1), &[0.0, 0.0]);
        for k in [0, 2, 3, 4] {
            assert_eq!(masked.row(k), features.row(k), "row {k}");
        }
    }

    #[test]
    fn empty_plan_is_the_identity() {
        let features = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.25, 0.0, -0.125]).unwrap();
        let out = apply_mask(&features, &MaskPlan::empty()).unwrap();
        assert_eq!(out.values(), features.values());
    }

    #[test]
    fn double_mask_zeroes_exactly_two_rows() {
        let features = Tensor::matrix(5, 3, (0..15).map(|i| i as f64 + 1.0).collect()).unwrap();
        let plan = MaskPlan { masked_indices: vec![0, 4], epoch_mask_count: 2 };
        let masked = apply_mask(&features, &plan).unwrap();
        let zero_rows: Vec<usize> =
            (0..5).filter(|&k| masked.row(k).iter().all(|&v| v == 0.0)).collect();
        assert_eq!(zero_rows, vec![0, 4]);
    }

    #[test]
    fn out_of_range_mask_index_errors() {
        let features = Tensor::matrix(2, 2, vec![1.0; 4]).unwrap();
        let err = apply_mask(&features, &MaskPlan::single(2)).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }
}
