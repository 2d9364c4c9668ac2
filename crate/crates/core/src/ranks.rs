//! Midranks over the pooled sample and within each group.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::outcome::{Outcome, TwoSample};

/// Ranks of a two-group sample.
///
/// `combined` is laid out placebo first, then active, matching
/// [`TwoSample::pooled`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankVectors {
    pub combined: Vec<f64>,
    pub within_placebo: Vec<f64>,
    pub within_active: Vec<f64>,
    pub mean_rank_placebo: f64,
    pub mean_rank_active: f64,
    /// Pooled rank variance with an `N − 1` denominator.
    pub rank_variance: f64,
}

impl RankVectors {
    pub fn n_placebo(&self) -> usize {
        self.within_placebo.len()
    }

    pub fn n_active(&self) -> usize {
        self.within_active.len()
    }

    pub fn n_total(&self) -> usize {
        self.combined.len()
    }

    pub fn placebo_ranks(&self) -> &[f64] {
        &self.combined[..self.n_placebo()]
    }

    pub fn active_ranks(&self) -> &[f64] {
        &self.combined[self.n_placebo()..]
    }

    /// Wilcoxon rank-sum `W` of the active group.
    pub fn rank_sum_active(&self) -> f64 {
        self.active_ranks().iter().sum()
    }
}

/// Midranks of `values`: tied values share the mean of the integer ranks
/// they span.
pub fn midranks<T: Outcome>(values: &[T]) -> Result<Vec<f64>> {
    let refs: Vec<&T> = values.iter().collect();
    midranks_of(&refs)
}

fn midranks_of<T: Outcome>(values: &[&T]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if values.iter().any(|v| v.ties_with_all()) {
        return Err(Error::NotTotallyOrdered);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].compare(values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let head = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]].compare(head) == Ordering::Equal {
            end += 1;
        }
        // positions start..end hold integer ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Pooled and within-group midranks of a two-group sample.
pub fn group_ranks<T: Outcome>(sample: &TwoSample<T>) -> Result<RankVectors> {
    if sample.requires_pairwise() {
        return Err(Error::NotTotallyOrdered);
    }
    let pooled: Vec<&T> = sample.pooled().collect();
    let combined = midranks_of(&pooled)?;
    let within_placebo = midranks(sample.placebo())?;
    let within_active = midranks(sample.active())?;

    let n1 = sample.n_placebo();
    let n = combined.len() as f64;
    let mean_rank_placebo = combined[..n1].iter().sum::<f64>() / n1 as f64;
    let mean_rank_active = combined[n1..].iter().sum::<f64>() / sample.n_active() as f64;
    let rank_variance = if combined.len() > 1 {
        let mean = combined.iter().sum::<f64>() / n;
        combined.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };

    Ok(RankVectors {
        combined,
        within_placebo,
        within_active,
        mean_rank_placebo,
        mean_rank_active,
        rank_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midranks_with_tie_runs() {
        let r = midranks(&[3, 3, 2, 1, 4, 4, 4, 4, 4]).unwrap();
        assert_eq!(r, vec![3.5, 3.5, 2.0, 1.0, 7.0, 7.0, 7.0, 7.0, 7.0]);
    }

    #[test]
    fn midranks_distinct_and_all_tied() {
        assert_eq!(midranks(&[10, 20, 30]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(midranks(&[5, 5, 5, 5]).unwrap(), vec![2.5; 4]);
    }

    #[test]
    fn midranks_empty() {
        assert_eq!(midranks::<f64>(&[]), Err(Error::EmptySample));
    }

    #[test]
    fn group_ranks_small_example() {
        let s = TwoSample::new(vec![0, 1, 2], vec![1, 1, 2]).unwrap();
        let r = group_ranks(&s).unwrap();
        assert_eq!(r.combined, vec![1.0, 3.0, 5.5, 3.0, 3.0, 5.5]);
        assert_eq!(r.within_active, vec![1.5, 1.5, 3.0]);
        assert_eq!(r.within_placebo, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.rank_sum_active(), 11.5);
    }

    #[test]
    fn group_ranks_singletons() {
        let s = TwoSample::new(vec![1], vec![2]).unwrap();
        let r = group_ranks(&s).unwrap();
        assert_eq!(r.combined, vec![1.0, 2.0]);
        assert_eq!(r.within_placebo, vec![1.0]);
        assert_eq!(r.within_active, vec![1.0]);
    }

    #[test]
    fn group_ranks_identical_groups() {
        let s = TwoSample::new(vec![1, 2], vec![1, 2]).unwrap();
        assert_eq!(group_ranks(&s).unwrap().combined, vec![1.5, 3.5, 1.5, 3.5]);
    }

    #[test]
    fn tie_free_rank_variance() {
        let s = TwoSample::new(vec![0.3, 1.7, -2.0, 5.5], vec![0.1, 9.0, 4.4]).unwrap();
        let r = group_ranks(&s).unwrap();
        let n = 7.0;
        assert!((r.rank_variance - n * (n + 1.0) / 12.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn totals_are_preserved(values in prop::collection::vec(0i32..6, 1..60)) {
            let r = midranks(&values).unwrap();
            let n = values.len() as f64;
            prop_assert_eq!(r.iter().sum::<f64>(), n * (n + 1.0) / 2.0);
            prop_assert!(r.iter().all(|&x| (1.0..=n).contains(&x)));
        }

        #[test]
        fn invariant_under_increasing_transform(values in prop::collection::vec(-50i32..50, 1..40)) {
            let transformed: Vec<f64> = values.iter().map(|&v| (v as f64 / 7.0).exp() * 3.0 - 1.0).collect();
            prop_assert_eq!(midranks(&values).unwrap(), midranks(&transformed).unwrap());
        }

        #[test]
        fn permutation_keeps_rank_of_each_value(values in prop::collection::vec(0i32..8, 2..40), rot in 0usize..40) {
            let k = rot % values.len();
            let mut rotated = values.clone();
            rotated.rotate_left(k);
            let a = midranks(&values).unwrap();
            let b = midranks(&rotated).unwrap();
            for i in 0..values.len() {
                prop_assert_eq!(a[(i + k) % values.len()], b[i]);
            }
        }

        #[test]
        fn within_group_totals(y1 in prop::collection::vec(0i32..5, 1..30), y2 in prop::collection::vec(0i32..5, 1..30)) {
            let (n1, n2) = (y1.len() as f64, y2.len() as f64);
            let r = group_ranks(&TwoSample::new(y1, y2).unwrap()).unwrap();
            prop_assert_eq!(r.within_placebo.iter().sum::<f64>(), n1 * (n1 + 1.0) / 2.0);
            prop_assert_eq!(r.within_active.iter().sum::<f64>(), n2 * (n2 + 1.0) / 2.0);
            let n = n1 + n2;
            prop_assert_eq!(r.combined.iter().sum::<f64>(), n * (n + 1.0) / 2.0);
        }
    }
}
