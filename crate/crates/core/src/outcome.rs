//! Ordinal outcomes and the two-group sample they live in.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A value that can be compared against another outcome of the same kind.
///
/// Higher is better. Numeric responses and composite (death, change)
/// endpoints both implement this; nothing downstream needs arithmetic on
/// outcomes except the Hodges-Lehmann shift.
pub trait Outcome {
    fn compare(&self, other: &Self) -> Ordering;

    /// A value that compares `Equal` to every other value. Such values break
    /// transitivity, so rank-based shortcuts must not be used on samples
    /// containing them.
    fn ties_with_all(&self) -> bool {
        false
    }

    /// Values that cannot take part in a comparison at all (NaN).
    fn is_orderable(&self) -> bool {
        true
    }
}

impl Outcome for f64 {
    fn compare(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }

    fn is_orderable(&self) -> bool {
        !self.is_nan()
    }
}

impl Outcome for f32 {
    fn compare(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }

    fn is_orderable(&self) -> bool {
        !self.is_nan()
    }
}

macro_rules! integer_outcome {
    ($($t:ty),*) => {
        $(impl Outcome for $t {
            fn compare(&self, other: &Self) -> Ordering {
                self.cmp(other)
            }
        })*
    };
}

integer_outcome!(i8, i16, i32, i64, u8, u16, u32, u64, usize);

/// Outcome of one pairwise comparison: 1 for a win, ½ for a tie, 0 for a loss.
#[inline]
pub fn win_score<T: Outcome>(candidate: &T, opponent: &T) -> f64 {
    if candidate.ties_with_all() || opponent.ties_with_all() {
        return 0.5;
    }
    match candidate.compare(opponent) {
        Ordering::Greater => 1.0,
        Ordering::Equal => 0.5,
        Ordering::Less => 0.0,
    }
}

/// Placebo responses `y1` and active responses `y2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSample<T> {
    y1: Vec<T>,
    y2: Vec<T>,
    pairwise_only: bool,
}

impl<T: Outcome> TwoSample<T> {
    pub fn new(placebo: Vec<T>, active: Vec<T>) -> Result<Self> {
        if placebo.is_empty() || active.is_empty() {
            return Err(Error::EmptySample);
        }
        for (group, values) in [("placebo", &placebo), ("active", &active)] {
            if let Some(index) = values.iter().position(|v| !v.is_orderable()) {
                return Err(Error::Unorderable { group, index });
            }
        }
        let pairwise_only = placebo.iter().chain(active.iter()).any(Outcome::ties_with_all);
        Ok(TwoSample {
            y1: placebo,
            y2: active,
            pairwise_only,
        })
    }

    /// Same sample with the arms exchanged.
    pub fn swapped(&self) -> Self
    where
        T: Clone,
    {
        TwoSample {
            y1: self.y2.clone(),
            y2: self.y1.clone(),
            pairwise_only: self.pairwise_only,
        }
    }
}

impl<T> TwoSample<T> {
    pub fn placebo(&self) -> &[T] {
        &self.y1
    }

    pub fn active(&self) -> &[T] {
        &self.y2
    }

    pub fn n_placebo(&self) -> usize {
        self.y1.len()
    }

    pub fn n_active(&self) -> usize {
        self.y2.len()
    }

    pub fn n_total(&self) -> usize {
        self.y1.len() + self.y2.len()
    }

    /// True when some value ties with everything, which rules out ranking.
    pub fn requires_pairwise(&self) -> bool {
        self.pairwise_only
    }

    /// Pooled sample in input order: placebo first, then active.
    pub fn pooled(&self) -> impl Iterator<Item = &T> {
        self.y1.iter().chain(self.y2.iter())
    }

    pub(crate) fn require_two_per_group(&self) -> Result<()> {
        if self.y1.len() < 2 || self.y2.len() < 2 {
            return Err(Error::TooFewForVariance);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_arms() {
        assert_eq!(TwoSample::<f64>::new(vec![], vec![1.0]), Err(Error::EmptySample));
        assert_eq!(TwoSample::<f64>::new(vec![1.0], vec![]), Err(Error::EmptySample));
    }

    #[test]
    fn rejects_nan() {
        let err = TwoSample::new(vec![1.0], vec![2.0, f64::NAN]).unwrap_err();
        assert_eq!(err, Error::Unorderable { group: "active", index: 1 });
    }

    #[test]
    fn win_scores() {
        assert_eq!(win_score(&2, &1), 1.0);
        assert_eq!(win_score(&1, &1), 0.5);
        assert_eq!(win_score(&0, &1), 0.0);
    }
}
