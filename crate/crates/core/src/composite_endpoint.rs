//! Composite ordinal endpoint: a change score for survivors, with every death
//! ranked below every survivor.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::classical_tests::NumericOutcome;
use crate::error::{Error, Result};
use crate::outcome::Outcome;

/// One subject's raw data at the analysis timepoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SubjectRecord {
    pub id: String,
    /// Change from baseline, present only for survivors with an observation.
    pub change: Option<f64>,
    pub died: bool,
    /// Time of death, for subjects who died.
    pub death_time: Option<f64>,
    /// Last change observed while alive, for subjects who died.
    pub last_change_alive: Option<f64>,
    /// Alive but unobserved for reasons other than death.
    pub missing: bool,
}

impl SubjectRecord {
    pub fn alive(id: impl Into<String>, change: f64) -> Self {
        SubjectRecord {
            id: id.into(),
            change: Some(change),
            ..Default::default()
        }
    }

    pub fn death(id: impl Into<String>, death_time: Option<f64>, last_change_alive: Option<f64>) -> Self {
        SubjectRecord {
            id: id.into(),
            died: true,
            death_time,
            last_change_alive,
            ..Default::default()
        }
    }

    pub fn missing(id: impl Into<String>) -> Self {
        SubjectRecord {
            id: id.into(),
            missing: true,
            ..Default::default()
        }
    }
}

/// How deaths are ordered among themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeathStrategy {
    #[default]
    AllDeathsEqual,
    /// Higher last observed change ranks higher.
    DeathsByLastValue,
    /// Later death ranks higher.
    DeathsBySurvivalTime,
}

/// What to do with subjects flagged `missing`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Reject them; impute upstream.
    #[default]
    Error,
    /// Treat them as tied with every other subject.
    Ties,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompositeStrategy {
    pub deaths: DeathStrategy,
    pub missing: MissingPolicy,
}

impl CompositeStrategy {
    pub fn new(deaths: DeathStrategy, missing: MissingPolicy) -> Self {
        CompositeStrategy { deaths, missing }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Death,
    Alive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeValue {
    pub tier: Tier,
    /// Ordering key within the tier.
    pub key: f64,
    pub tie_with_all: bool,
}

impl CompositeValue {
    pub fn alive(change: f64) -> Self {
        CompositeValue {
            tier: Tier::Alive,
            key: change,
            tie_with_all: false,
        }
    }

    pub fn death(key: f64) -> Self {
        CompositeValue {
            tier: Tier::Death,
            key,
            tie_with_all: false,
        }
    }

    pub fn universal_tie() -> Self {
        CompositeValue {
            tier: Tier::Alive,
            key: 0.0,
            tie_with_all: true,
        }
    }
}

impl Outcome for CompositeValue {
    fn compare(&self, other: &Self) -> Ordering {
        if self.tie_with_all || other.tie_with_all {
            return Ordering::Equal;
        }
        self.tier.cmp(&other.tier).then(self.key.total_cmp(&other.key))
    }

    fn ties_with_all(&self) -> bool {
        self.tie_with_all
    }

    fn is_orderable(&self) -> bool {
        self.tie_with_all || self.key.is_finite()
    }
}

// Composite values have no arithmetic, so shift estimators reject them.
impl NumericOutcome for CompositeValue {
    fn as_f64(&self) -> Option<f64> {
        None
    }
}

fn reject(record: &SubjectRecord, reason: impl Into<String>) -> Error {
    Error::Subject {
        id: record.id.clone(),
        reason: reason.into(),
    }
}

fn finite(record: &SubjectRecord, value: Option<f64>, field: &str) -> Result<Option<f64>> {
    match value {
        Some(v) if !v.is_finite() => Err(reject(record, format!("{field} is not finite"))),
        other => Ok(other),
    }
}

fn composite_value(record: &SubjectRecord, strategy: CompositeStrategy) -> Result<CompositeValue> {
    let change = finite(record, record.change, "change")?;
    let death_time = finite(record, record.death_time, "death time")?;
    let last = finite(record, record.last_change_alive, "last change before death")?;

    if record.died {
        if change.is_some() {
            return Err(reject(record, "died before the timepoint but has a change value"));
        }
        if record.missing {
            return Err(reject(record, "flagged both as died and as missing"));
        }
        if death_time.is_some_and(|t| t < 0.0) {
            return Err(reject(record, "negative death time"));
        }
        let key = match strategy.deaths {
            DeathStrategy::AllDeathsEqual => 0.0,
            DeathStrategy::DeathsByLastValue => {
                last.ok_or_else(|| reject(record, "death without a last observed change"))?
            }
            DeathStrategy::DeathsBySurvivalTime => {
                death_time.ok_or_else(|| reject(record, "death without a death time"))?
            }
        };
        return Ok(CompositeValue::death(key));
    }

    if death_time.is_some() {
        return Err(reject(record, "death time given for a subject who did not die"));
    }
    if record.missing {
        if change.is_some() {
            return Err(reject(record, "flagged missing but has a change value"));
        }
        return match strategy.missing {
            MissingPolicy::Ties => Ok(CompositeValue::universal_tie()),
            MissingPolicy::Error => Err(reject(record, "missing outcome; impute upstream or treat as ties")),
        };
    }
    match change {
        Some(c) => Ok(CompositeValue::alive(c)),
        None => Err(reject(record, "no change value and not flagged as died or missing")),
    }
}

/// Maps records to composite values, failing on the first invalid record.
pub fn build_composite(records: &[SubjectRecord], strategy: CompositeStrategy) -> Result<Vec<CompositeValue>> {
    records.iter().map(|r| composite_value(r, strategy)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::TwoSample;
    use crate::wincore::{win_proportion, win_proportion_pairwise};
    use proptest::prelude::*;

    fn build(records: &[SubjectRecord], deaths: DeathStrategy) -> Vec<CompositeValue> {
        build_composite(records, CompositeStrategy::new(deaths, MissingPolicy::Error)).unwrap()
    }

    #[test]
    fn deaths_tied_and_below_survivors() {
        let v = build(
            &[
                SubjectRecord::death("a", Some(10.0), Some(4.0)),
                SubjectRecord::death("b", Some(99.0), Some(-2.0)),
                SubjectRecord::alive("c", -1e6),
            ],
            DeathStrategy::AllDeathsEqual,
        );
        assert_eq!(v[0].compare(&v[1]), Ordering::Equal);
        assert_eq!(v[0].compare(&v[2]), Ordering::Less);
        assert_eq!(v[1].compare(&v[2]), Ordering::Less);
    }

    #[test]
    fn deaths_by_last_value() {
        let v = build(
            &[
                SubjectRecord::death("a", None, Some(5.0)),
                SubjectRecord::death("b", None, Some(-3.0)),
                SubjectRecord::alive("c", -50.0),
                SubjectRecord::death("d", None, Some(5.0)),
            ],
            DeathStrategy::DeathsByLastValue,
        );
        assert_eq!(v[0].compare(&v[1]), Ordering::Greater);
        assert_eq!(v[0].compare(&v[2]), Ordering::Less);
        assert_eq!(v[1].compare(&v[2]), Ordering::Less);
        assert_eq!(v[0].compare(&v[3]), Ordering::Equal);
    }

    #[test]
    fn deaths_by_survival_time() {
        let v = build(
            &[
                SubjectRecord::death("a", Some(30.0), None),
                SubjectRecord::death("b", Some(200.0), None),
                SubjectRecord::alive("c", -50.0),
            ],
            DeathStrategy::DeathsBySurvivalTime,
        );
        assert_eq!(v[1].compare(&v[0]), Ordering::Greater);
        assert_eq!(v[1].compare(&v[2]), Ordering::Less);
    }

    #[test]
    fn missing_keys_name_the_subject() {
        let strategy = CompositeStrategy::new(DeathStrategy::DeathsByLastValue, MissingPolicy::Error);
        let err = build_composite(&[SubjectRecord::death("s17", Some(3.0), None)], strategy).unwrap_err();
        assert!(matches!(&err, Error::Subject { id, .. } if id == "s17"));

        let strategy = CompositeStrategy::new(DeathStrategy::DeathsBySurvivalTime, MissingPolicy::Error);
        let err = build_composite(&[SubjectRecord::death("s18", None, Some(1.0))], strategy).unwrap_err();
        assert!(matches!(&err, Error::Subject { id, .. } if id == "s18"));

        let err = build_composite(&[SubjectRecord::missing("s19")], CompositeStrategy::default()).unwrap_err();
        assert!(matches!(&err, Error::Subject { id, .. } if id == "s19"));
    }

    #[test]
    fn inconsistent_records_rejected() {
        let s = CompositeStrategy::new(DeathStrategy::AllDeathsEqual, MissingPolicy::Ties);
        let mut r = SubjectRecord::death("x", None, None);
        r.change = Some(1.0);
        assert!(build_composite(&[r], s).is_err());
        let mut r = SubjectRecord::alive("x", 1.0);
        r.death_time = Some(3.0);
        assert!(build_composite(&[r], s).is_err());
        assert!(build_composite(&[SubjectRecord::death("x", Some(-1.0), None)], s).is_err());
        let empty = SubjectRecord {
            id: "x".into(),
            ..Default::default()
        };
        assert!(build_composite(&[empty], s).is_err());
        assert!(build_composite(&[SubjectRecord::alive("x", f64::NAN)], s).is_err());
    }

    #[test]
    fn missing_as_ties() {
        let s = CompositeStrategy::new(DeathStrategy::AllDeathsEqual, MissingPolicy::Ties);
        let v = build_composite(
            &[
                SubjectRecord::missing("m"),
                SubjectRecord::death("d", None, None),
                SubjectRecord::alive("a", 2.0),
            ],
            s,
        )
        .unwrap();
        assert_eq!(v[0].compare(&v[1]), Ordering::Equal);
        assert_eq!(v[0].compare(&v[2]), Ordering::Equal);
        assert_eq!(v[1].compare(&v[2]), Ordering::Less);

        let sample = TwoSample::new(vec![v[1], v[0]], vec![v[2], v[0]]).unwrap();
        assert!(sample.requires_pairwise());
        // active alive beats dead (1) and ties missing (½); active missing ties both (½ + ½)
        assert_eq!(win_proportion(&sample), (1.0 + 0.5 + 0.5 + 0.5) / 4.0);
        assert!(crate::ranks::group_ranks(&sample).is_err());
    }

    #[test]
    fn zero_deaths_matches_raw_changes() {
        let y1 = [0.3, -1.2, 2.0, 2.0, 0.0, 5.5];
        let y2 = [1.0, 2.0, -0.4, 3.3, 0.0];
        let raw = TwoSample::new(y1.to_vec(), y2.to_vec()).unwrap();
        let to_records = |ys: &[f64]| -> Vec<SubjectRecord> {
            ys.iter().enumerate().map(|(i, &y)| SubjectRecord::alive(i.to_string(), y)).collect()
        };
        for deaths in [
            DeathStrategy::AllDeathsEqual,
            DeathStrategy::DeathsByLastValue,
            DeathStrategy::DeathsBySurvivalTime,
        ] {
            let comp = TwoSample::new(build(&to_records(&y1), deaths), build(&to_records(&y2), deaths)).unwrap();
            assert_eq!(win_proportion(&comp).to_bits(), win_proportion(&raw).to_bits());
        }
    }

    fn arb_value() -> impl Strategy<Value = CompositeValue> {
        prop_oneof![
            (-3i32..4).prop_map(|k| CompositeValue::alive(k as f64)),
            (-3i32..4).prop_map(|k| CompositeValue::death(k as f64)),
            Just(CompositeValue::universal_tie()),
        ]
    }

    fn arb_equal_deaths() -> impl Strategy<Value = CompositeValue> {
        prop_oneof![
            (-3i32..4).prop_map(|k| CompositeValue::alive(k as f64)),
            Just(CompositeValue::death(0.0)),
            Just(CompositeValue::universal_tie()),
        ]
    }

    proptest! {
        #[test]
        fn comparator_is_a_preorder(a in arb_value(), b in arb_value(), c in arb_value()) {
            prop_assert_eq!(a.compare(&a), Ordering::Equal);
            prop_assert_eq!(a.compare(&b), b.compare(&a).reverse());
            let ordinary = [a, b, c].iter().all(|v| !v.tie_with_all);
            if ordinary {
                if a.compare(&b) != Ordering::Greater && b.compare(&c) != Ordering::Greater {
                    prop_assert_ne!(a.compare(&c), Ordering::Greater);
                }
                if a.compare(&b) == Ordering::Equal && b.compare(&c) == Ordering::Equal {
                    prop_assert_eq!(a.compare(&c), Ordering::Equal);
                }
            } else {
                // the tie class absorbs: any comparison involving it is Equal
                for v in [a, b, c] {
                    if v.tie_with_all {
                        for w in [a, b, c] {
                            prop_assert_eq!(v.compare(&w), Ordering::Equal);
                        }
                    }
                }
            }
            if a.tier == Tier::Death && b.tier == Tier::Alive && !a.tie_with_all && !b.tie_with_all {
                prop_assert_eq!(a.compare(&b), Ordering::Less);
            }
        }

        #[test]
        fn extra_placebo_death_never_lowers_theta(
            y1 in proptest::collection::vec(arb_equal_deaths(), 1..12),
            y2 in proptest::collection::vec(arb_equal_deaths(), 1..12),
        ) {
            let before = win_proportion_pairwise(&TwoSample::new(y1.clone(), y2.clone()).unwrap());
            let mut more = y1.clone();
            more.push(CompositeValue::death(0.0));
            let after = win_proportion_pairwise(&TwoSample::new(more, y2.clone()).unwrap());
            prop_assert!(after.theta_hat >= before.theta_hat - 1e-12);
            let wins = |p: &crate::wincore::IndividualProportions| p.theta_hat * (p.n_placebo() * p.n_active()) as f64;
            prop_assert!(wins(&after) >= wins(&before) - 1e-9);
        }
    }
}
