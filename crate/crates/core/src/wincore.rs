//! Crude win proportion, its standard error, and the derived win ratio and
//! number needed to treat.
//!
//! Placements come from two routes. [`win_proportion_pairwise`] walks all
//! `n₁·n₂` pairs and is kept as the reference; the rank route
//! ([`placements_from_ranks`]) is `O(N log N)` and is what
//! [`individual_proportions`] uses whenever the sample is totally ordered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{mean, sum_sq_dev};
use crate::normal;
use crate::outcome::{win_score, Outcome, TwoSample};
use crate::ranks::{group_ranks, RankVectors};

/// Placements of every subject against the opposite arm.
///
/// `p[j]` is the share of placebo subjects that active subject `j` beats
/// (ties count ½); `q[i]` the same for placebo subject `i` against the
/// active arm.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualProportions {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub theta_hat: f64,
}

impl IndividualProportions {
    pub fn n_placebo(&self) -> usize {
        self.q.len()
    }

    pub fn n_active(&self) -> usize {
        self.p.len()
    }
}

/// Reference `O(n₁n₂)` placements by direct pairwise comparison.
pub fn win_proportion_pairwise<T: Outcome>(sample: &TwoSample<T>) -> IndividualProportions {
    let (y1, y2) = (sample.placebo(), sample.active());
    let p: Vec<f64> = y2
        .iter()
        .map(|a| y1.iter().map(|b| win_score(a, b)).sum::<f64>() / y1.len() as f64)
        .collect();
    let q: Vec<f64> = y1
        .iter()
        .map(|b| y2.iter().map(|a| win_score(b, a)).sum::<f64>() / y2.len() as f64)
        .collect();
    let theta_hat = mean(&p);
    IndividualProportions { p, q, theta_hat }
}

/// Placements recovered from pooled minus within-group ranks.
pub fn placements_from_ranks(ranks: &RankVectors) -> IndividualProportions {
    let n1 = ranks.n_placebo() as f64;
    let n2 = ranks.n_active() as f64;
    let p: Vec<f64> = ranks
        .active_ranks()
        .iter()
        .zip(&ranks.within_active)
        .map(|(r, within)| (r - within) / n1)
        .collect();
    let q: Vec<f64> = ranks
        .placebo_ranks()
        .iter()
        .zip(&ranks.within_placebo)
        .map(|(r, within)| (r - within) / n2)
        .collect();
    let theta_hat = win_proportion_ranks(ranks);
    IndividualProportions { p, q, theta_hat }
}

/// θ̂ = Σⱼ (R₂ⱼ − R̃₂ⱼ) / (n₁n₂).
pub fn win_proportion_ranks(ranks: &RankVectors) -> f64 {
    let wins: f64 = ranks
        .active_ranks()
        .iter()
        .zip(&ranks.within_active)
        .map(|(r, within)| r - within)
        .sum();
    wins / (ranks.n_placebo() as f64 * ranks.n_active() as f64)
}

/// Placements by the fastest valid route: ranks for totally ordered data,
/// pairwise comparison when some value ties with everything.
pub fn individual_proportions<T: Outcome>(sample: &TwoSample<T>) -> IndividualProportions {
    if sample.requires_pairwise() {
        return win_proportion_pairwise(sample);
    }
    let ranks = group_ranks(sample).expect("non-empty, totally ordered sample always ranks");
    placements_from_ranks(&ranks)
}

/// Win proportion θ̂ of the active arm against placebo.
pub fn win_proportion<T: Outcome>(sample: &TwoSample<T>) -> f64 {
    individual_proportions(sample).theta_hat
}

/// Sample variances of the placements and the squared standard error of θ̂
/// they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementVariance {
    /// var(Y₂⁰) = Σ(pⱼ − θ̂)² / (n₂ − 1)
    pub var_active: f64,
    /// var(Y₁⁰) = Σ(qᵢ − (1 − θ̂))² / (n₁ − 1)
    pub var_placebo: f64,
    pub n_placebo: usize,
    pub n_active: usize,
}

impl PlacementVariance {
    /// σ̂² = var(Y₂⁰)/n₂ + var(Y₁⁰)/n₁.
    pub fn sigma_sq(&self) -> f64 {
        self.var_active / self.n_active as f64 + self.var_placebo / self.n_placebo as f64
    }

    /// Same quantity with `1/n` instead of `1/(n − 1)` in the placement
    /// variances.
    pub fn biased_sigma_sq(&self) -> f64 {
        let (n1, n2) = (self.n_placebo as f64, self.n_active as f64);
        self.var_active * (n2 - 1.0) / (n2 * n2) + self.var_placebo * (n1 - 1.0) / (n1 * n1)
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_sq() == 0.0
    }
}

pub fn variance_theta(props: &IndividualProportions) -> Result<PlacementVariance> {
    let (n1, n2) = (props.n_placebo(), props.n_active());
    if n1 < 2 || n2 < 2 {
        return Err(Error::TooFewForVariance);
    }
    let theta = props.theta_hat;
    Ok(PlacementVariance {
        var_active: sum_sq_dev(&props.p, theta) / (n2 as f64 - 1.0),
        var_placebo: sum_sq_dev(&props.q, 1.0 - theta) / (n1 as f64 - 1.0),
        n_placebo: n1,
        n_active: n2,
    })
}

/// σ̂² written in ranks: residuals `R − R̃ − R̄ + (n + 1)/2` per group.
pub fn variance_theta_rank_form(ranks: &RankVectors) -> Result<f64> {
    let (n1, n2) = (ranks.n_placebo(), ranks.n_active());
    if n1 < 2 || n2 < 2 {
        return Err(Error::TooFewForVariance);
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let group_term = |pooled: &[f64], within: &[f64], mean_rank: f64, n: f64| -> f64 {
        pooled
            .iter()
            .zip(within)
            .map(|(r, w)| (r - w - mean_rank + (n + 1.0) / 2.0).powi(2))
            .sum()
    };
    let placebo = group_term(ranks.placebo_ranks(), &ranks.within_placebo, ranks.mean_rank_placebo, n1f);
    let active = group_term(ranks.active_ranks(), &ranks.within_active, ranks.mean_rank_active, n2f);
    Ok(placebo / (n1f * (n1f - 1.0) * n2f * n2f) + active / (n2f * (n2f - 1.0) * n1f * n1f))
}

/// A win-probability estimate with its normal-theory inference against ½.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub z: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub n_placebo: usize,
    pub n_active: usize,
    /// Set when a CI endpoint was pulled back into [0, 1].
    pub ci_clamped: bool,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

impl Estimate {
    /// Builds the Wald interval `estimate ± C_α·se`, clamped to [0, 1], and
    /// the two-sided test of θ = ½.
    pub fn from_normal(
        estimate: f64,
        se: f64,
        alpha: f64,
        n_placebo: usize,
        n_active: usize,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if !(se > 0.0) || !se.is_finite() {
            return Err(Error::ZeroVariance);
        }
        let half_width = normal::critical_value(alpha) * se;
        let (raw_lower, raw_upper) = (estimate - half_width, estimate + half_width);
        let ci_lower = raw_lower.clamp(0.0, 1.0).min(estimate);
        let ci_upper = raw_upper.clamp(0.0, 1.0).max(estimate);
        let z = (estimate - 0.5) / se;
        Ok(Estimate {
            estimate,
            se,
            ci_lower,
            ci_upper,
            z,
            p_value: normal::two_sided_p(z),
            alpha,
            n_placebo,
            n_active,
            ci_clamped: ci_lower != raw_lower || ci_upper != raw_upper,
        })
    }

    pub fn rejects_null(&self) -> bool {
        self.p_value < self.alpha
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

/// Crude win-probability test of θ = ½.
pub fn wp_test<T: Outcome>(sample: &TwoSample<T>, alpha: f64) -> Result<Estimate> {
    check_alpha(alpha)?;
    sample.require_two_per_group()?;
    let props = individual_proportions(sample);
    let var = variance_theta(&props)?;
    if var.is_degenerate() {
        return Err(Error::ZeroVariance);
    }
    Estimate::from_normal(
        props.theta_hat,
        var.sigma_sq().sqrt(),
        alpha,
        sample.n_placebo(),
        sample.n_active(),
    )
}

/// `x / (1 − x)`, with `+∞` at `x = 1`.
pub fn odds(x: f64) -> f64 {
    if x >= 1.0 {
        f64::INFINITY
    } else {
        x / (1.0 - x)
    }
}

/// Win ratio κ = θ/(1 − θ) and its interval, mapped from the θ interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRatioResult {
    pub kappa: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub theta: Estimate,
    /// κ̂ itself is infinite (every comparison won or tied in favour of active).
    pub unbounded: bool,
}

pub fn win_ratio(est: &Estimate) -> WinRatioResult {
    let kappa = odds(est.estimate);
    WinRatioResult {
        kappa,
        ci_lower: odds(est.ci_lower),
        ci_upper: odds(est.ci_upper),
        theta: *est,
        unbounded: kappa.is_infinite(),
    }
}

/// Relative slack under which `1/(2θ − 1)` counts as a whole number. It
/// absorbs θ values quoted to seven decimals, e.g. 0.5238095 → 21.
pub const NNT_INTEGER_TOLERANCE: f64 = 1e-5;

fn ceil_with_tolerance(x: f64) -> u64 {
    let nearest = x.round();
    if (x - nearest).abs() <= NNT_INTEGER_TOLERANCE * nearest.max(1.0) {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}

/// Number needed to treat, `⌈1/(2θ − 1)⌉`.
pub fn nnt(theta: f64) -> Result<u64> {
    if theta.is_nan() || theta > 1.0 {
        return Err(Error::invalid(format!("win probability {theta} outside [0, 1]")));
    }
    if theta <= 0.5 {
        return Err(Error::NoBenefit);
    }
    Ok(ceil_with_tolerance(1.0 / (2.0 * theta - 1.0)))
}

/// θ = κ/(1 + κ) and the NNT for a win ratio κ > 1 (κ = ∞ gives θ = 1).
pub fn nnt_from_kappa(kappa: f64) -> Result<(f64, u64)> {
    if kappa.is_nan() || kappa <= 1.0 {
        return Err(Error::NoBenefit);
    }
    if kappa.is_infinite() {
        return Ok((1.0, 1));
    }
    // 1/(2θ − 1) = (κ + 1)/(κ − 1)
    Ok((kappa / (1.0 + kappa), ceil_with_tolerance((kappa + 1.0) / (kappa - 1.0))))
}
