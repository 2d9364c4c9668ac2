//! Covariate adjustment and stratification of the win proportion.
//!
//! Adjustment is an analysis-of-covariance step on the placements: θ̂ is
//! regressed on the covariate imbalance between arms, whose expectation is
//! zero under randomization. Stratified estimates combine per-stratum
//! quantities with weights that depend only on group sizes; with covariates,
//! θ̂ and the imbalance are stratified first and adjusted once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{mean, sample_cov_about, sample_var};
use crate::outcome::{Outcome, TwoSample};
use crate::wincore::{check_alpha, individual_proportions, variance_theta, Estimate, IndividualProportions};

/// Numeric covariate values for both arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariatePair {
    x1: Vec<f64>,
    x2: Vec<f64>,
}

impl CovariatePair {
    pub fn new(placebo: Vec<f64>, active: Vec<f64>) -> Result<Self> {
        if placebo.is_empty() || active.is_empty() {
            return Err(Error::EmptySample);
        }
        for (group, values) in [("placebo", &placebo), ("active", &active)] {
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Unorderable { group, index });
            }
        }
        Ok(CovariatePair { x1: placebo, x2: active })
    }

    pub fn placebo(&self) -> &[f64] {
        &self.x1
    }

    pub fn active(&self) -> &[f64] {
        &self.x2
    }

    /// Covariates of both arms, placebo first.
    pub fn pooled(&self) -> Vec<f64> {
        self.x1.iter().chain(&self.x2).copied().collect()
    }

    pub(crate) fn check_matches<T>(&self, sample: &TwoSample<T>) -> Result<()> {
        if self.x1.len() != sample.n_placebo() {
            return Err(Error::LengthMismatch {
                what: "placebo covariate",
                expected: sample.n_placebo(),
                found: self.x1.len(),
            });
        }
        if self.x2.len() != sample.n_active() {
            return Err(Error::LengthMismatch {
                what: "active covariate",
                expected: sample.n_active(),
                found: self.x2.len(),
            });
        }
        Ok(())
    }
}

/// Covariate means, variances and covariances with the placements, all with
/// `n − 1` denominators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateMoments {
    pub mean_placebo: f64,
    pub mean_active: f64,
    pub var_placebo: f64,
    pub var_active: f64,
    /// cov(x₁, Y₁⁰) with placements centred at 1 − θ̂.
    pub cov_placebo: f64,
    /// cov(x₂, Y₂⁰) with placements centred at θ̂.
    pub cov_active: f64,
    pub n_placebo: usize,
    pub n_active: usize,
}

impl CovariateMoments {
    /// x̄₁ − x̄₂.
    pub fn imbalance(&self) -> f64 {
        self.mean_placebo - self.mean_active
    }

    /// var(x₁)/n₁ + var(x₂)/n₂.
    pub fn var_imbalance(&self) -> f64 {
        self.var_placebo / self.n_placebo as f64 + self.var_active / self.n_active as f64
    }

    /// cov(x₁, Y₁⁰)/n₁ + cov(x₂, Y₂⁰)/n₂.
    pub fn cov_sum(&self) -> f64 {
        self.cov_placebo / self.n_placebo as f64 + self.cov_active / self.n_active as f64
    }

    /// Covariance between x̄₁ − x̄₂ and θ̂. θ̂ rises with active placements and
    /// falls with placebo ones, so it is the negated covariance sum.
    pub fn cov_imbalance_theta(&self) -> f64 {
        -self.cov_sum()
    }
}

pub fn covariate_moments(props: &IndividualProportions, cov: &CovariatePair) -> Result<CovariateMoments> {
    let (n1, n2) = (props.n_placebo(), props.n_active());
    if cov.x1.len() != n1 || cov.x2.len() != n2 {
        return Err(Error::LengthMismatch {
            what: "covariate",
            expected: n1 + n2,
            found: cov.x1.len() + cov.x2.len(),
        });
    }
    if n1 < 2 || n2 < 2 {
        return Err(Error::TooFewForVariance);
    }
    Ok(CovariateMoments {
        mean_placebo: mean(&cov.x1),
        mean_active: mean(&cov.x2),
        var_placebo: sample_var(&cov.x1),
        var_active: sample_var(&cov.x2),
        cov_placebo: sample_cov_about(&cov.x1, &props.q, 1.0 - props.theta_hat),
        cov_active: sample_cov_about(&cov.x2, &props.p, props.theta_hat),
        n_placebo: n1,
        n_active: n2,
    })
}

/// Ingredients of a covariance-adjusted estimate: the crude statistic, a
/// covariate statistic with known null expectation (`imbalance`), their
/// variances and covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentTerms {
    pub theta: f64,
    pub var_theta: f64,
    pub imbalance: f64,
    pub var_imbalance: f64,
    pub cov_imbalance_theta: f64,
}

impl AdjustmentTerms {
    pub fn beta(&self) -> f64 {
        self.theta - self.imbalance * self.cov_imbalance_theta / self.var_imbalance
    }

    pub fn var_beta(&self) -> f64 {
        self.var_theta - self.cov_imbalance_theta.powi(2) / self.var_imbalance
    }

    fn estimate(&self, alpha: f64, n_placebo: usize, n_active: usize) -> Result<Estimate> {
        let var = self.var_beta();
        if !(var > 0.0) {
            return Err(Error::CovarianceExceedsBound);
        }
        Estimate::from_normal(self.beta(), var.sqrt(), alpha, n_placebo, n_active)
    }
}

pub fn adjustment_terms(props: &IndividualProportions, moments: &CovariateMoments) -> Result<AdjustmentTerms> {
    let var_theta = variance_theta(props)?.sigma_sq();
    Ok(AdjustmentTerms {
        theta: props.theta_hat,
        var_theta,
        imbalance: moments.imbalance(),
        var_imbalance: moments.var_imbalance(),
        cov_imbalance_theta: moments.cov_imbalance_theta(),
    })
}

/// Win proportion adjusted for a numeric covariate.
pub fn adjusted_wp<T: Outcome>(sample: &TwoSample<T>, cov: &CovariatePair, alpha: f64) -> Result<Estimate> {
    check_alpha(alpha)?;
    cov.check_matches(sample)?;
    sample.require_two_per_group()?;
    let props = individual_proportions(sample);
    let moments = covariate_moments(&props, cov)?;
    if moments.var_imbalance() == 0.0 {
        return Err(Error::ConstantCovariate);
    }
    adjustment_terms(&props, &moments)?.estimate(alpha, sample.n_placebo(), sample.n_active())
}

/// Adjustment terms for an ordinal covariate. The covariate enters through
/// its own win proportion θ̂ₓ, whose null expectation is ½; its variance and
/// covariance with θ̂ come from the two sets of placements.
pub fn ordinal_adjustment_terms(
    props: &IndividualProportions,
    cov_props: &IndividualProportions,
) -> Result<AdjustmentTerms> {
    let (n1, n2) = (props.n_placebo() as f64, props.n_active() as f64);
    let var_theta = variance_theta(props)?.sigma_sq();
    let var_x = variance_theta(cov_props)?.sigma_sq();
    let (theta, theta_x) = (props.theta_hat, cov_props.theta_hat);
    let cross = |a: &[f64], ca: f64, b: &[f64], cb: f64| -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - ca) * (v - cb)).sum::<f64>() / (a.len() as f64 - 1.0)
    };
    let cov = cross(&props.q, 1.0 - theta, &cov_props.q, 1.0 - theta_x) / n1
        + cross(&props.p, theta, &cov_props.p, theta_x) / n2;
    Ok(AdjustmentTerms {
        theta,
        var_theta,
        imbalance: theta_x - 0.5,
        var_imbalance: var_x,
        cov_imbalance_theta: cov,
    })
}

/// Win proportion adjusted for an ordinal covariate.
///
/// A covariate with no spread carries no information and the crude estimate
/// is returned; one that separates the arms completely cannot be adjusted
/// for.
pub fn adjusted_wp_ordinal_covariate<T: Outcome, U: Outcome>(
    sample: &TwoSample<T>,
    covariate: &TwoSample<U>,
    alpha: f64,
) -> Result<Estimate> {
    check_alpha(alpha)?;
    if covariate.n_placebo() != sample.n_placebo() || covariate.n_active() != sample.n_active() {
        return Err(Error::LengthMismatch {
            what: "covariate",
            expected: sample.n_total(),
            found: covariate.n_total(),
        });
    }
    sample.require_two_per_group()?;
    let props = individual_proportions(sample);
    let cov_props = individual_proportions(covariate);
    let terms = ordinal_adjustment_terms(&props, &cov_props)?;
    if terms.var_imbalance == 0.0 {
        if terms.imbalance != 0.0 {
            return Err(Error::SeparatedCovariate);
        }
        if !(terms.var_theta > 0.0) {
            return Err(Error::ZeroVariance);
        }
        return Estimate::from_normal(
            terms.theta,
            terms.var_theta.sqrt(),
            alpha,
            sample.n_placebo(),
            sample.n_active(),
        );
    }
    terms.estimate(alpha, sample.n_placebo(), sample.n_active())
}

/// How stratum weights are derived from group sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// w_h ∝ n_h1·n_h2 / n_h
    SampleSize,
    /// w_h ∝ n_h1·n_h2 / (n_h + 1)
    VanElteren,
    /// Positive weights summing to 1, one per stratum.
    Custom(Vec<f64>),
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::SampleSize
    }
}

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Normalized stratum weights for `(n_placebo, n_active)` per stratum.
pub fn strata_weights(sizes: &[(usize, usize)], scheme: &WeightScheme) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::invalid("at least one stratum is required"));
    }
    if let Some(h) = sizes.iter().position(|&(a, b)| a == 0 || b == 0) {
        return Err(Error::invalid(format!("stratum {h} has an empty group")));
    }
    let coefficients: Vec<f64> = match scheme {
        WeightScheme::SampleSize => sizes
            .iter()
            .map(|&(a, b)| (a as f64 * b as f64) / (a + b) as f64)
            .collect(),
        WeightScheme::VanElteren => sizes
            .iter()
            .map(|&(a, b)| (a as f64 * b as f64) / (a + b + 1) as f64)
            .collect(),
        WeightScheme::Custom(w) => {
            if w.len() != sizes.len() {
                return Err(Error::LengthMismatch {
                    what: "custom weights",
                    expected: sizes.len(),
                    found: w.len(),
                });
            }
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::invalid("custom weights must be positive"));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::invalid(format!("custom weights sum to {total}, not 1")));
            }
            return Ok(w.clone());
        }
    };
    let total: f64 = coefficients.iter().sum();
    Ok(coefficients.iter().map(|c| c / total).collect())
}

/// One stratum: its sample and, for adjusted analyses, covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum<T> {
    pub label: String,
    pub sample: TwoSample<T>,
    pub covariates: Option<CovariatePair>,
}

impl<T> Stratum<T> {
    pub fn new(label: impl Into<String>, sample: TwoSample<T>) -> Self {
        Stratum {
            label: label.into(),
            sample,
            covariates: None,
        }
    }

    pub fn with_covariates(mut self, cov: CovariatePair) -> Self {
        self.covariates = Some(cov);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedData<T> {
    strata: Vec<Stratum<T>>,
    scheme: WeightScheme,
}

impl<T: Outcome> StratifiedData<T> {
    pub fn new(strata: Vec<Stratum<T>>, scheme: WeightScheme) -> Result<Self> {
        if strata.is_empty() {
            return Err(Error::invalid("at least one stratum is required"));
        }
        for (i, s) in strata.iter().enumerate() {
            if strata[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::invalid(format!("duplicate stratum label {:?}", s.label)));
            }
            s.sample.require_two_per_group().map_err(|e| e.in_stratum(&s.label))?;
            if let Some(cov) = &s.covariates {
                cov.check_matches(&s.sample).map_err(|e| e.in_stratum(&s.label))?;
            }
        }
        let data = StratifiedData { strata, scheme };
        data.weights()?;
        Ok(data)
    }
}

impl<T> StratifiedData<T> {
    pub fn strata(&self) -> &[Stratum<T>] {
        &self.strata
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    pub fn sizes(&self) -> Vec<(usize, usize)> {
        self.strata
            .iter()
            .map(|s| (s.sample.n_placebo(), s.sample.n_active()))
            .collect()
    }

    pub fn weights(&self) -> Result<Vec<f64>> {
        strata_weights(&self.sizes(), &self.scheme)
    }

    pub fn n_placebo(&self) -> usize {
        self.strata.iter().map(|s| s.sample.n_placebo()).sum()
    }

    pub fn n_active(&self) -> usize {
        self.strata.iter().map(|s| s.sample.n_active()).sum()
    }

    /// Same strata under a different weight scheme.
    pub fn reweighted(&self, scheme: WeightScheme) -> Result<Self>
    where
        T: Clone,
    {
        strata_weights(&self.sizes(), &scheme)?;
        Ok(StratifiedData {
            strata: self.strata.clone(),
            scheme,
        })
    }
}

/// Per-stratum contribution to a stratified estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub label: String,
    pub n_placebo: usize,
    pub n_active: usize,
    pub weight: f64,
    pub theta: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedEstimate {
    pub estimate: Estimate,
    pub strata: Vec<StratumSummary>,
}

impl StratifiedEstimate {
    pub fn weights(&self) -> Vec<f64> {
        self.strata.iter().map(|s| s.weight).collect()
    }
}

struct StratumParts {
    props: IndividualProportions,
    var_theta: f64,
}

fn stratum_parts<T: Outcome>(s: &Stratum<T>) -> Result<StratumParts> {
    let props = individual_proportions(&s.sample);
    let var_theta = variance_theta(&props).map_err(|e| e.in_stratum(&s.label))?.sigma_sq();
    if var_theta == 0.0 {
        return Err(Error::ZeroVariance.in_stratum(&s.label));
    }
    Ok(StratumParts { props, var_theta })
}

fn summaries<T>(data: &StratifiedData<T>, parts: &[StratumParts], weights: &[f64]) -> Vec<StratumSummary> {
    data.strata
        .iter()
        .zip(parts)
        .zip(weights)
        .map(|((s, part), &weight)| StratumSummary {
            label: s.label.clone(),
            n_placebo: s.sample.n_placebo(),
            n_active: s.sample.n_active(),
            weight,
            theta: part.props.theta_hat,
            se: part.var_theta.sqrt(),
        })
        .collect()
}

/// Weighted sum of per-stratum win proportions, θ̂ˢᵗʳ = Σ w_h θ̂_h, with
/// variance Σ w_h² σ̂_h².
pub fn stratified_wp<T: Outcome>(data: &StratifiedData<T>, alpha: f64) -> Result<StratifiedEstimate> {
    check_alpha(alpha)?;
    let weights = data.weights()?;
    let parts: Vec<StratumParts> = data.strata.iter().map(stratum_parts).collect::<Result<_>>()?;
    let theta: f64 = parts.iter().zip(&weights).map(|(p, w)| w * p.props.theta_hat).sum();
    let var: f64 = parts.iter().zip(&weights).map(|(p, w)| w * w * p.var_theta).sum();
    let estimate = Estimate::from_normal(theta, var.sqrt(), alpha, data.n_placebo(), data.n_active())?;
    Ok(StratifiedEstimate {
        estimate,
        strata: summaries(data, &parts, &weights),
    })
}

/// Adjustment terms of the stratified estimator: θ̂ and the covariate
/// imbalance are each stratified with the same weights before adjusting.
pub fn stratified_adjustment_terms<T: Outcome>(
    data: &StratifiedData<T>,
) -> Result<(AdjustmentTerms, Vec<StratumSummary>)> {
    let weights = data.weights()?;
    let mut parts = Vec::with_capacity(data.strata.len());
    let mut terms = AdjustmentTerms {
        theta: 0.0,
        var_theta: 0.0,
        imbalance: 0.0,
        var_imbalance: 0.0,
        cov_imbalance_theta: 0.0,
    };
    for (s, &w) in data.strata.iter().zip(&weights) {
        let cov = s.covariates.as_ref().ok_or_else(|| {
            Error::invalid("adjusted analysis requires covariates").in_stratum(&s.label)
        })?;
        let part = stratum_parts(s)?;
        let m = covariate_moments(&part.props, cov).map_err(|e| e.in_stratum(&s.label))?;
        terms.theta += w * part.props.theta_hat;
        terms.var_theta += w * w * part.var_theta;
        terms.imbalance += w * m.imbalance();
        terms.var_imbalance += w * w * m.var_imbalance();
        terms.cov_imbalance_theta += w * w * m.cov_imbalance_theta();
        parts.push(part);
    }
    let summary = summaries(data, &parts, &weights);
    Ok((terms, summary))
}

/// Stratified win proportion adjusted for a numeric covariate.
pub fn adjusted_stratified_wp<T: Outcome>(data: &StratifiedData<T>, alpha: f64) -> Result<StratifiedEstimate> {
    check_alpha(alpha)?;
    let (terms, strata) = stratified_adjustment_terms(data)?;
    if terms.var_imbalance == 0.0 {
        return Err(Error::ConstantCovariateAcrossStrata);
    }
    let estimate = terms.estimate(alpha, data.n_placebo(), data.n_active())?;
    Ok(StratifiedEstimate { estimate, strata })
}
