//! Monte-Carlo harness: convergence paths and operating characteristics
//! (rejection rate, CI coverage, calibration of the standard error).
//!
//! Replicate `r` draws from `streams::stream(seed, r)` and results are
//! combined in replicate order, so outputs depend only on the configuration,
//! never on the number of worker threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust_stratify::{adjusted_stratified_wp, adjusted_wp, stratified_wp, strata_weights};
use crate::adjust_stratify::{CovariatePair, StratifiedData, Stratum, WeightScheme};
use crate::classical_tests::{fligner_policello, rank_ancova, regression_on_ranks, van_elteren, wilcoxon_test};
use crate::classical_tests::z0_statistic;
use crate::error::{Error, Result};
use crate::outcome::TwoSample;
use crate::parametric_oracles::{closed_form_theta, DistSpec};
use crate::streams;
use crate::wincore::{win_proportion, wp_test, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimEstimator {
    Wp,
    Wilcoxon,
    FlignerPolicello,
    Stratified,
    Adjusted,
    AdjustedStratified,
    RankRegression,
    VanElteren,
    RankAncova,
}

impl SimEstimator {
    pub fn needs_covariate(self) -> bool {
        matches!(
            self,
            SimEstimator::Adjusted | SimEstimator::AdjustedStratified | SimEstimator::RankRegression | SimEstimator::RankAncova
        )
    }

    /// Estimators that produce an estimate of θ with a confidence interval.
    pub fn estimates_theta(self) -> bool {
        matches!(
            self,
            SimEstimator::Wp | SimEstimator::Stratified | SimEstimator::Adjusted | SimEstimator::AdjustedStratified
        )
    }

    fn is_stratified(self) -> bool {
        matches!(
            self,
            SimEstimator::Stratified | SimEstimator::AdjustedStratified | SimEstimator::VanElteren | SimEstimator::RankAncova
        )
    }
}

/// Normal covariate linked to the latent response through a Gaussian copula:
/// `x = shift + ρ·z + √(1 − ρ²)·e`, where `z` is the latent standard normal
/// behind the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateModel {
    pub rho: f64,
    #[serde(default)]
    pub shift_placebo: f64,
    #[serde(default)]
    pub shift_active: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumSpec {
    pub label: String,
    pub n_placebo: usize,
    pub n_active: usize,
    /// Defaults to the top-level placebo distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placebo: Option<DistSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<DistSpec>,
}

fn default_replicates() -> u64 {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_estimators() -> Vec<SimEstimator> {
    vec![SimEstimator::Wp]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Total sizes; required unless `strata` is given, and checked against
    /// the strata otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_placebo: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_active: Option<usize>,
    /// Largest active-arm size of the convergence sweep `n₂ = 1..=n2_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2_max: Option<usize>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<SimEstimator>,
    #[serde(default)]
    pub weights: WeightScheme,
    /// Overrides the closed-form target used for coverage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_theta: Option<f64>,
    /// Size of a dedicated thread pool; results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    pub placebo: DistSpec,
    pub active: DistSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<CovariateModel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<StratumSpec>,
}

impl SimConfig {
    pub fn new(placebo: DistSpec, active: DistSpec, n_placebo: usize, n_active: usize, seed: u64) -> Self {
        SimConfig {
            seed,
            replicates: default_replicates(),
            alpha: default_alpha(),
            n_placebo: Some(n_placebo),
            n_active: Some(n_active),
            n2_max: None,
            estimators: default_estimators(),
            weights: WeightScheme::default(),
            true_theta: None,
            workers: None,
            placebo,
            active,
            covariate: None,
            strata: Vec::new(),
        }
    }

    /// Checks the configuration, reporting the offending field.
    pub fn validate(&self) -> Result<()> {
        let field = |path: &str, e: Error| Error::invalid(format!("{path}: {e}"));
        self.placebo.validate().map_err(|e| field("placebo", e))?;
        self.active.validate().map_err(|e| field("active", e))?;
        if self.replicates == 0 {
            return Err(Error::invalid("replicates: must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha: must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(c) = &self.covariate {
            if !(c.rho > -1.0 && c.rho < 1.0) {
                return Err(Error::invalid(format!("covariate.rho: must lie in (-1, 1), got {}", c.rho)));
            }
            if !c.shift_placebo.is_finite() || !c.shift_active.is_finite() {
                return Err(Error::invalid("covariate: shifts must be finite"));
            }
        }
        if let Some(t) = self.true_theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!("true_theta: must lie in [0, 1], got {t}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers: must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("estimators: at least one is required"));
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if e.needs_covariate() && self.covariate.is_none() {
                return Err(Error::invalid(format!("estimators[{i}]: {e:?} needs a [covariate] section")));
            }
            if self.estimators[..i].contains(e) {
                return Err(Error::invalid(format!("estimators[{i}]: {e:?} listed twice")));
            }
        }
        if self.strata.is_empty() {
            let n1 = self.n_placebo.ok_or_else(|| Error::invalid("n_placebo: required without strata"))?;
            let n2 = self.n_active.ok_or_else(|| Error::invalid("n_active: required without strata"))?;
            if n1 < 2 || n2 < 2 {
                return Err(Error::invalid("n_placebo, n_active: need at least 2 per group"));
            }
        } else {
            for (h, s) in self.strata.iter().enumerate() {
                if s.n_placebo < 2 || s.n_active < 2 {
                    return Err(Error::invalid(format!("strata[{h}]: need at least 2 per group")));
                }
                if self.strata[..h].iter().any(|o| o.label == s.label) {
                    return Err(Error::invalid(format!("strata[{h}].label: duplicate label {:?}", s.label)));
                }
                for (name, d) in [("placebo", &s.placebo), ("active", &s.active)] {
                    if let Some(d) = d {
                        d.validate().map_err(|e| field(&format!("strata[{h}].{name}"), e))?;
                    }
                }
            }
            let (n1, n2) = self.totals();
            if self.n_placebo.is_some_and(|n| n != n1) || self.n_active.is_some_and(|n| n != n2) {
                return Err(Error::invalid("n_placebo, n_active: disagree with the strata totals"));
            }
        }
        strata_weights(&self.stratum_sizes(), &self.weights).map_err(|e| field("weights", e))?;
        if let Some(m) = self.n2_max {
            if m == 0 {
                return Err(Error::invalid("n2_max: must be at least 1"));
            }
            if self.n_placebo.is_none() && self.strata.is_empty() {
                return Err(Error::invalid("n_placebo: required for the convergence sweep"));
            }
        }
        Ok(())
    }

    fn resolved_strata(&self) -> Vec<ResolvedStratum<'_>> {
        if self.strata.is_empty() {
            return vec![ResolvedStratum {
                label: "all".to_string(),
                n_placebo: self.n_placebo.unwrap_or(0),
                n_active: self.n_active.unwrap_or(0),
                placebo: &self.placebo,
                active: &self.active,
            }];
        }
        self.strata
            .iter()
            .map(|s| ResolvedStratum {
                label: s.label.clone(),
                n_placebo: s.n_placebo,
                n_active: s.n_active,
                placebo: s.placebo.as_ref().unwrap_or(&self.placebo),
                active: s.active.as_ref().unwrap_or(&self.active),
            })
            .collect()
    }

    fn stratum_sizes(&self) -> Vec<(usize, usize)> {
        self.resolved_strata().iter().map(|s| (s.n_placebo, s.n_active)).collect()
    }

    fn totals(&self) -> (usize, usize) {
        self.stratum_sizes()
            .iter()
            .fold((0, 0), |(a, b), &(n1, n2)| (a + n1, b + n2))
    }

    /// θ of the pooled population, mixing strata in proportion to their sizes.
    pub fn pooled_theta(&self) -> Option<f64> {
        if let Some(t) = self.true_theta {
            return Some(t);
        }
        let strata = self.resolved_strata();
        let (n1, n2) = self.totals();
        let mut theta = 0.0;
        for a in &strata {
            for b in &strata {
                let t = closed_form_theta(a.placebo, b.active).ok()??;
                theta += (a.n_placebo as f64 / n1 as f64) * (b.n_active as f64 / n2 as f64) * t;
            }
        }
        Some(theta)
    }

    /// Weighted combination of within-stratum θ values.
    pub fn stratified_theta(&self) -> Option<f64> {
        if let Some(t) = self.true_theta {
            return Some(t);
        }
        let weights = strata_weights(&self.stratum_sizes(), &self.weights).ok()?;
        let mut theta = 0.0;
        for (s, w) in self.resolved_strata().iter().zip(weights) {
            theta += w * closed_form_theta(s.placebo, s.active).ok()??;
        }
        Some(theta)
    }

    fn target(&self, estimator: SimEstimator) -> Option<f64> {
        if !estimator.estimates_theta() {
            return None;
        }
        // an arm-dependent covariate shift moves the adjusted target away from θ
        let shifted = self.covariate.is_some_and(|c| c.shift_placebo != c.shift_active);
        if estimator.needs_covariate() && shifted && self.true_theta.is_none() {
            return None;
        }
        if estimator.is_stratified() {
            self.stratified_theta()
        } else {
            self.pooled_theta()
        }
    }

    fn run_in_pool<R: Send>(&self, job: impl FnOnce() -> R + Send) -> Result<R> {
        match self.workers {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::invalid(format!("workers: {e}")))?;
                Ok(pool.install(job))
            }
            None => Ok(job()),
        }
    }
}

struct ResolvedStratum<'a> {
    label: String,
    n_placebo: usize,
    n_active: usize,
    placebo: &'a DistSpec,
    active: &'a DistSpec,
}

struct Arm {
    y: Vec<f64>,
    x: Vec<f64>,
}

fn draw_arm<R: Rng>(rng: &mut R, n: usize, dist: &DistSpec, cov: Option<(f64, f64)>) -> Arm {
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(if cov.is_some() { n } else { 0 });
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        y.push(dist.from_latent(z));
        if let Some((rho, shift)) = cov {
            let e: f64 = rng.sample(StandardNormal);
            x.push(shift + rho * z + (1.0 - rho * rho).sqrt() * e);
        }
    }
    Arm { y, x }
}

struct ReplicateData {
    strata: Vec<(String, Arm, Arm)>,
}

impl ReplicateData {
    fn generate(config: &SimConfig, replicate: u64) -> Self {
        let mut rng = streams::stream(config.seed, replicate);
        let cov = config.covariate;
        let strata = config
            .resolved_strata()
            .into_iter()
            .map(|s| {
                let placebo = draw_arm(&mut rng, s.n_placebo, s.placebo, cov.map(|c| (c.rho, c.shift_placebo)));
                let active = draw_arm(&mut rng, s.n_active, s.active, cov.map(|c| (c.rho, c.shift_active)));
                (s.label, placebo, active)
            })
            .collect();
        ReplicateData { strata }
    }

    fn pooled(&self) -> Result<(TwoSample<f64>, Option<CovariatePair>)> {
        let cat = |f: &dyn Fn(&(String, Arm, Arm)) -> &Vec<f64>| -> Vec<f64> {
            self.strata.iter().flat_map(|s| f(s).iter().copied()).collect()
        };
        let sample = TwoSample::new(cat(&|s| &s.1.y), cat(&|s| &s.2.y))?;
        let x1 = cat(&|s| &s.1.x);
        let cov = if x1.is_empty() {
            None
        } else {
            Some(CovariatePair::new(x1, cat(&|s| &s.2.x))?)
        };
        Ok((sample, cov))
    }

    fn stratified(&self, scheme: &WeightScheme) -> Result<StratifiedData<f64>> {
        let mut strata = Vec::with_capacity(self.strata.len());
        for (label, p, a) in &self.strata {
            let mut s = Stratum::new(label.clone(), TwoSample::new(p.y.clone(), a.y.clone())?);
            if !p.x.is_empty() {
                s = s.with_covariates(CovariatePair::new(p.x.clone(), a.x.clone())?);
            }
            strata.push(s);
        }
        StratifiedData::new(strata, scheme.clone())
    }
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    reject: bool,
    z: f64,
    estimate: Option<Estimate>,
}

fn from_estimate(e: Estimate) -> Trial {
    Trial {
        reject: e.rejects_null(),
        z: e.z,
        estimate: Some(e),
    }
}

fn from_test(z: f64, p: f64, alpha: f64) -> Trial {
    Trial {
        reject: p < alpha,
        z,
        estimate: None,
    }
}

fn run_estimator(
    estimator: SimEstimator,
    data: &ReplicateData,
    pooled: &(TwoSample<f64>, Option<CovariatePair>),
    config: &SimConfig,
) -> Result<Trial> {
    let alpha = config.alpha;
    let (sample, cov) = pooled;
    let need_cov = || cov.as_ref().ok_or(Error::invalid("covariate model missing"));
    let test = |r: crate::classical_tests::TestResult| from_test(r.z, r.p_value, alpha);
    Ok(match estimator {
        SimEstimator::Wp => from_estimate(wp_test(sample, alpha)?),
        SimEstimator::Adjusted => from_estimate(adjusted_wp(sample, need_cov()?, alpha)?),
        SimEstimator::Wilcoxon => test(wilcoxon_test(sample)?),
        SimEstimator::FlignerPolicello => test(fligner_policello(sample)?),
        SimEstimator::RankRegression => test(regression_on_ranks(sample, need_cov()?)?),
        SimEstimator::Stratified => from_estimate(stratified_wp(&data.stratified(&config.weights)?, alpha)?.estimate),
        SimEstimator::AdjustedStratified => {
            from_estimate(adjusted_stratified_wp(&data.stratified(&config.weights)?, alpha)?.estimate)
        }
        SimEstimator::VanElteren => test(van_elteren(&data.stratified(&config.weights)?)?),
        SimEstimator::RankAncova => test(rank_ancova(&data.stratified(&config.weights)?)?),
    })
}

/// Inline identity checks: rank sum against win count, and (Z⁰)² ≥ F².
fn identity_check(sample: &TwoSample<f64>) -> Option<bool> {
    let (n1, n2) = (sample.n_placebo() as f64, sample.n_active() as f64);
    let w = wilcoxon_test(sample).ok()?.rank_sum?;
    let u = win_proportion(sample) * n1 * n2;
    let rank_ok = (u - (w - n2 * (n2 + 1.0) / 2.0)).abs() <= 1e-9 * n1 * n2;
    let ordering_ok = match (z0_statistic(sample), fligner_policello(sample)) {
        (Ok(z0), Ok(f)) => z0.z * z0.z >= f.z * f.z * (1.0 - 1e-12) - 1e-12,
        _ => true,
    };
    Some(rank_ok && ordering_ok)
}

struct ReplicateResult {
    outcomes: Vec<Option<Trial>>,
    identity: Option<bool>,
}

fn run_replicate(config: &SimConfig, replicate: u64) -> ReplicateResult {
    let data = ReplicateData::generate(config, replicate);
    let pooled = match data.pooled() {
        Ok(p) => p,
        Err(_) => {
            return ReplicateResult {
                outcomes: vec![None; config.estimators.len()],
                identity: None,
            }
        }
    };
    let outcomes = config
        .estimators
        .iter()
        .map(|&e| run_estimator(e, &data, &pooled, config).ok())
        .collect();
    ReplicateResult {
        outcomes,
        identity: identity_check(&pooled.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: SimEstimator,
    pub successes: u64,
    /// Replicates where the statistic was undefined (e.g. zero variance).
    pub failures: u64,
    pub rejections: u64,
    pub rejection_rate: Option<f64>,
    /// √(r(1 − r)/m) for the observed rate r over m successes.
    pub rejection_mc_se: Option<f64>,
    /// 3·√(α(1 − α)/m): allowed distance of the rate from α under the null.
    pub null_rejection_tolerance: Option<f64>,
    pub mean_z: Option<f64>,
    pub target_theta: Option<f64>,
    pub coverage: Option<f64>,
    /// 3·√(α(1 − α)/m): allowed distance of coverage from 1 − α.
    pub coverage_tolerance: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub mean_se: Option<f64>,
    pub empirical_sd: Option<f64>,
    /// Empirical sd of the estimates over their mean standard error.
    pub sd_to_se: Option<f64>,
}

impl EstimatorSummary {
    pub fn rejection_within_null_tolerance(&self, alpha: f64) -> Option<bool> {
        Some((self.rejection_rate? - alpha).abs() <= self.null_rejection_tolerance?)
    }

    pub fn coverage_within_tolerance(&self, alpha: f64) -> Option<bool> {
        Some((self.coverage? - (1.0 - alpha)).abs() <= self.coverage_tolerance?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master_seed: u64,
    pub derivation: String,
    pub replicate_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub config: SimConfig,
    pub replicates: u64,
    pub tolerance_rule: String,
    pub estimators: Vec<EstimatorSummary>,
    pub identity_checks: u64,
    pub identity_violations: u64,
    pub seed_lineage: SeedLineage,
}

fn summarize(estimator: SimEstimator, outcomes: &[Option<Trial>], target: Option<f64>, alpha: f64) -> EstimatorSummary {
    let ok: Vec<&Trial> = outcomes.iter().flatten().collect();
    let m = ok.len() as u64;
    let mf = m as f64;
    let rejections = ok.iter().filter(|o| o.reject).count() as u64;
    let nonempty = |x: f64| if m > 0 { Some(x) } else { None };
    let rate = nonempty(rejections as f64 / mf);
    let tolerance = nonempty(3.0 * (alpha * (1.0 - alpha) / mf).sqrt());
    let estimates: Vec<Estimate> = ok.iter().filter_map(|o| o.estimate).collect();
    let have_estimates = !estimates.is_empty();
    let thetas: Vec<f64> = estimates.iter().map(|e| e.estimate).collect();
    let mean_estimate = have_estimates.then(|| crate::moments::mean(&thetas));
    let mean_se = have_estimates.then(|| estimates.iter().map(|e| e.se).sum::<f64>() / estimates.len() as f64);
    let empirical_sd = (estimates.len() >= 2).then(|| crate::moments::sample_var(&thetas).sqrt());
    let coverage = match (target, have_estimates) {
        (Some(t), true) => Some(estimates.iter().filter(|e| e.covers(t)).count() as f64 / estimates.len() as f64),
        _ => None,
    };
    EstimatorSummary {
        estimator,
        successes: m,
        failures: outcomes.len() as u64 - m,
        rejections,
        rejection_rate: rate,
        rejection_mc_se: rate.map(|r| (r * (1.0 - r) / mf).sqrt()),
        null_rejection_tolerance: tolerance,
        mean_z: nonempty(ok.iter().map(|o| o.z).sum::<f64>() / mf),
        target_theta: if estimator.estimates_theta() { target } else { None },
        coverage,
        coverage_tolerance: coverage.and(tolerance),
        mean_estimate,
        mean_se,
        empirical_sd,
        sd_to_se: match (empirical_sd, mean_se) {
            (Some(sd), Some(se)) if se > 0.0 => Some(sd / se),
            _ => None,
        },
    }
}

/// Runs `config.replicates` independent trials and summarizes each estimator.
pub fn operating_characteristics(config: &SimConfig) -> Result<OperatingCharacteristics> {
    config.validate()?;
    let results: Vec<ReplicateResult> = config.run_in_pool(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, r))
            .collect()
    })?;
    let estimators = config
        .estimators
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let column: Vec<Option<Trial>> = results.iter().map(|r| r.outcomes[k]).collect();
            summarize(e, &column, config.target(e), config.alpha)
        })
        .collect();
    let checked: Vec<bool> = results.iter().filter_map(|r| r.identity).collect();
    Ok(OperatingCharacteristics {
        config: config.clone(),
        replicates: config.replicates,
        tolerance_rule: "3 x binomial Monte-Carlo standard error at the nominal rate".to_string(),
        estimators,
        identity_checks: checked.len() as u64,
        identity_violations: checked.iter().filter(|&&ok| !ok).count() as u64,
        seed_lineage: SeedLineage {
            master_seed: config.seed,
            derivation: "replicate r uses ChaCha8 seeded with splitmix64(seed, r)".to_string(),
            replicate_seeds: (0..config.replicates).map(|r| streams::derive_seed(config.seed, r)).collect(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n_active: usize,
    pub theta_hat: f64,
    /// Absent below two active subjects or when the variance vanishes.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub n_placebo: usize,
    pub true_theta: Option<f64>,
    pub points: Vec<ConvergencePoint>,
}

/// One sample path of θ̂ as the active arm grows one subject at a time with
/// the placebo arm held fixed. Uses the top-level distributions only.
pub fn convergence_study(config: &SimConfig) -> Result<ConvergenceStudy> {
    config.validate()?;
    let n2_max = config
        .n2_max
        .ok_or_else(|| Error::invalid("n2_max: required for the convergence sweep"))?;
    let n1 = config.n_placebo.unwrap_or_else(|| config.totals().0);
    // stream indices past every replicate index would collide only at u64::MAX
    let mut rng = streams::stream(config.seed, u64::MAX);
    let placebo = config.placebo.sample_n(&mut rng, n1);
    let active = config.active.sample_n(&mut rng, n2_max);
    let points = config.run_in_pool(|| {
        (1..=n2_max)
            .into_par_iter()
            .map(|n2| -> Result<ConvergencePoint> {
                let sample = TwoSample::new(placebo.clone(), active[..n2].to_vec())?;
                let theta_hat = win_proportion(&sample);
                let se = wp_test(&sample, config.alpha).ok().map(|e| e.se);
                Ok(ConvergencePoint {
                    n_active: n2,
                    theta_hat,
                    se,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(ConvergenceStudy {
        n_placebo: n1,
        true_theta: config.true_theta.or_else(|| closed_form_theta(&config.placebo, &config.active).ok().flatten()),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(mean: f64, sd: f64) -> DistSpec {
        DistSpec::Normal { mean, sd }
    }

    #[test]
    fn example_four_path_ends_near_truth() {
        let mut c = SimConfig::new(normal(2.0, 4.0), normal(4.0, 2.0), 100, 100, 20240917);
        c.n2_max = Some(500);
        let s = convergence_study(&c).unwrap();
        assert_eq!(s.points.len(), 500);
        assert!(s.points[0].se.is_none());
        let last = s.points.last().unwrap();
        let truth = s.true_theta.unwrap();
        assert!((truth - 0.6726).abs() < 1e-4);
        assert!((last.theta_hat - truth).abs() < 3.0 * last.se.unwrap());
    }

    #[test]
    fn identical_arms_path_near_half() {
        let mut c = SimConfig::new(normal(0.0, 1.0), normal(0.0, 1.0), 100, 100, 3);
        c.n2_max = Some(300);
        let s = convergence_study(&c).unwrap();
        let last = s.points.last().unwrap();
        assert!((last.theta_hat - 0.5).abs() < 3.0 * last.se.unwrap());
    }

    #[test]
    fn point_masses_give_constant_path() {
        let mut c = SimConfig::new(DistSpec::Bernoulli { p: 0.0 }, DistSpec::Bernoulli { p: 1.0 }, 10, 10, 3);
        c.n2_max = Some(20);
        let s = convergence_study(&c).unwrap();
        assert!(s.points.iter().all(|p| p.theta_hat == 1.0 && p.se.is_none()));
    }

    #[test]
    fn config_validation_names_fields() {
        let mut c = SimConfig::new(normal(0.0, 1.0), normal(0.0, 1.0), 10, 10, 1);
        c.estimators = vec![SimEstimator::Adjusted];
        assert!(c.validate().unwrap_err().to_string().contains("estimators[0]"));
        c.covariate = Some(CovariateModel {
            rho: 1.0,
            shift_placebo: 0.0,
            shift_active: 0.0,
        });
        assert!(c.validate().unwrap_err().to_string().contains("covariate.rho"));
        let mut c = SimConfig::new(normal(0.0, -1.0), normal(0.0, 1.0), 10, 10, 1);
        assert!(c.validate().unwrap_err().to_string().contains("placebo"));
        c.placebo = normal(0.0, 1.0);
        c.replicates = 0;
        assert!(c.validate().is_err());
        c.replicates = 5;
        c.strata = vec![
            StratumSpec {
                label: "a".into(),
                n_placebo: 5,
                n_active: 5,
                placebo: None,
                active: None,
            },
            StratumSpec {
                label: "a".into(),
                n_placebo: 5,
                n_active: 5,
                placebo: None,
                active: None,
            },
        ];
        assert!(c.validate().unwrap_err().to_string().contains("strata[1].label"));
        c.strata[1].label = "b".into();
        assert!(c.validate().is_ok());
        c.n_placebo = Some(11);
        assert!(c.validate().is_err());
    }

    #[test]
    fn targets_mix_strata() {
        let mut c = SimConfig::new(normal(0.0, 1.0), normal(0.0, 1.0), 20, 20, 1);
        c.n_placebo = None;
        c.n_active = None;
        c.strata = vec![
            StratumSpec {
                label: "a".into(),
                n_placebo: 10,
                n_active: 10,
                placebo: None,
                active: Some(normal(1.0, 1.0)),
            },
            StratumSpec {
                label: "b".into(),
                n_placebo: 10,
                n_active: 10,
                placebo: None,
                active: None,
            },
        ];
        let within = crate::normal::cdf(1.0 / 2f64.sqrt());
        assert!((c.stratified_theta().unwrap() - (within + 0.5) / 2.0).abs() < 1e-15);
        // placebo arms are identical, so the pooled target matches here
        assert!((c.pooled_theta().unwrap() - (within + 0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let mut c = SimConfig::new(normal(0.0, 1.0), normal(0.3, 1.0), 30, 25, 77);
        c.replicates = 64;
        c.covariate = Some(CovariateModel {
            rho: 0.5,
            shift_placebo: 0.0,
            shift_active: 0.0,
        });
        c.estimators = vec![SimEstimator::Wp, SimEstimator::Adjusted, SimEstimator::Wilcoxon, SimEstimator::RankAncova];
        c.workers = Some(1);
        let a = operating_characteristics(&c).unwrap();
        c.workers = Some(4);
        let b = operating_characteristics(&c).unwrap();
        c.workers = None;
        let d = operating_characteristics(&c).unwrap();
        // `workers` is not serialized, so the reports must match byte for byte
        let json = |oc: &OperatingCharacteristics| serde_json::to_string(oc).unwrap();
        assert_eq!(json(&a), json(&b));
        assert_eq!(json(&a), json(&d));
        assert_eq!(a.estimators, b.estimators);
        assert_eq!(a.identity_violations, 0);
        assert_eq!(a.identity_checks, 64);
        assert_eq!(a.seed_lineage.replicate_seeds.len(), 64);
    }

    #[test]
    fn summaries_are_consistent() {
        let mut c = SimConfig::new(normal(0.0, 1.0), normal(0.0, 1.0), 40, 40, 5);
        c.replicates = 400;
        c.estimators = vec![SimEstimator::Wp, SimEstimator::FlignerPolicello];
        let oc = operating_characteristics(&c).unwrap();
        for s in &oc.estimators {
            assert_eq!(s.successes + s.failures, 400);
            let r = s.rejection_rate.unwrap();
            assert!((0.0..=1.0).contains(&r));
            assert_eq!(s.rejections as f64 / s.successes as f64, r);
        }
        let wp = &oc.estimators[0];
        let cov = wp.coverage.unwrap();
        assert!((0.0..=1.0).contains(&cov));
        assert_eq!(wp.target_theta, Some(0.5));
        assert!(oc.estimators[1].coverage.is_none());
        // a CI excludes ½ exactly when the test rejects, up to clamping
        assert!((cov - (1.0 - wp.rejection_rate.unwrap())).abs() < 1e-12);
    }

    #[test]
    fn strong_alternative_has_power() {
        let mut c = SimConfig::new(normal(0.0, 1.0), normal(1.0, 1.0), 100, 100, 9);
        c.replicates = 300;
        c.estimators = vec![SimEstimator::Wp, SimEstimator::Wilcoxon];
        let oc = operating_characteristics(&c).unwrap();
        for s in &oc.estimators {
            assert!(s.rejection_rate.unwrap() > 0.99);
        }
        let t = oc.estimators[0].target_theta.unwrap();
        assert!((t - crate::normal::cdf(1.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn toml_style_roundtrip_through_serde() {
        let mut c = SimConfig::new(normal(2.0, 4.0), normal(4.0, 2.0), 100, 100, 1);
        c.n2_max = Some(500);
        c.workers = Some(3);
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("workers"));
        let back: SimConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n2_max, Some(500));
        assert_eq!(back.placebo, c.placebo);
    }
}
