//! Win probability, win ratio and the rank tests they generalize.
//!
//! The crude estimator compares every active subject with every placebo
//! subject, counting wins and half-ties. Placements (each subject's share of
//! wins against the other arm) give its variance and drive the stratified
//! and covariate-adjusted variants. Classical rank procedures are provided
//! alongside for comparison, together with closed-form win probabilities for
//! common parametric families and a Monte-Carlo harness.

pub mod adjust_stratify;
pub mod composite_endpoint;
pub mod error;
mod moments;
pub mod normal;
pub mod outcome;
pub mod parametric_oracles;
pub mod ranks;
pub mod simulator;
pub mod streams;
pub mod wincore;

pub use adjust_stratify::{
    adjusted_stratified_wp, adjusted_wp, adjusted_wp_ordinal_covariate, strata_weights, stratified_wp,
    CovariatePair, StratifiedData, StratifiedEstimate, Stratum, WeightScheme,
};
pub use classical_tests::{
    fligner_policello, hodges_lehmann, rank_ancova, regression_on_ranks, van_elteren, wilcoxon_test, z0_statistic,
    TestMethod, TestResult,
};
pub use composite_endpoint::{
    build_composite, CompositeStrategy, CompositeValue, DeathStrategy, MissingPolicy, SubjectRecord, Tier,
};
pub use error::{Error, Result};
pub use outcome::{Outcome, TwoSample};
pub use parametric_oracles::{closed_form_theta, variance_components_mc, DistSpec, VarianceComponents};
pub use ranks::{group_ranks, midranks, RankVectors};
pub use simulator::{
    convergence_study, operating_characteristics, ConvergenceStudy, CovariateModel, OperatingCharacteristics, SimConfig,
    SimEstimator, StratumSpec,
};
pub use wincore::{
    individual_proportions, nnt, nnt_from_kappa, variance_theta, win_proportion, win_proportion_pairwise,
    win_proportion_ranks, win_ratio, wp_test, Estimate, IndividualProportions, WinRatioResult,
};
