//! `analyze`: dispatch a CSV dataset to one of the estimators or tests.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use winratio_core::classical_tests::{van_elteren_stratified_ratio, wilcoxon_wp_ratio, z0_fligner_policello_ratio, NumericOutcome};
use winratio_core::wincore::odds;
use winratio_core::{
    adjusted_stratified_wp, adjusted_wp, fligner_policello, hodges_lehmann, nnt, rank_ancova, regression_on_ranks,
    stratified_wp, van_elteren, wilcoxon_test, win_proportion, win_ratio, wp_test, CompositeStrategy, CovariatePair,
    DeathStrategy, Estimate, MissingPolicy, Outcome, StratifiedData, StratifiedEstimate, Stratum, TestResult,
    TwoSample, WeightScheme,
};

use crate::error::{CliError, CliResult};
use crate::input::{Dataset, Group, Responses};
use crate::report::{Diagnostics, Estimates, Interval, Real, Report, SampleSizes, Settings, StratumSize, Tool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Wp,
    Wr,
    Adjusted,
    Stratified,
    AdjustedStratified,
    Wilcoxon,
    FlignerPolicello,
    HodgesLehmann,
    RankRegression,
    VanElteren,
    RankAncova,
}

impl Method {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    fn required_columns(self) -> &'static [&'static str] {
        match self {
            Method::Adjusted | Method::RankRegression => &["covariate"],
            Method::Stratified | Method::VanElteren => &["stratum"],
            Method::AdjustedStratified | Method::RankAncova => &["stratum", "covariate"],
            _ => &[],
        }
    }

    /// Methods that rank the pooled sample, which universal ties rule out.
    fn ranks_data(self) -> bool {
        matches!(
            self,
            Method::Wilcoxon | Method::RankRegression | Method::VanElteren | Method::RankAncova
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum WeightsFlag {
    #[default]
    SampleSize,
    VanElteren,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum DeathFlag {
    #[default]
    Equal,
    LastValue,
    SurvivalTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum MissingFlag {
    #[default]
    Error,
    Ties,
}

fn flag_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub method: Method,
    pub alpha: f64,
    pub weights: WeightsFlag,
    pub death_strategy: DeathFlag,
    pub missing: MissingFlag,
    /// Shown in the report; usually the input path.
    pub input: String,
}

impl AnalyzeOptions {
    pub fn new(method: Method, input: impl Into<String>) -> Self {
        AnalyzeOptions {
            method,
            alpha: 0.05,
            weights: WeightsFlag::default(),
            death_strategy: DeathFlag::default(),
            missing: MissingFlag::default(),
            input: input.into(),
        }
    }

    fn strategy(&self) -> CompositeStrategy {
        let deaths = match self.death_strategy {
            DeathFlag::Equal => DeathStrategy::AllDeathsEqual,
            DeathFlag::LastValue => DeathStrategy::DeathsByLastValue,
            DeathFlag::SurvivalTime => DeathStrategy::DeathsBySurvivalTime,
        };
        let missing = match self.missing {
            MissingFlag::Error => MissingPolicy::Error,
            MissingFlag::Ties => MissingPolicy::Ties,
        };
        CompositeStrategy::new(deaths, missing)
    }

    fn scheme(&self) -> WeightScheme {
        match self.weights {
            WeightsFlag::SampleSize => WeightScheme::SampleSize,
            WeightsFlag::VanElteren => WeightScheme::VanElteren,
        }
    }
}

pub fn analyze(data: &Dataset, opts: &AnalyzeOptions) -> CliResult<Report> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    let method = opts.method;
    data.require(method.required_columns(), &method.name())?;
    let settings = Settings {
        input: opts.input.clone(),
        alpha: opts.alpha,
        weights: flag_name(opts.weights),
        death_strategy: flag_name(opts.death_strategy),
        missing: flag_name(opts.missing),
        composite: data.is_composite(),
    };
    match data.responses(opts.strategy())? {
        Responses::Numeric(v) => Analysis { data, values: v, opts }.run(settings),
        Responses::Composite(v) => {
            if method.ranks_data() && v.iter().any(|c| c.tie_with_all) {
                return Err(CliError::Usage(format!(
                    "method {} ranks the data, which --missing ties rules out; use wp, wr, adjusted, stratified or fligner-policello",
                    method.name()
                )));
            }
            Analysis { data, values: v, opts }.run(settings)
        }
    }
}

struct Analysis<'a, T> {
    data: &'a Dataset,
    values: Vec<T>,
    opts: &'a AnalyzeOptions,
}

struct Split<T> {
    y1: Vec<T>,
    y2: Vec<T>,
    x1: Vec<f64>,
    x2: Vec<f64>,
}

impl<T: NumericOutcome + Clone> Analysis<'_, T> {
    fn split(&self, rows: &[usize]) -> Split<T> {
        let mut s = Split {
            y1: Vec::new(),
            y2: Vec::new(),
            x1: Vec::new(),
            x2: Vec::new(),
        };
        for &i in rows {
            let row = &self.data.rows[i];
            let (y, x) = match row.group {
                Group::Placebo => (&mut s.y1, &mut s.x1),
                Group::Active => (&mut s.y2, &mut s.x2),
            };
            y.push(self.values[i].clone());
            if let Some(c) = row.covariate {
                x.push(c);
            }
        }
        s
    }

    fn pooled(&self) -> CliResult<(TwoSample<T>, Option<CovariatePair>)> {
        let all: Vec<usize> = (0..self.values.len()).collect();
        let s = self.split(&all);
        let cov = if self.data.has("covariate") {
            Some(CovariatePair::new(s.x1, s.x2)?)
        } else {
            None
        };
        Ok((TwoSample::new(s.y1, s.y2)?, cov))
    }

    fn stratified(&self, scheme: WeightScheme) -> CliResult<StratifiedData<T>> {
        let mut strata = Vec::new();
        for (label, rows) in self.data.strata() {
            let s = self.split(&rows);
            let sample = TwoSample::new(s.y1, s.y2).map_err(|e| e.in_stratum(&label))?;
            let mut stratum = Stratum::new(label.clone(), sample);
            if self.data.has("covariate") {
                stratum = stratum.with_covariates(CovariatePair::new(s.x1, s.x2).map_err(|e| e.in_stratum(&label))?);
            }
            strata.push(stratum);
        }
        Ok(StratifiedData::new(strata, scheme)?)
    }

    fn run(self, settings: Settings) -> CliResult<Report> {
        let (sample, cov) = self.pooled()?;
        let alpha = self.opts.alpha;
        let mut report = Report {
            method: self.opts.method.name(),
            n: SampleSizes {
                placebo: sample.n_placebo(),
                active: sample.n_active(),
                per_stratum: Vec::new(),
            },
            estimate: Estimates::default(),
            se: None,
            ci: None,
            z: None,
            p_value: None,
            diagnostics: Diagnostics::default(),
            settings,
            tool: Tool::default(),
        };
        let need_cov = || cov.as_ref().ok_or_else(|| CliError::data("covariate column required"));
        match self.opts.method {
            Method::Wp | Method::Wr => {
                fill_estimate(&mut report, &wp_test(&sample, alpha)?);
                report.diagnostics = crude_diagnostics(&sample);
            }
            Method::Adjusted => fill_estimate(&mut report, &adjusted_wp(&sample, need_cov()?, alpha)?),
            Method::Stratified => {
                let data = self.stratified(self.opts.scheme())?;
                fill_stratified(&mut report, &stratified_wp(&data, alpha)?);
                report.diagnostics.van_elteren_to_stratified_ratio = van_elteren_stratified_ratio(&data).ok();
            }
            Method::AdjustedStratified => {
                let data = self.stratified(self.opts.scheme())?;
                fill_stratified(&mut report, &adjusted_stratified_wp(&data, alpha)?);
            }
            Method::Wilcoxon => {
                fill_test(&mut report, &wilcoxon_test(&sample)?, &sample);
                report.diagnostics = crude_diagnostics(&sample);
            }
            Method::FlignerPolicello => {
                fill_test(&mut report, &fligner_policello(&sample)?, &sample);
                report.diagnostics = crude_diagnostics(&sample);
            }
            Method::HodgesLehmann => {
                report.estimate.shift = Some(hodges_lehmann(&sample)?);
                fill_context(&mut report, &sample);
            }
            Method::RankRegression => fill_test(&mut report, &regression_on_ranks(&sample, need_cov()?)?, &sample),
            Method::VanElteren => {
                let data = self.stratified(WeightScheme::VanElteren)?;
                let test = van_elteren(&data)?;
                fill_test(&mut report, &test, &sample);
                fill_strata_sizes(&mut report, &data);
                report.diagnostics.van_elteren_to_stratified_ratio = van_elteren_stratified_ratio(&data).ok();
            }
            Method::RankAncova => {
                let data = self.stratified(WeightScheme::VanElteren)?;
                fill_test(&mut report, &rank_ancova(&data)?, &sample);
                fill_strata_sizes(&mut report, &data);
            }
        }
        if report.n.per_stratum.is_empty() {
            report.n.per_stratum.push(StratumSize {
                label: "all".to_string(),
                placebo: sample.n_placebo(),
                active: sample.n_active(),
                weight: None,
                theta: None,
                se: None,
            });
        }
        Ok(report)
    }
}

fn crude_diagnostics<T: Outcome>(sample: &TwoSample<T>) -> Diagnostics {
    Diagnostics {
        wilcoxon_to_wp_ratio: wilcoxon_wp_ratio(sample).ok(),
        z0_to_fligner_policello_ratio: z0_fligner_policello_ratio(sample).ok(),
        van_elteren_to_stratified_ratio: None,
    }
}

fn fill_estimate(report: &mut Report, est: &Estimate) {
    let wr = win_ratio(est);
    report.estimate.theta = Some(est.estimate);
    report.estimate.kappa = Some(Real(wr.kappa));
    report.estimate.nnt = nnt(est.estimate).ok();
    report.se = Some(est.se);
    report.ci = Some(Interval {
        lower: est.ci_lower,
        upper: est.ci_upper,
        alpha: est.alpha,
        kappa_lower: Real(wr.ci_lower),
        kappa_upper: Real(wr.ci_upper),
        clamped: est.ci_clamped,
    });
    report.z = Some(est.z);
    report.p_value = Some(est.p_value);
}

fn fill_stratified(report: &mut Report, est: &StratifiedEstimate) {
    fill_estimate(report, &est.estimate);
    report.n.per_stratum = est
        .strata
        .iter()
        .map(|s| StratumSize {
            label: s.label.clone(),
            placebo: s.n_placebo,
            active: s.n_active,
            weight: Some(s.weight),
            theta: Some(s.theta),
            se: Some(s.se),
        })
        .collect();
}

fn fill_strata_sizes<T>(report: &mut Report, data: &StratifiedData<T>) {
    let weights = data.weights().ok();
    report.n.per_stratum = data
        .strata()
        .iter()
        .enumerate()
        .map(|(h, s)| StratumSize {
            label: s.label.clone(),
            placebo: s.sample.n_placebo(),
            active: s.sample.n_active(),
            weight: weights.as_ref().map(|w| w[h]),
            theta: None,
            se: None,
        })
        .collect();
}

/// Crude θ̂ and κ̂ alongside a test, for interpretation.
fn fill_context<T: Outcome>(report: &mut Report, sample: &TwoSample<T>) {
    let theta = win_proportion(sample);
    report.estimate.theta = Some(theta);
    report.estimate.kappa = Some(Real(odds(theta)));
    report.estimate.nnt = nnt(theta).ok();
}

fn fill_test<T: Outcome>(report: &mut Report, test: &TestResult, sample: &TwoSample<T>) {
    fill_context(report, sample);
    report.z = Some(test.z);
    report.p_value = Some(test.p_value);
}
