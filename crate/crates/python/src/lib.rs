//! Python bindings: `import winratio`.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use winratio_core as core;
use winratio_core::classical_tests::{self, TestResult};
use winratio_core::{
    CompositeStrategy, CovariatePair, DistSpec, SimConfig, StratifiedData, Stratum, SubjectRecord, TwoSample,
    WeightScheme,
};

create_exception!(winratio, WinRatioError, PyValueError, "Invalid input to a win-ratio computation.");
create_exception!(winratio, DegenerateSampleError, WinRatioError, "The data carry no information for the requested statistic.");

fn err(e: core::Error) -> PyErr {
    if e.is_degenerate() {
        DegenerateSampleError::new_err(e.to_string())
    } else {
        WinRatioError::new_err(e.to_string())
    }
}

fn sample(placebo: Vec<f64>, active: Vec<f64>) -> PyResult<TwoSample<f64>> {
    TwoSample::new(placebo, active).map_err(err)
}

/// Converts a JSON-compatible Python object through its JSON text.
fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| WinRatioError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| WinRatioError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn weight_scheme(py: Python<'_>, weights: Option<&Bound<'_, PyAny>>) -> PyResult<WeightScheme> {
    match weights {
        None => Ok(WeightScheme::SampleSize),
        Some(w) => match w.extract::<Vec<f64>>() {
            Ok(v) => Ok(WeightScheme::Custom(v)),
            Err(_) => from_py(py, w),
        },
    }
}

type StratumInput = (String, Vec<f64>, Vec<f64>);
type CovariateInput = (Vec<f64>, Vec<f64>);

fn stratified_data(
    py: Python<'_>,
    strata: Vec<StratumInput>,
    covariates: Option<Vec<CovariateInput>>,
    weights: Option<&Bound<'_, PyAny>>,
) -> PyResult<StratifiedData<f64>> {
    if let Some(c) = &covariates {
        if c.len() != strata.len() {
            return Err(WinRatioError::new_err(format!(
                "covariates has {} entries, expected {}",
                c.len(),
                strata.len()
            )));
        }
    }
    let mut covs = covariates.map(|c| c.into_iter());
    let mut out = Vec::with_capacity(strata.len());
    for (label, placebo, active) in strata {
        let mut s = Stratum::new(label, sample(placebo, active)?);
        if let Some((xp, xa)) = covs.as_mut().and_then(Iterator::next) {
            s = s.with_covariates(CovariatePair::new(xp, xa).map_err(err)?);
        }
        out.push(s);
    }
    StratifiedData::new(out, weight_scheme(py, weights)?).map_err(err)
}

/// Point estimate, standard error, Wald interval and test of θ = ½.
#[pyclass(get_all, frozen, module = "winratio")]
#[derive(Clone)]
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
    pub ci_clamped: bool,
}

impl From<core::Estimate> for Estimate {
    fn from(e: core::Estimate) -> Self {
        Estimate {
            estimate: e.estimate,
            se: e.se,
            ci_lower: e.ci_lower,
            ci_upper: e.ci_upper,
            z: e.z,
            p_value: e.p_value,
            alpha: e.alpha,
            n_placebo: e.n_placebo,
            n_active: e.n_active,
            ci_clamped: e.ci_clamped,
        }
    }
}

#[pymethods]
impl Estimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(estimate={}, se={}, ci=({}, {}), p_value={})",
            self.estimate, self.se, self.ci_lower, self.ci_upper, self.p_value
        )
    }
}

#[pyclass(get_all, frozen, module = "winratio")]
pub struct WinRatio {
    pub kappa: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub theta: Estimate,
    pub unbounded: bool,
}

#[pymethods]
impl WinRatio {
    fn __repr__(&self) -> String {
        format!("WinRatio(kappa={}, ci=({}, {}))", self.kappa, self.ci_lower, self.ci_upper)
    }
}

#[pyclass(get_all, frozen, module = "winratio")]
pub struct Test {
    pub method: String,
    pub z: f64,
    pub p_value: f64,
    pub rank_sum: Option<f64>,
    pub residual_rank_sum: Option<f64>,
}

impl From<TestResult> for Test {
    fn from(t: TestResult) -> Self {
        Test {
            method: format!("{:?}", t.method),
            z: t.z,
            p_value: t.p_value,
            rank_sum: t.rank_sum,
            residual_rank_sum: t.residual_rank_sum,
        }
    }
}

#[pymethods]
impl Test {
    fn __repr__(&self) -> String {
        format!("Test(method={}, z={}, p_value={})", self.method, self.z, self.p_value)
    }
}

#[pyclass(get_all, frozen, module = "winratio")]
pub struct Stratified {
    pub estimate: Estimate,
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    pub thetas: Vec<f64>,
    pub ses: Vec<f64>,
}

impl From<core::StratifiedEstimate> for Stratified {
    fn from(s: core::StratifiedEstimate) -> Self {
        Stratified {
            estimate: s.estimate.into(),
            labels: s.strata.iter().map(|h| h.label.clone()).collect(),
            weights: s.strata.iter().map(|h| h.weight).collect(),
            thetas: s.strata.iter().map(|h| h.theta).collect(),
            ses: s.strata.iter().map(|h| h.se).collect(),
        }
    }
}

/// Win probability θ̂ of active over placebo (ties count ½).
#[pyfunction]
fn win_proportion(placebo: Vec<f64>, active: Vec<f64>) -> PyResult<f64> {
    Ok(core::win_proportion(&sample(placebo, active)?))
}

#[pyfunction]
#[pyo3(signature = (placebo, active, alpha = 0.05))]
fn wp_test(placebo: Vec<f64>, active: Vec<f64>, alpha: f64) -> PyResult<Estimate> {
    core::wp_test(&sample(placebo, active)?, alpha).map(Into::into).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (placebo, active, alpha = 0.05))]
fn win_ratio(placebo: Vec<f64>, active: Vec<f64>, alpha: f64) -> PyResult<WinRatio> {
    let est = core::wp_test(&sample(placebo, active)?, alpha).map_err(err)?;
    let r = core::win_ratio(&est);
    Ok(WinRatio {
        kappa: r.kappa,
        ci_lower: r.ci_lower,
        ci_upper: r.ci_upper,
        theta: r.theta.into(),
        unbounded: r.unbounded,
    })
}

/// Number needed to treat for a win probability above ½.
#[pyfunction]
fn nnt(theta: f64) -> PyResult<u64> {
    core::nnt(theta).map_err(err)
}

/// `(theta, nnt)` for a win ratio above 1.
#[pyfunction]
fn nnt_from_kappa(kappa: f64) -> PyResult<(f64, u64)> {
    core::nnt_from_kappa(kappa).map_err(err)
}

#[pyfunction]
fn midranks(values: Vec<f64>) -> PyResult<Vec<f64>> {
    core::midranks(&values).map_err(err)
}

#[pyfunction]
fn wilcoxon(placebo: Vec<f64>, active: Vec<f64>) -> PyResult<Test> {
    core::wilcoxon_test(&sample(placebo, active)?).map(Into::into).map_err(err)
}

#[pyfunction]
fn fligner_policello(placebo: Vec<f64>, active: Vec<f64>) -> PyResult<Test> {
    core::fligner_policello(&sample(placebo, active)?).map(Into::into).map_err(err)
}

#[pyfunction]
fn hodges_lehmann(placebo: Vec<f64>, active: Vec<f64>) -> PyResult<f64> {
    core::hodges_lehmann(&sample(placebo, active)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (placebo, active, x_placebo, x_active, alpha = 0.05))]
fn adjusted_wp(
    placebo: Vec<f64>,
    active: Vec<f64>,
    x_placebo: Vec<f64>,
    x_active: Vec<f64>,
    alpha: f64,
) -> PyResult<Estimate> {
    let cov = CovariatePair::new(x_placebo, x_active).map_err(err)?;
    core::adjusted_wp(&sample(placebo, active)?, &cov, alpha).map(Into::into).map_err(err)
}

#[pyfunction]
fn regression_on_ranks(placebo: Vec<f64>, active: Vec<f64>, x_placebo: Vec<f64>, x_active: Vec<f64>) -> PyResult<Test> {
    let cov = CovariatePair::new(x_placebo, x_active).map_err(err)?;
    core::regression_on_ranks(&sample(placebo, active)?, &cov).map(Into::into).map_err(err)
}

/// `strata` is a list of `(label, placebo, active)`; `weights` is
/// "sample-size", "van-elteren" or a list of weights summing to 1.
#[pyfunction]
#[pyo3(signature = (strata, weights = None, alpha = 0.05))]
fn stratified_wp(
    py: Python<'_>,
    strata: Vec<StratumInput>,
    weights: Option<&Bound<'_, PyAny>>,
    alpha: f64,
) -> PyResult<Stratified> {
    let data = stratified_data(py, strata, None, weights)?;
    core::stratified_wp(&data, alpha).map(Into::into).map_err(err)
}

/// As `stratified_wp`, with one `(x_placebo, x_active)` pair per stratum.
#[pyfunction]
#[pyo3(signature = (strata, covariates, weights = None, alpha = 0.05))]
fn adjusted_stratified_wp(
    py: Python<'_>,
    strata: Vec<StratumInput>,
    covariates: Vec<CovariateInput>,
    weights: Option<&Bound<'_, PyAny>>,
    alpha: f64,
) -> PyResult<Stratified> {
    let data = stratified_data(py, strata, Some(covariates), weights)?;
    core::adjusted_stratified_wp(&data, alpha).map(Into::into).map_err(err)
}

#[pyfunction]
fn van_elteren(py: Python<'_>, strata: Vec<StratumInput>) -> PyResult<Test> {
    let data = stratified_data(py, strata, None, None)?;
    core::van_elteren(&data).map(Into::into).map_err(err)
}

#[pyfunction]
fn rank_ancova(py: Python<'_>, strata: Vec<StratumInput>, covariates: Vec<CovariateInput>) -> PyResult<Test> {
    let data = stratified_data(py, strata, Some(covariates), None)?;
    classical_tests::rank_ancova(&data).map(Into::into).map_err(err)
}

/// Win probability of a composite endpoint. Records are dicts with keys
/// `change`, `died`, `death_time`, `last_change_alive` and `missing`.
#[pyfunction]
#[pyo3(signature = (placebo, active, deaths = "all-deaths-equal", missing = "error", alpha = 0.05))]
fn composite_wp(
    py: Python<'_>,
    placebo: &Bound<'_, PyAny>,
    active: &Bound<'_, PyAny>,
    deaths: &str,
    missing: &str,
    alpha: f64,
) -> PyResult<Estimate> {
    let strategy = CompositeStrategy::new(
        from_py(py, &deaths.into_pyobject(py)?.into_any())?,
        from_py(py, &missing.into_pyobject(py)?.into_any())?,
    );
    let build = |obj: &Bound<'_, PyAny>| -> PyResult<Vec<core::CompositeValue>> {
        let records: Vec<SubjectRecord> = from_py(py, obj)?;
        core::build_composite(&records, strategy).map_err(err)
    };
    let s = TwoSample::new(build(placebo)?, build(active)?).map_err(err)?;
    core::wp_test(&s, alpha).map(Into::into).map_err(err)
}

/// Closed-form θ for two distributions given as dicts, e.g.
/// `{"family": "normal", "mean": 0, "sd": 1}`; None if no closed form exists.
#[pyfunction]
fn closed_form_theta(py: Python<'_>, placebo: &Bound<'_, PyAny>, active: &Bound<'_, PyAny>) -> PyResult<Option<f64>> {
    let placebo: DistSpec = from_py(py, placebo)?;
    let active: DistSpec = from_py(py, active)?;
    core::closed_form_theta(&placebo, &active).map_err(err)
}

/// Runs a Monte-Carlo study; `config` has the same keys as the TOML file.
/// Returns the operating-characteristics report as a dict.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let config: SimConfig = from_py(py, config)?;
    config.validate().map_err(err)?;
    let report = py.detach(|| core::operating_characteristics(&config)).map_err(err)?;
    to_py(py, &report)
}

/// θ̂ for growing active-arm size; needs `n2_max` in the config.
#[pyfunction]
fn convergence<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let config: SimConfig = from_py(py, config)?;
    config.validate().map_err(err)?;
    let study = py.detach(|| core::convergence_study(&config)).map_err(err)?;
    to_py(py, &study)
}

#[pymodule]
fn winratio(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("WinRatioError", py.get_type::<WinRatioError>())?;
    m.add("DegenerateSampleError", py.get_type::<DegenerateSampleError>())?;
    m.add_class::<Estimate>()?;
    m.add_class::<WinRatio>()?;
    m.add_class::<Test>()?;
    m.add_class::<Stratified>()?;
    m.add_function(wrap_pyfunction!(win_proportion, m)?)?;
    m.add_function(wrap_pyfunction!(wp_test, m)?)?;
    m.add_function(wrap_pyfunction!(win_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(nnt, m)?)?;
    m.add_function(wrap_pyfunction!(nnt_from_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(midranks, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(fligner_policello, m)?)?;
    m.add_function(wrap_pyfunction!(hodges_lehmann, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_wp, m)?)?;
    m.add_function(wrap_pyfunction!(regression_on_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_wp, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_stratified_wp, m)?)?;
    m.add_function(wrap_pyfunction!(van_elteren, m)?)?;
    m.add_function(wrap_pyfunction!(rank_ancova, m)?)?;
    m.add_function(wrap_pyfunction!(composite_wp, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_theta, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    Ok(())
}
