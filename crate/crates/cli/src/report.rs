//! JSON report schema and its plain-text rendering.

use std::fmt::{self, Write as _};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use winratio_core::classical_tests::RatioCheck;

/// A real number that may be infinite; ±∞ are written as "inf" / "-inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            f64::INFINITY => s.serialize_str("inf"),
            f64::NEG_INFINITY => s.serialize_str("-inf"),
            v => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RealVisitor;
        impl Visitor<'_> for RealVisitor {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                match v {
                    "inf" => Ok(Real(f64::INFINITY)),
                    "-inf" => Ok(Real(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(RealVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Default for Tool {
    fn default() -> Self {
        Tool {
            name: "winratio".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSize {
    pub label: String,
    pub placebo: usize,
    pub active: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizes {
    pub placebo: usize,
    pub active: usize,
    pub per_stratum: Vec<StratumSize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimates {
    /// Win probability; the crude value for context when the method is a test.
    pub theta: Option<f64>,
    pub kappa: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nnt: Option<u64>,
    /// Hodges-Lehmann location shift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub kappa_lower: Real,
    pub kappa_upper: Real,
    /// An endpoint was pulled back into [0, 1].
    pub clamped: bool,
}

/// Squared-statistic ratios relating each rank test to its win-probability
/// counterpart.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wilcoxon_to_wp_ratio: Option<RatioCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_to_fligner_policello_ratio: Option<RatioCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub van_elteren_to_stratified_ratio: Option<RatioCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub input: String,
    pub alpha: f64,
    pub weights: String,
    pub death_strategy: String,
    pub missing: String,
    pub composite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: String,
    pub n: SampleSizes,
    pub estimate: Estimates,
    pub se: Option<f64>,
    pub ci: Option<Interval>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub diagnostics: Diagnostics,
    pub settings: Settings,
    pub tool: Tool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.4}")
}

fn p_value(p: f64) -> String {
    if p < 1e-4 {
        "<0.0001".to_string()
    } else {
        format!("{p:.4}")
    }
}

fn method_title(method: &str) -> &'static str {
    match method {
        "wp" => "Win probability",
        "wr" => "Win ratio",
        "adjusted" => "Adjusted win probability",
        "stratified" => "Stratified win probability",
        "adjusted-stratified" => "Adjusted stratified win probability",
        "wilcoxon" => "Wilcoxon rank-sum test",
        "fligner-policello" => "Fligner-Policello test",
        "hodges-lehmann" => "Hodges-Lehmann shift",
        "rank-regression" => "Regression on ranks",
        "van-elteren" => "van Elteren test",
        "rank-ancova" => "Rank ANCOVA",
        _ => "Analysis",
    }
}

/// Estimate, confidence interval and p-value in one row per measure.
pub fn render_table(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({})", method_title(&r.method), r.settings.input);
    let _ = writeln!(out, "n placebo = {}, n active = {}", r.n.placebo, r.n.active);
    if r.n.per_stratum.len() > 1 || r.n.per_stratum.iter().any(|s| s.weight.is_some()) {
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}", "Stratum", "Placebo", "Active", "Weight", "Theta", "SE");
        for s in &r.n.per_stratum {
            let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}",
                s.label,
                s.placebo,
                s.active,
                opt(s.weight),
                opt(s.theta),
                opt(s.se)
            );
        }
    }
    let _ = writeln!(out);
    let level = r.ci.as_ref().map_or(95.0, |c| 100.0 * (1.0 - c.alpha));
    let ci_head = format!("{level}% CI");
    let _ = writeln!(out, "{:<20} {:>10}   {:<24} {:>8}", "", "Estimate", ci_head, "p-value");
    let p = r.p_value.map(p_value).unwrap_or_default();
    if let Some(ci) = &r.ci {
        let theta = r.estimate.theta.unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{:<20} {:>10}   {:<24} {:>8}",
            "Win probability",
            num(theta),
            format!("({}, {})", num(ci.lower), num(ci.upper)),
            p
        );
        if let Some(k) = r.estimate.kappa {
            let _ = writeln!(
                out,
                "{:<20} {:>10}   {:<24}",
                "Win ratio",
                num(k.0),
                format!("({}, {})", num(ci.kappa_lower.0), num(ci.kappa_upper.0))
            );
        }
    } else {
        if let Some(shift) = r.estimate.shift {
            let _ = writeln!(out, "{:<20} {:>10}", "Shift", num(shift));
        }
        if let Some(z) = r.z {
            let _ = writeln!(out, "{:<20} {:>10}   {:<24} {:>8}", "Z statistic", num(z), "", p);
        }
        if let Some(theta) = r.estimate.theta {
            let _ = writeln!(out, "{:<20} {:>10}", "Win probability", num(theta));
        }
        if let Some(k) = r.estimate.kappa {
            let _ = writeln!(out, "{:<20} {:>10}", "Win ratio", num(k.0));
        }
    }
    if let Some(nnt) = r.estimate.nnt {
        let _ = writeln!(out, "{:<20} {:>10}", "NNT", nnt);
    }
    if let Some(z) = r.z.filter(|_| r.ci.is_some()) {
        let _ = writeln!(out, "{:<20} {:>10}", "Z statistic", num(z));
    }
    out
}
