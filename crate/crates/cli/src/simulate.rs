//! `simulate`: read a TOML configuration, run the simulator, write reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use winratio_core::simulator::{ConvergenceStudy, OperatingCharacteristics};
use winratio_core::{convergence_study, operating_characteristics, SimConfig};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "WINRATIO_SEED";
pub const REPORT_FILE: &str = "operating_characteristics.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

/// Parses a configuration. A missing `seed` falls back to `$WINRATIO_SEED`.
pub fn parse_config(text: &str, env_seed: Option<&str>) -> CliResult<SimConfig> {
    let mut table: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config: {e}")))?;
    if !table.contains_key("seed") {
        let seed = env_seed
            .ok_or_else(|| CliError::Usage(format!("config: seed: required (or set {SEED_ENV})")))?
            .trim()
            .parse::<i64>()
            .map_err(|e| CliError::Usage(format!("{SEED_ENV}: {e}")))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    let config: SimConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.to_string().trim_end())))?;
    config.validate().map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok(config)
}

pub fn load_config(path: &Path) -> CliResult<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let env = std::env::var(SEED_ENV).ok();
    parse_config(&text, env.as_deref())
}

pub fn convergence_csv(study: &ConvergenceStudy) -> String {
    let mut out = String::from("n_placebo,n_active,theta_hat,se\n");
    for p in &study.points {
        let se = p.se.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", study.n_placebo, p.n_active, p.theta_hat, se);
    }
    out
}

pub fn report_json(oc: &OperatingCharacteristics) -> String {
    serde_json::to_string_pretty(oc).expect("report serializes") + "\n"
}

pub struct SimulationOutput {
    pub report: OperatingCharacteristics,
    pub convergence: Option<ConvergenceStudy>,
    pub files: Vec<PathBuf>,
}

pub fn run(config: &SimConfig, out_dir: &Path) -> CliResult<SimulationOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Usage(format!("{}: {e}", out_dir.display())))?;
    let report = operating_characteristics(config)?;
    let mut files = Vec::new();
    let path = out_dir.join(REPORT_FILE);
    std::fs::write(&path, report_json(&report))?;
    files.push(path);
    let convergence = match config.n2_max {
        Some(_) => {
            let study = convergence_study(config)?;
            let path = out_dir.join(CONVERGENCE_FILE);
            std::fs::write(&path, convergence_csv(&study))?;
            files.push(path);
            Some(study)
        }
        None => None,
    };
    Ok(SimulationOutput {
        report,
        convergence,
        files,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

pub fn render_summary(out: &SimulationOutput) -> String {
    let r = &out.report;
    let alpha = r.config.alpha;
    let mut s = String::new();
    let _ = writeln!(s, "{} replicates, seed {}, alpha {}", r.replicates, r.config.seed, alpha);
    let _ = writeln!(
        s,
        "{:<20} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}",
        "Estimator", "Reject", "+/-", "Coverage", "Mean", "SD/SE", "Failed"
    );
    for e in &r.estimators {
        let name = serde_json::to_value(e.estimator).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let _ = writeln!(
            s,
            "{:<20} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}",
            name,
            opt(e.rejection_rate),
            opt(e.null_rejection_tolerance),
            opt(e.coverage),
            opt(e.mean_estimate),
            opt(e.sd_to_se),
            e.failures
        );
    }
    let _ = writeln!(s, "tolerance: {}", r.tolerance_rule);
    let _ = writeln!(s, "identity checks: {} run, {} violated", r.identity_checks, r.identity_violations);
    if let Some(c) = &out.convergence {
        if let Some(last) = c.points.last() {
            let _ = writeln!(
                s,
                "convergence: n placebo {}, n active 1..{}, final theta {:.4} (se {})",
                c.n_placebo,
                last.n_active,
                last.theta_hat,
                opt(last.se)
            );
        }
    }
    for f in &out.files {
        let _ = writeln!(s, "wrote {}", f.display());
    }
    s
}
