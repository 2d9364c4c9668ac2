//! `nnt-table`: win ratio → win probability → number needed to treat.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use winratio_core::nnt_from_kappa;

use crate::error::{CliError, CliResult};
use crate::report::Real;

/// Win ratios listed by default, ending with κ = ∞.
pub const DEFAULT_KAPPAS: [f64; 14] = [
    1.05,
    1.1,
    1.15,
    1.18,
    1.2,
    1.25,
    1.3,
    1.35,
    1.4,
    1.45,
    1.5,
    2.0,
    3.0,
    f64::INFINITY,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NntRow {
    pub kappa: Real,
    pub theta: f64,
    pub nnt: u64,
}

pub fn parse_kappa(text: &str) -> CliResult<f64> {
    match text.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .ok_or_else(|| CliError::Usage(format!("--kappa: not a number: {t:?}"))),
    }
}

pub fn nnt_rows(kappas: &[f64]) -> CliResult<Vec<NntRow>> {
    kappas
        .iter()
        .map(|&k| match nnt_from_kappa(k) {
            Ok((theta, nnt)) => Ok(NntRow {
                kappa: Real(k),
                theta,
                nnt,
            }),
            Err(winratio_core::Error::NoBenefit) => {
                Err(CliError::Usage(format!("--kappa {k}: no benefit (win ratio must exceed 1)")))
            }
            Err(e) => Err(CliError::Usage(format!("--kappa {k}: {e}"))),
        })
        .collect()
}

pub fn render(rows: &[NntRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>10} {:>12} {:>6}", "Win ratio", "Win prob", "NNT");
    for r in rows {
        let kappa = if r.kappa.0.is_infinite() {
            "-".to_string()
        } else {
            format!("{}", r.kappa.0)
        };
        let _ = writeln!(out, "{:>10} {:>12} {:>6}", kappa, format!("{:.7}", r.theta), r.nnt);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_rows() {
        let rows = nnt_rows(&[1.18, 3.0, f64::INFINITY]).unwrap();
        assert_eq!(format!("{:.7}", rows[0].theta), "0.5412844");
        assert_eq!(rows[0].nnt, 13);
        assert_eq!((rows[1].theta, rows[1].nnt), (0.75, 2));
        assert_eq!((rows[2].theta, rows[2].nnt), (1.0, 1));
    }

    #[test]
    fn no_benefit_rejected() {
        let err = nnt_rows(&[1.0]).unwrap_err();
        assert!(err.to_string().contains("no benefit"));
        assert!(nnt_rows(&[0.5]).is_err());
        assert!(parse_kappa("abc").is_err());
        assert_eq!(parse_kappa("inf").unwrap(), f64::INFINITY);
    }
}
