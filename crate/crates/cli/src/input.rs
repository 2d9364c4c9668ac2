//! CSV ingestion and schema validation.
//!
//! Columns: `subject_id`, `group` (0 placebo, 1 active), and optionally
//! `response`, `stratum`, `covariate`, `died`, `death_time`, `last_value`,
//! `missing`. Empty cells are absent values. Rows are numbered from 1,
//! not counting the header.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use winratio_core::{build_composite, CompositeStrategy, CompositeValue, SubjectRecord};

use crate::error::{CliError, CliResult};

pub const COLUMNS: [&str; 9] = [
    "subject_id",
    "group",
    "response",
    "stratum",
    "covariate",
    "died",
    "death_time",
    "last_value",
    "missing",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Group {
    Placebo,
    Active,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub row: usize,
    pub group: Group,
    pub record: SubjectRecord,
    pub stratum: Option<String>,
    pub covariate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    pub rows: Vec<Row>,
}

fn parse_real(cell: &str, column: &str, row: usize, errors: &mut Vec<String>) -> Option<f64> {
    if cell.is_empty() {
        return None;
    }
    // Rust's float parser also takes "inf" and "NaN"; neither is data
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errors.push(format!("row {row}: {column} is not a finite number: {cell:?}"));
            None
        }
    }
}

fn parse_flag(cell: &str, column: &str, row: usize, errors: &mut Vec<String>) -> bool {
    match cell {
        "" | "0" => false,
        "1" => true,
        other => {
            errors.push(format!("row {row}: {column} must be 0 or 1, got {other:?}"));
            false
        }
    }
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_dataset(file)
}

pub fn parse_dataset<R: Read>(reader: R) -> CliResult<Dataset> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| CliError::data(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();

    let mut errors = Vec::new();
    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if !COLUMNS.contains(&h.as_str()) {
            errors.push(format!("header: unknown column {h:?}"));
        } else if index.insert(h.clone(), i).is_some() {
            errors.push(format!("header: duplicate column {h:?}"));
        }
    }
    for required in ["subject_id", "group"] {
        if !index.contains_key(required) {
            errors.push(format!("header: missing required column {required:?}"));
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Data(errors));
    }

    let mut rows = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(format!("row {row}: {e}"));
                continue;
            }
        };
        let cell = |name: &str| index.get(name).and_then(|&k| record.get(k)).unwrap_or("");

        let id = cell("subject_id").to_string();
        if id.is_empty() {
            errors.push(format!("row {row}: subject_id is empty"));
        } else if let Some(first) = seen.insert(id.clone(), row) {
            errors.push(format!("row {row}: subject_id {id:?} already used in row {first}"));
        }
        let group = match cell("group") {
            "0" => Group::Placebo,
            "1" => Group::Active,
            other => {
                errors.push(format!("row {row}: group must be 0 or 1, got {other:?}"));
                Group::Placebo
            }
        };
        let stratum = Some(cell("stratum")).filter(|s| !s.is_empty()).map(str::to_string);
        if index.contains_key("stratum") && stratum.is_none() {
            errors.push(format!("row {row}: stratum is empty"));
        }
        let covariate = parse_real(cell("covariate"), "covariate", row, &mut errors);
        if index.contains_key("covariate") && covariate.is_none() && cell("covariate").is_empty() {
            errors.push(format!("row {row}: covariate is empty"));
        }
        let subject = SubjectRecord {
            id,
            change: parse_real(cell("response"), "response", row, &mut errors),
            died: parse_flag(cell("died"), "died", row, &mut errors),
            death_time: parse_real(cell("death_time"), "death_time", row, &mut errors),
            last_change_alive: parse_real(cell("last_value"), "last_value", row, &mut errors),
            missing: parse_flag(cell("missing"), "missing", row, &mut errors),
        };
        rows.push(Row {
            row,
            group,
            record: subject,
            stratum,
            covariate,
        });
    }
    if rows.is_empty() && errors.is_empty() {
        errors.push("no data rows".to_string());
    }
    if !errors.is_empty() {
        return Err(CliError::Data(errors));
    }
    Ok(Dataset { columns: headers, rows })
}

/// Responses ready for analysis: plain numbers, or composite values when
/// death or missingness columns are present.
#[derive(Debug, Clone, PartialEq)]
pub enum Responses {
    Numeric(Vec<f64>),
    Composite(Vec<CompositeValue>),
}

impl Dataset {
    pub fn has(&self, column: &str) -> bool {
        self.columns.iter().any(|c| c == column)
    }

    pub fn require(&self, columns: &[&str], method: &str) -> CliResult<()> {
        let missing: Vec<String> = columns
            .iter()
            .filter(|c| !self.has(c))
            .map(|c| format!("header: method {method} needs column {c:?}"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Data(missing))
        }
    }

    pub fn is_composite(&self) -> bool {
        self.has("died") || self.has("missing")
    }

    /// Builds the analysis values, reporting every offending row.
    pub fn responses(&self, strategy: CompositeStrategy) -> CliResult<Responses> {
        let mut errors = Vec::new();
        if !self.is_composite() {
            if !self.has("response") {
                return Err(CliError::data("header: missing column \"response\""));
            }
            let mut values = Vec::with_capacity(self.rows.len());
            for r in &self.rows {
                match r.record.change {
                    Some(v) => values.push(v),
                    None => errors.push(format!("row {}: response is empty", r.row)),
                }
                for (name, present) in [
                    ("death_time", r.record.death_time.is_some()),
                    ("last_value", r.record.last_change_alive.is_some()),
                ] {
                    if present {
                        errors.push(format!("row {}: {name} given without a died column", r.row));
                    }
                }
            }
            return if errors.is_empty() {
                Ok(Responses::Numeric(values))
            } else {
                Err(CliError::Data(errors))
            };
        }
        let mut values = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            match build_composite(std::slice::from_ref(&r.record), strategy) {
                Ok(v) => values.extend(v),
                Err(winratio_core::Error::Subject { id, reason }) => {
                    errors.push(format!("row {} (subject {id}): {reason}", r.row))
                }
                Err(e) => errors.push(format!("row {}: {e}", r.row)),
            }
        }
        if errors.is_empty() {
            Ok(Responses::Composite(values))
        } else {
            Err(CliError::Data(errors))
        }
    }

    /// Row indices by stratum label, labels in lexicographic order.
    pub fn strata(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            map.entry(r.stratum.clone().unwrap_or_else(|| "all".to_string())).or_default().push(i);
        }
        map
    }
}
