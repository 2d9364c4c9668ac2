//! Batch front end: CSV analyses, NNT tables and simulation runs.

pub mod analyze;
pub mod error;
pub mod input;
pub mod nnt_table;
pub mod report;
pub mod simulate;

pub use analyze::{analyze, AnalyzeOptions, Method};
pub use error::{CliError, CliResult};
