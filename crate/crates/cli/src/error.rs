use std::fmt;
use std::process::ExitCode;

/// Failure of a CLI command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad configuration, unreadable input: exit 2.
    Usage(String),
    /// Input that violates the data schema: exit 2.
    Data(Vec<String>),
    /// Valid input on which the requested statistic is undefined: exit 3.
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::Data(_) => ExitCode::from(2),
            CliError::Degenerate(_) => ExitCode::from(3),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(vec![message.into()])
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(lines) => {
                write!(f, "invalid input data:")?;
                for l in lines {
                    write!(f, "\n  {l}")?;
                }
                Ok(())
            }
            CliError::Degenerate(m) => write!(f, "statistic undefined: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<winratio_core::Error> for CliError {
    fn from(e: winratio_core::Error) -> Self {
        if e.is_degenerate() {
            CliError::Degenerate(e.to_string())
        } else {
            CliError::data(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
