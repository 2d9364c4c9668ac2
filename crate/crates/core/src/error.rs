use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("variance needs at least 2 per group")]
    TooFewForVariance,

    #[error("degenerate sample: zero variance")]
    ZeroVariance,

    #[error("all values tied")]
    AllTied,

    #[error("degenerate sample")]
    DegenerateSample,

    #[error("no benefit: NNT undefined")]
    NoBenefit,

    #[error("constant covariate")]
    ConstantCovariate,

    #[error("constant covariate across strata")]
    ConstantCovariateAcrossStrata,

    #[error("covariate completely separates the groups")]
    SeparatedCovariate,

    #[error("covariance exceeds variance bound")]
    CovarianceExceedsBound,

    #[error("HL requires numeric responses")]
    NonNumeric,

    #[error("ranking undefined: sample contains values tied with everything")]
    NotTotallyOrdered,

    #[error("unorderable value in {group} at position {index}")]
    Unorderable { group: &'static str, index: usize },

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("subject {id}: {reason}")]
    Subject { id: String, reason: String },

    #[error("stratum {label}: {source}")]
    Stratum { label: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Wraps the error with the label of the stratum it arose in.
    pub fn in_stratum(self, label: &str) -> Self {
        Error::Stratum {
            label: label.to_string(),
            source: Box::new(self),
        }
    }

    /// True when the data are well-formed but a statistic cannot be formed
    /// (zero variance, complete ties, covariate without spread).
    pub fn is_degenerate(&self) -> bool {
        match self {
            Error::ZeroVariance
            | Error::AllTied
            | Error::DegenerateSample
            | Error::ConstantCovariate
            | Error::ConstantCovariateAcrossStrata
            | Error::CovarianceExceedsBound
            | Error::SeparatedCovariate
            | Error::NoBenefit => true,
            Error::Stratum { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }
}
