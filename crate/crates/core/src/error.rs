use thiserror::Error;

/// A per-unit invariant violation found during validation.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitIssue {
    pub id: String,
    pub problem: String,
}

impl std::fmt::Display for UnitIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.id, self.problem)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset mixes payload kinds ({first} and {other})")]
    MixedPayloadKinds { first: String, other: String },
    #[error("{} invalid unit(s): {}", .0.len(), join_issues(.0))]
    InvalidUnits(Vec<UnitIssue>),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("too few draws: {got} < {need}")]
    TooFewDraws { got: usize, need: usize },
    #[error("theta {0} outside (0, 1)")]
    ThetaOutOfRange(f64),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("no bracketing interval: {0}")]
    NoBracket(String),
    #[error("Bayes-factor ranking is only defined for the normal model")]
    BfUndefined,
    #[error("unit ids differ between datasets: {0}")]
    MismatchedUnitIds(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_issues(issues: &[UnitIssue]) -> String {
    let shown: Vec<String> = issues.iter().take(10).map(|i| i.to_string()).collect();
    let mut s = shown.join("; ");
    if issues.len() > 10 {
        s.push_str("; ...");
    }
    s
}

/// Broad class of a failure, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyDataset => "EmptyDataset",
            Error::MixedPayloadKinds { .. } => "MixedPayloadKinds",
            Error::InvalidUnits(_) => "InvalidUnits",
            Error::DegenerateData(_) => "DegenerateData",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::TooFewDraws { .. } => "TooFewDraws",
            Error::ThetaOutOfRange(_) => "ThetaOutOfRange",
            Error::QuadratureFailure(_) => "QuadratureFailure",
            Error::NoBracket(_) => "NoBracket",
            Error::BfUndefined => "BFUndefined",
            Error::MismatchedUnitIds(_) => "MismatchedUnitIds",
            Error::ModelMismatch(_) => "ModelMismatch",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonConvergence { .. }
            | Error::QuadratureFailure(_)
            | Error::NoBracket(_) => ErrorClass::Numeric,
            Error::InvalidParameter(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
