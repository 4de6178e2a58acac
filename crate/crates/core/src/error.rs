use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error("unparseable header: {0}")]
    Header(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("invalid session grid: open {open} must precede close {close}")]
    InvalidGrid { open: u32, close: u32 },

    #[error("no common trading days between {0} and {1}")]
    NoCommonDays(String, String),

    #[error("response noise needs at least two common days, got {0}")]
    TooFewDays(usize),

    #[error("unknown symbol {0}")]
    UnknownSymbol(String),

    #[error("unknown sector {0}")]
    UnknownSector(String),

    #[error("averaging pool is empty")]
    EmptyPool,

    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("invalid lag grid: {0}")]
    InvalidLags(String),

    #[error("curves do not share a lag grid")]
    LagMismatch,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("need more than {needed} defined points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid probability {name} = {value}")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("requested amplitude {requested} is beyond the achievable bound {achievable}")]
    Unachievable { requested: f64, achievable: f64 },

    #[error("kernel contains non-finite values")]
    NonFiniteKernel,

    #[error("invalid synthetic spec: {0}")]
    Synth(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::UnknownSymbol(_)
            | Error::UnknownSector(_)
            | Error::InvalidLags(_)
            | Error::InvalidGrid { .. }
            | Error::Synth(_)
            | Error::InvalidProbability { .. } => ErrorClass::Usage,
            Error::Domain(_)
            | Error::TooFewPoints { .. }
            | Error::Unachievable { .. }
            | Error::NonFiniteKernel => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
