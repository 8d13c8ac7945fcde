use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("IoFailure: {0}")]
    Io(#[from] io::Error),

    #[error("MalformedHeader: {0}")]
    MalformedHeader(String),

    #[error("UnsupportedFormat: {0}")]
    UnsupportedFormat(String),

    #[error("CountMismatch: header declares {declared} vertices, body holds {found}")]
    CountMismatch { declared: usize, found: usize },

    #[error("InvalidValue: {0}")]
    InvalidValue(String),

    #[error("ColorlessCloud: operation requires per-point colors")]
    ColorlessCloud,

    #[error("DegenerateCloud: need at least {required} points, got {found}")]
    DegenerateCloud { required: usize, found: usize },

    #[error("EmptyCloud")]
    EmptyCloud,

    #[error("RankDeficient: {0}")]
    RankDeficient(String),

    #[error("DegenerateVariance: {0}")]
    DegenerateVariance(String),

    #[error("ShapeMismatch: expected {expected} features, got {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("ZeroVariance: observer {0} has constant scores")]
    ZeroVariance(String),

    #[error("EmptyCell: no valid rating for content {content} at degradation {degradation}")]
    EmptyCell { content: String, degradation: String },

    #[error("UnbalancedDesign: {0}")]
    UnbalancedDesign(String),

    #[error("OutOfRange: {0}")]
    OutOfRange(String),

    #[error("DegenerateSamples: {0}")]
    DegenerateSamples(String),

    #[error("Infeasible: target rate {target} is below the minimum achievable rate {minimum}")]
    Infeasible { target: f64, minimum: f64 },

    #[error("NonMonotoneModel: p1={p1}, p2={p2}; both must be positive")]
    NonMonotoneModel { p1: f64, p2: f64 },

    #[error("InvalidRateModel: {0}")]
    InvalidRateModel(String),

    #[error("ParseFailure: {0}")]
    Parse(String),
}

impl Error {
    /// Stable error name, printed by the CLI on failure.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "IoFailure",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::InvalidValue(_) => "InvalidValue",
            Error::ColorlessCloud => "ColorlessCloud",
            Error::DegenerateCloud { .. } => "DegenerateCloud",
            Error::EmptyCloud => "EmptyCloud",
            Error::RankDeficient(_) => "RankDeficient",
            Error::DegenerateVariance(_) => "DegenerateVariance",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::EmptyCell { .. } => "EmptyCell",
            Error::UnbalancedDesign(_) => "UnbalancedDesign",
            Error::OutOfRange(_) => "OutOfRange",
            Error::DegenerateSamples(_) => "DegenerateSamples",
            Error::Infeasible { .. } => "Infeasible",
            Error::NonMonotoneModel { .. } => "NonMonotoneModel",
            Error::InvalidRateModel(_) => "InvalidRateModel",
            Error::Parse(_) => "ParseFailure",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Parse(format!("{other:?}")),
            }
        } else {
            Error::Parse(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Parse(e.to_string())
        }
    }
}
