use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. Every variant maps to a `(module, check)`
/// pair used by the CLI for its `E:<module>:<check>` prefix.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative order {order} exceeds limit {limit}")]
    OrderTooHigh { order: usize, limit: usize },

    #[error("{what} = {value} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("point set is empty")]
    EmptySet,

    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("jet {index} is not based at its point or has the wrong shape")]
    MalformedJet { index: usize },

    #[error("query point lies in E")]
    PointInSet,

    #[error("dyadic level {level} outside the supported range")]
    LevelOutOfRange { level: i32 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("period {tau} is not a power-of-two multiple of the local period {local}")]
    InvalidPeriod { tau: f64, local: f64 },

    #[error("sample count must be at least 1")]
    ZeroSamples,

    #[error("geometry check {check} failed: {detail}")]
    GeometryViolation { check: &'static str, detail: String },

    #[error("unknown suite {0:?}")]
    UnknownSuite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } | Error::OrderTooHigh { .. } => "jets",
            Error::CapExceeded { what, .. } if what.starts_with("jet") => "jets",
            Error::CapExceeded { .. } => "harness",
            Error::EmptySet | Error::DuplicatePoint { .. } | Error::MalformedJet { .. } => "fields",
            Error::PointInSet | Error::LevelOutOfRange { .. } | Error::GeometryViolation { .. } => {
                "cubes"
            }
            Error::InvalidParameter { .. } => "config",
            Error::InvalidPeriod { .. } | Error::ZeroSamples => "averaging",
            Error::UnknownSuite(_) => "harness",
            Error::Parse(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => "io",
        }
    }

    pub fn check(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension",
            Error::OrderTooHigh { .. } => "order",
            Error::CapExceeded { .. } => "cap",
            Error::EmptySet => "empty",
            Error::DuplicatePoint { .. } => "distinct",
            Error::MalformedJet { .. } => "jet",
            Error::PointInSet => "in_set",
            Error::LevelOutOfRange { .. } => "level",
            Error::InvalidParameter { name, .. } => name,
            Error::InvalidPeriod { .. } => "period",
            Error::ZeroSamples => "samples",
            Error::GeometryViolation { check, .. } => check,
            Error::UnknownSuite(_) => "suite",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
