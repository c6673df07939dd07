use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("definite signature ({t},{s}) admits no null frame")]
    NoNullFrame { t: usize, s: usize },

    #[error("matrix is not in the stabiliser of the null line (residual {residual:e})")]
    NotInStabiliser { residual: f64 },

    #[error("subspace is not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },

    #[error("not a representation: {0}")]
    NotARepresentation(String),

    #[error("numerical instability: {0}")]
    Numerical(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("precondition failed at {point:?}: {message}")]
    Precondition { point: Vec<f64>, message: String },

    #[error("frame error: {0}")]
    Frame(String),

    #[error("integration error: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
