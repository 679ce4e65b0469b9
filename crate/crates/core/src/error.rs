use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector must have at least one component")]
    EmptyVector,

    #[error("non-finite component {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid lp exponent {0}; must be finite and > 1")]
    InvalidExponent(f64),

    #[error("degenerate direction: zero vector")]
    DegenerateDirection,

    #[error("norm {0} is not differentiable")]
    NotDifferentiable(String),

    #[error("hyperplane weights must not all be zero")]
    ZeroWeights,

    #[error("robustness radius must be > 0, got {0}")]
    InvalidRadius(f64),

    #[error("face-interior parameter must lie strictly inside (0, 1), got {0}")]
    InvalidTheta(f64),

    #[error("{0}; use the non-differentiable attack")]
    UseNonDifferentiableAttack(String),

    #[error("attack requires a non-differentiable norm-1 (l1 or linf), got {0}")]
    RequiresPolyhedralNorm(String),

    #[error("oracle has no robustness spec configured")]
    MissingRobustness,

    #[error("degenerate query set: rank {rank}, need {needed}")]
    DegenerateQuerySet { rank: usize, needed: usize },

    #[error("no consistent orientation among {candidates} candidate hyperplanes")]
    NoConsistentOrientation { candidates: usize },

    #[error("ambiguous recovery: {0} distinct consistent hyperplanes")]
    AmbiguousRecovery(usize),

    #[error("inconsistent ledger: {0}")]
    InconsistentLedger(String),

    #[error("model measure-zero or infeasible: no acceptances after {0} proposals")]
    SamplerExhausted(u64),

    #[error("feasibility solver failure: {0}")]
    SolverFailure(String),

    #[error("operation requires a kind {expected} model, got {got}")]
    WrongModelKind { expected: String, got: String },

    #[error("raster requires p = 2, got {0}")]
    RasterDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
