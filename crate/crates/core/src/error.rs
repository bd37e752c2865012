use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("non-finite matrix entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("label collision on `{0}`")]
    LabelCollision(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("singular marginal: {0}")]
    SingularMarginal(String),

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("label sets do not partition the layout: {0}")]
    NotAPartition(String),

    #[error("label sets overlap on `{0}`")]
    OverlappingSets(String),

    #[error("distribution is not normalized (sum {0})")]
    NotNormalized(f64),

    #[error("unknown state name `{0}`")]
    UnknownName(String),

    #[error("too many copies to symmetrize exactly: k = {0} (max 6)")]
    TooManyCopies(usize),

    #[error("optimizer failure: {0}")]
    OptimizerFailure(String),

    #[error("dimension guard: total dimension {dim} exceeds cap {cap}")]
    DimensionGuard { dim: usize, cap: usize },

    #[error("certificate carries no witness state")]
    MissingWitness,

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
