use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("real Schur decomposition did not converge")]
    SchurFailure,
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bodies are sampled on different direction sets")]
    DirectionMismatch,
    #[error("support requested in a direction that was not sampled and no vertices are available")]
    UnsampledDirection,
    #[error("projection matrix is not idempotent (residual {0:e})")]
    NotIdempotent(f64),
    #[error("adaptive quadrature exceeded {0} panels")]
    QuadratureFailure(usize),
    #[error("induced hyperbolic block has eigenvalues on the imaginary axis")]
    NotHyperbolic,
    #[error("integration window too small: tail bound {0:e} exceeds 1e-6")]
    WindowTooSmall(f64),
    #[error("grid has {0} nodes, more than the limit of 1e6")]
    GridTooLarge(usize),
    #[error("epsilon {epsilon} must exceed half the grid spacing {spacing}")]
    EpsilonTooSmall { epsilon: f64, spacing: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("target node is not chain reachable from the source")]
    Unreachable,
    #[error("point {index} of the projective cloud has a preimage outside E")]
    MembershipViolation { index: usize },
}
