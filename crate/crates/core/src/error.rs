use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ensemble: {0}")]
    InvalidSpec(String),

    #[error("invalid chart point: {0}")]
    InvalidPoint(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("non-finite coefficient at index {0}")]
    NonFiniteCoefficient(usize),

    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },

    #[error("the zero polynomial has no well-defined zero set")]
    ZeroPolynomial,

    #[error("root finder did not converge after {iterations} iterations")]
    RootsNotConverged { iterations: usize },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate}")]
    QuadratureNotConverged { estimate: f64, error_estimate: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNotConverged { sweeps: usize, off_norm: f64 },

    #[error("matrix is not positive definite enough: smallest eigenvalue {0:e}")]
    NotPositiveDefinite(f64),

    #[error("lattice would have {n} points, above the cap of {cap}")]
    LatticeTooLarge { n: usize, cap: usize },

    #[error("unsupported dimension m = {m} for {operation}")]
    UnsupportedDimension { m: usize, operation: &'static str },

    #[error("test function width {width} too large for domain of radius {radius}")]
    WidthTooLarge { width: f64, radius: f64 },

    #[error("point lies outside the ball: |zeta| = {norm}, r = {radius}")]
    OutsideBall { norm: f64, radius: f64 },

    #[error("rate fit needs at least 3 uncensored points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
