use thiserror::Error;

/// Errors raised by mesh construction, the solvers and the diagnostics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("coordinate {x} lies outside the closed domain [0, {extent}]")]
    OutsideDomain { x: f64, extent: f64 },

    #[error("element index {index} out of range (mesh has {count} elements)")]
    ElementIndex { index: usize, count: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// `β = p` is the exact non-existence threshold: the regularized weight
    /// exponent `(p - 1 + δ)/(p - β)` is undefined there.
    #[error("β = p = {p} is the non-existence threshold; the regularized weight is undefined")]
    NonExistenceThreshold { p: f64 },

    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e}, μ = {mu:.1e})")]
    NewtonNotConverged {
        iterations: usize,
        residual: f64,
        mu: f64,
        last_iterate: Vec<f64>,
    },

    #[error("line search failed at Newton iteration {iteration} (residual {residual:.3e}, μ = {mu:.1e})")]
    LineSearchFailed {
        iteration: usize,
        residual: f64,
        mu: f64,
    },

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("fixed-point iteration did not settle after {iterations} iterations (last change {last_change:.3e})")]
    PicardNotConverged {
        iterations: usize,
        last_change: f64,
        previous: Vec<f64>,
        last: Vec<f64>,
    },

    #[error("monotonicity in ε violated by {violation:.3e} at ε = {eps:.3e}")]
    MonotonicityViolation { eps: f64, violation: f64 },

    #[error("integration fault in Θ shooting: {0}")]
    ThetaFault(String),

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("probe aborted: {0}")]
    ProbeAborted(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
