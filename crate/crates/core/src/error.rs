use thiserror::Error;

/// Errors raised by the reservoir analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{x0} is not an equilibrium (residual {residual:e})")]
    NotAnEquilibrium { x0: f64, residual: f64 },

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("surrogate is unstable: spectral radius {0} >= 1")]
    Unstable(f64),

    #[error("need raw input moments up to order {needed}, got {got}")]
    MomentLength { needed: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("capacity {0} lies outside [0, 1] beyond tolerance")]
    CapacityOutOfBand(f64),

    #[error("no feasible starting point among the sampled restarts")]
    NoFeasiblePoint,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} = {value}")))
    }
}
