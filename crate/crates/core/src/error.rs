use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("quadrature Gram residual {residual:e} at (m={m}, n={n}) exceeds 1e-8")]
    Quadrature { m: usize, n: usize, residual: f64 },
    #[error("divergence at t={t}: |value| = {value:e}")]
    Divergence { t: f64, value: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} must be finite, got {x}")))
    }
}
