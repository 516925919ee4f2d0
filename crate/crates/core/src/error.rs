use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A backward or reduced trajectory left the finite range.
    #[error("state became non-finite at t = {t}")]
    Divergence { t: f64 },

    #[error("power iteration did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("quadrature did not reach tolerance (error estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("top eigenvalue {lambda} is below 1: no speciation scale")]
    NoSpeciation { lambda: f64 },

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("classifier failed: {0}")]
    Classifier(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
