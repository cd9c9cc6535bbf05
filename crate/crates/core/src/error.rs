use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument or constructed value is outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The coupling integral did not reach the requested accuracy.
    #[error(
        "quadrature did not converge: {message} (truncation point s = {truncation:.6e} 1/m, \
         last segment estimate = {last_segment:.6e}, error estimate = {error_estimate:.3e})"
    )]
    Quadrature {
        message: String,
        truncation: f64,
        last_segment: f64,
        error_estimate: f64,
    },

    /// The circuit matrix is singular or too ill-conditioned to trust.
    #[error(
        "ill-conditioned circuit matrix (condition estimate {condition:.3e}); \
         strongest coupling between coil {} and coil {}",
        .pair.0,
        .pair.1
    )]
    IllConditioned { condition: f64, pair: (usize, usize) },

    /// A quantity that must be nonzero vanished during evaluation.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The chain ansatz does not admit a decaying solution.
    #[error("chain model violated: {0}")]
    ModelViolation(String),

    /// The requested operation does not support this configuration.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A scenario file could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::IllConditioned { .. } | Error::Numerical(_) | Error::ModelViolation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}
