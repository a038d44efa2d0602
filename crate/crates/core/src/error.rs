use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Degree or layout mismatch between a group element and the data it acts on.
    #[error("structural mismatch: {0}")]
    Structural(String),

    /// The requested computation needs group enumeration beyond the configured cap.
    #[error("group of order {order} exceeds the enumeration cap {cap}; use haar_sample instead")]
    Capability { order: String, cap: usize },

    /// Malformed or insufficient data.
    #[error("invalid data: {0}")]
    Data(String),

    /// Non-finite values or an ill-conditioned matrix.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An iterative solver hit its iteration cap.
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e}): {context}")]
    Solver {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
