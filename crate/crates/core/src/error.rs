use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("singular matrix at pivot {pivot}")]
    Singular { pivot: usize },

    /// Iteration failed. The last iterate and the residual-norm history are
    /// kept so callers can inspect how far it got.
    #[error("{reason} after {} iterations (last residual {:.3e})", history.len().saturating_sub(1), history.last().copied().unwrap_or(f64::NAN))]
    Divergence {
        reason: String,
        iterate: Vec<f64>,
        history: Vec<f64>,
    },

    #[error("rejected: {0}")]
    Rejected(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn ensure_finite(values: &[f64], context: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}
