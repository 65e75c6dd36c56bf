use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("field violates homogeneous Dirichlet data at boundary point {point:?} (value {value:e})")]
    BoundaryIncompatible { point: Vec<f64>, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Cordes condition not satisfied: {0}")]
    CordesFailed(String),

    #[error("dimension condition violated: {0}")]
    DimensionCondition(String),

    #[error("simulation blew up at step {step}: {reason}")]
    BlowUp { step: usize, reason: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Strips any `Stage` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the analytic hypotheses (Cordes / dimension condition).
    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::CordesFailed(_) | Error::DimensionCondition(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
