use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate configuration: augmented rank {rank} < {required}")]
    DegenerateConfiguration { rank: usize, required: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("unstable step size: h*lambda_max = {product:.4} exceeds {limit}; try h <= {suggested:.3e}")]
    UnstableStep {
        product: f64,
        limit: f64,
        suggested: f64,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::DegenerateConfiguration { .. } => "degenerate-configuration",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::Solver(_) => "solver-failure",
            Error::Verification(_) => "verification-failed",
            Error::UnstableStep { .. } => "unstable-step",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
