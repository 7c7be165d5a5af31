use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RfrError>;

#[derive(Debug, Error)]
pub enum RfrError {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("non-finite loss in {stage} at iteration {iteration}, frame {frame}")]
    NonFiniteLoss {
        stage: String,
        iteration: usize,
        frame: usize,
    },

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("method `{method}` failed: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<RfrError>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl RfrError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RfrError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(op: &'static str, expected: &[usize], actual: &[usize]) -> Self {
        RfrError::ShapeMismatch {
            op,
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }

    /// True for failures caused by numerical blow-up rather than bad inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            RfrError::Method { source, .. } => source.is_numeric(),
            RfrError::NonFinite { .. } | RfrError::NonFiniteLoss { .. } | RfrError::Diverged { .. } => true,
            _ => false,
        }
    }
}
