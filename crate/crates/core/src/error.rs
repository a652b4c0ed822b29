use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Meta-path chains or relations that do not fit the graph's schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Bad ids, unknown relations, malformed arguments.
    #[error("input error: {0}")]
    Input(String),

    /// Invalid hyperparameters or configuration files.
    #[error("config error: {0}")]
    Config(String),

    /// The graph lacks structure an operation needs (e.g. a node without
    /// neighbors of a required type).
    #[error("structural error: {0}")]
    Structural(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    /// Engine misuse, e.g. backward on a non-scalar or an optimizer step
    /// without gradients.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("{}:{line}: {msg}", file.display())]
    Load {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Non-finite values during training.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn load(file: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 1,
            Error::Schema(_)
            | Error::Input(_)
            | Error::Structural(_)
            | Error::Load { .. }
            | Error::Io { .. } => 2,
            Error::Shape { .. } | Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
