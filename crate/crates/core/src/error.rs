use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution parameter violates its family's domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A caller broke an operation's contract (mismatched layouts,
    /// out-of-range arguments).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed input data; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Inference produced non-finite values or an otherwise unusable state.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An invalid run configuration, rejected before any computation.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::InvalidParameter(_) => 2,
            Error::Parse { .. } | Error::Io { .. } => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
