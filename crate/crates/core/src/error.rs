use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("recipe has unresolvable entries: {}", .0.join("; "))]
    Recipe(Vec<String>),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes and the C ABI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Internal,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Recipe(_) => ErrorClass::Config,
            Error::Invariant(_) => ErrorClass::Internal,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Internal => 4,
        }
    }
}
