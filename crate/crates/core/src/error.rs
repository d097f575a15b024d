//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI reports them: configuration problems
//! (exit code 1), data problems (exit code 2), and internal invariant
//! failures (exit code 3).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration:\n  {}", violations.join("\n  "))]
    Config { violations: Vec<String> },

    #[error("{0}")]
    Data(String),

    #[error("{artifact} missing; run {stage}")]
    MissingStageInput { artifact: String, stage: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero vector: cosine similarity is undefined")]
    ZeroVector,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("no speaker token for author {author:?} in the {context} context")]
    MissingSpeakerToken { author: String, context: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(violations: Vec<String>) -> Self {
        Error::Config { violations }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Exit code class used by the CLI: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 1,
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}
