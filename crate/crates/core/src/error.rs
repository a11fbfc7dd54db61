use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, NofError>;

#[derive(Debug, Error)]
pub enum NofError {
    /// Caller supplied data that violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("zero-variance channel `{0}`")]
    ZeroVarianceChannel(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown factor id `{0}`")]
    UnknownFactor(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<NofError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NofError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        NofError::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        NofError::InvalidConfig(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        NofError::Numerical(msg.into())
    }

    /// Process exit code for the CLI: 2 missing inputs, 3 bad config,
    /// 4 numerical failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            NofError::Stage { source, .. } => source.exit_code(),
            NofError::MissingInput(_) => 2,
            NofError::InvalidConfig(_) => 3,
            NofError::Numerical(_) | NofError::ZeroVarianceChannel(_) => 4,
            _ => 1,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            e @ NofError::Stage { .. } => e,
            e => NofError::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }
}
