use std::io;

use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown reference names: {}", .0.join(", "))]
    UnknownReference(Vec<String>),

    #[error("cannot place {needed} bp of repeats without overlap in a genome of {available} bp")]
    Capacity { needed: usize, available: usize },

    #[error("empty training set: no pseudo-labelled nodes (try a larger p)")]
    EmptyTrainingSet,

    #[error("training set contains a single class; both repeat and non-repeat examples are required")]
    SingleClass,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize, trace: Vec<f64> },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Artifact {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Attaches the file the error relates to.
    pub fn at_path(self, path: &std::path::Path) -> Self {
        Error::Artifact {
            path: path.display().to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than a stage failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::UnknownReference(_)
            | Error::MissingArtifacts(_)
            | Error::Io(_)
            | Error::Json(_) => true,
            Error::Stage { source, .. } | Error::Artifact { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
