use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite gradient for parameter {param}")]
    NumericalInstability { param: String },

    #[error("loss is non-finite when {param} is perturbed by {offset:+e}")]
    NonFiniteLoss { param: String, offset: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("class {class} has no annotation but the loss requires one")]
    Annotation { class: usize },

    #[error("memory sample is missing the label for class {class}; relabeling did not run")]
    RelabelIncomplete { class: usize },

    #[error("prediction alignment error: {0}")]
    Alignment(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset validation failed: {0}")]
    Validation(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
