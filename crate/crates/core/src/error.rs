use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: malformed manifest: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("interaction {interaction}: invalid {field}: {message}")]
    Validation {
        interaction: String,
        field: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("interaction {interaction}: missing {stream} stream")]
    Featurization { interaction: String, stream: String },

    #[error("interaction {interaction}: {message}")]
    Label { interaction: String, message: String },

    #[error("prediction failed: {0}")]
    Prediction(String),

    #[error("model error: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn validation(
        interaction: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            interaction: interaction.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
