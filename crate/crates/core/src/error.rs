use std::path::PathBuf;

/// Errors produced by the planner library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An input document does not match its schema.
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },

    /// The requested combination of options cannot be built.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The LP engine reported an internal failure.
    #[error("LP engine failure: {0}")]
    Lp(String),

    /// An external solver exited unsuccessfully.
    #[error("external solver exited with status {status}: {stderr}")]
    ExternalExit { status: i32, stderr: String },

    /// An external solver produced output that could not be read.
    #[error("unreadable external solution: {0}")]
    ExternalOutput(String),

    /// A solution failed independent validation.
    #[error("solution failed validation: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
