use std::path::PathBuf;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Validation {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("value {value} for `{target}` outside raw range [{min}, {max}]")]
    OutOfRange {
        target: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("image `{image}` has no votes for `{target}`")]
    EmptyVotes { image: String, target: String },

    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("weight load error: {0}")]
    Load(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown layer `{name}`; valid layers: {}", valid.join(", "))]
    UnknownLayer { name: String, valid: Vec<String> },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },

    #[error("training split is empty")]
    EmptyTrainingSplit,

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint/schema mismatch: {0}")]
    Incompatible(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Schema(_) | Error::UnknownLayer { .. } => ErrorClass::Config,
            Error::Validation { .. }
            | Error::OutOfRange { .. }
            | Error::Csv { .. }
            | Error::EmptyVotes { .. }
            | Error::Decode { .. }
            | Error::EmptyTrainingSplit
            | Error::Incompatible(_) => ErrorClass::Data,
            _ => ErrorClass::Runtime,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
