use std::path::PathBuf;

/// Errors produced by the simulation, estimation and I/O layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("malformed WAV at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("scenario generation failed for seed {seed:#018x}: {message}")]
    Generation { seed: u64, message: String },

    #[error("dataset schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated blob {path}: expected {expected} bytes, found {found}")]
    TruncatedBlob { path: PathBuf, expected: u64, found: u64 },

    #[error("checksum mismatch for {path}")]
    ChecksumMismatch { path: PathBuf },

    #[error("estimator failed: {0}")]
    Estimator(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
