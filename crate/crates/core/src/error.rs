use thiserror::Error;

/// Failure categories shared by the library, the CLI and the C ABI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::ResourceLimit(msg.into())
    }

    /// Process exit code: 1 invalid input, 2 verification failure, 3 resource limit.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => 1,
            Error::Verification(_) => 2,
            Error::ResourceLimit(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
