use thiserror::Error;

/// Failure classes shared by every module.
///
/// The split mirrors how callers react: a bad request is fixed by the user,
/// a resource cap by a smaller problem, a numerical failure by neither.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    Cap {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("cache integrity: {0}")]
    Cache(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
