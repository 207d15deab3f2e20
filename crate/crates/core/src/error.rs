use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("simulated time overflow: {0}")]
    TimeOverflow(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid delivery trace: {0}")]
    Trace(String),

    #[error("run record: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by user input rather than the environment.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Trace(_) | Error::TimeOverflow(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
