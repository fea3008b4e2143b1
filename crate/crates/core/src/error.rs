use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("representation mismatch: {0}")]
    RepresentationMismatch(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerically singular system in {context} (ridge {ridge:e}); increase the ridge parameter")]
    SingularSystem { context: String, ridge: f64 },

    #[error("training failed at iteration {iteration}: {source}")]
    Training {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown target function `{0}`")]
    UnknownTarget(String),

    #[error("ODE solution became non-finite at t = {time}")]
    OdeBlowUp { time: f64 },

    #[error("config error: {0}")]
    Config(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
