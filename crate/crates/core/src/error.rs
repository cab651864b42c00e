use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("value outside the valid domain: {0}")]
    OutOfDomain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class; both labels are required")]
    SingleClass,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid model file: {0}")]
    Format(String),
    #[error("image codec error: {0}")]
    Codec(String),
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(what: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            found,
        }
    }
}
