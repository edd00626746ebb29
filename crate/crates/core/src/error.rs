use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range 1..={total}")]
    IndexOutOfRange { index: usize, total: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid path parameters: {0}")]
    Path(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular Fisher information matrix")]
    SingularFim,

    #[error("distance unidentifiable (far-field degeneration)")]
    DistanceUnidentifiable,

    #[error("combiner is orthogonal to the steering vector of subarray {0}")]
    OrthogonalCombiner(usize),

    #[error("zero reference channel")]
    ZeroChannel,

    #[error("empty dictionary")]
    EmptyDictionary,

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
