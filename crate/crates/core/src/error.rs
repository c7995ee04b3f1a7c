use thiserror::Error;

/// Errors raised by the detection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    /// Bonferroni enumeration would visit more subsets than allowed.
    #[error("enumeration cap exceeded: {required} subsets required, cap is {cap}")]
    EnumerationCap { required: f64, cap: u64 },

    #[error("insufficient replicates: {0}")]
    InsufficientReplicates(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("{0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
