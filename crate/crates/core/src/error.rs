use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by [`ErrorKind`] so front ends can map them onto
/// exit codes without matching every variant.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid bubbling: {0}")]
    InvalidBubbling(String),

    #[error("vertex {0} does not carry an identity tensor")]
    NotIdentity(usize),

    #[error("resource guard exceeded: {what} needs 2^{needed_bits:.2} entries, limit is 2^{limit_bits}")]
    Guard {
        what: String,
        needed_bits: f64,
        limit_bits: u32,
    },

    #[error("zero operator: {0}")]
    ZeroOperator(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error at {position}: {message}")]
    Format { position: String, message: String },
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad caller-supplied argument.
    Usage,
    /// Malformed input data (files, tensors, graphs).
    Format,
    /// A resource guard was hit.
    Guard,
    /// Numerically ill-posed request, such as a zero operator.
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Guard { .. } => ErrorKind::Guard,
            Error::ZeroOperator(_) => ErrorKind::Numeric,
            _ => ErrorKind::Format,
        }
    }

    pub(crate) fn format(position: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            position: position.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
