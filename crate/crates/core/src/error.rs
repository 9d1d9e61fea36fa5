use thiserror::Error;

/// Every failure the simulator can report.
///
/// The variants are grouped by who is at fault: configuration and validation
/// errors come from the caller, protocol-order and decode faults indicate an
/// engine bug or a gate applied out of sequence.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QramError {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("protocol-order error: {0}")]
    ProtocolOrder(String),
    #[error("incomplete protocol: {0}")]
    IncompleteProtocol(String),
    #[error("coherence fault: {0}")]
    CoherenceFault(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("bank document error: {0}")]
    Bank(String),
    #[error("missing cell {address} in bank document")]
    MissingCell { address: String },
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("gate is not a permutation: {0}")]
    NotPermutation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl QramError {
    /// Process exit code used by the command-line front end.
    ///
    /// 1 for anything the user can fix, 3 for faults inside the engine.
    pub fn exit_code(&self) -> i32 {
        match self {
            QramError::Configuration(_)
            | QramError::Validation(_)
            | QramError::Usage(_)
            | QramError::Bank(_)
            | QramError::MissingCell { .. }
            | QramError::SizeCap(_)
            | QramError::Io(_) => 1,
            QramError::ProtocolOrder(_)
            | QramError::IncompleteProtocol(_)
            | QramError::CoherenceFault(_)
            | QramError::Encoding(_)
            | QramError::NotPermutation(_) => 3,
        }
    }
}

impl From<std::io::Error> for QramError {
    fn from(err: std::io::Error) -> Self {
        QramError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QramError>;
