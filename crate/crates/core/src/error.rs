use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input index {index} out of range for arity {arity}")]
    IndexOutOfRange { index: usize, arity: usize },

    #[error("arity {arity} exceeds the limit of {limit} for {what}")]
    ArityTooLarge {
        arity: usize,
        limit: usize,
        what: &'static str,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("neighborhood has {size} completions, above the enumeration cap of {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    /// An oracle answered in a way that breaks the wire contract
    /// (wrong echo id, mutated positions outside the subset, bad JSON...).
    #[error("oracle protocol violation: {0}")]
    Protocol(String),

    /// An oracle answered with a well-formed `{"error": ...}` object.
    #[error("oracle reported an error: {0}")]
    Oracle(String),

    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    /// True for failures caused by an oracle misbehaving on the wire.
    pub fn is_protocol_violation(&self) -> bool {
        matches!(self, Error::Protocol(_) | Error::Oracle(_))
    }
}
