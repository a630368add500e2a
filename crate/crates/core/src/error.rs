use thiserror::Error;

/// Errors shared across the simulation and analysis modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Closed forms for birth-death processes degenerate when birth == death.
    #[error("critical case unsupported: birth rate equals death rate")]
    CriticalCase,

    /// A simulation exceeded its event budget before satisfying its stop rule.
    #[error("event cap of {cap} exceeded")]
    EventCapExceeded { cap: u64 },

    /// An input path does not satisfy the contract of the operation.
    #[error("path contract violated: {0}")]
    PathContract(String),

    #[error("paths are defined on different domains")]
    DomainMismatch,

    #[error("tolerance unreachable: sample budget exceeded at n = {samples}")]
    ToleranceUnreachable { samples: usize },

    #[error("both paths must be monotone in the same direction")]
    NotMonotone,

    /// A path functional (hitting time, last visit, ...) does not exist on the input.
    #[error("functional undefined on this path: {0}")]
    Undefined(String),

    /// Asking for the fixation time of a path on which the mutant was lost.
    #[error("path ends in loss, not fixation")]
    LossPath,

    #[error("empty restriction window")]
    EmptyWindow,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
