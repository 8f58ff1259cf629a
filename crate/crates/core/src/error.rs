use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    /// A structural or numeric invariant of the model was violated.
    /// `path` names the offending field, e.g. `transitions[(s0,a0)]`.
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("discount factor {0} outside [0, 1)")]
    DiscountRange(f64),

    #[error("policy enumeration cap exceeded: {count} policies > cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("action {action} is not defined at state {state}")]
    UndefinedAction { state: String, action: String },

    #[error("no alternative action exists at state {0}")]
    SingleAction(String),

    #[error("singular linear system ({context}); reciprocal condition estimate {rcond:e}")]
    Singular { context: String, rcond: f64 },

    #[error("state {to} is unreachable from {from}; hitting time diverges")]
    Unreachable { from: String, to: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("Blackwell probe is not stationary: {0}")]
    ProbeNonStationary(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unknown state {0}")]
    UnknownState(String),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
