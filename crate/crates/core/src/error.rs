use alloc::string::String;

/// Errors raised by the gait synthesis core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("relabel map is not a signed permutation: {0}")]
    InvalidMap(String),

    #[error("time {t} outside gait domain [0, {duration}]")]
    Domain { t: f64, duration: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("impact system is singular (swing-foot Jacobian rank deficient)")]
    SingularImpact,

    #[error("simulation diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("non-finite value at finite-difference probe of column {column}")]
    NonFiniteProbe { column: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
