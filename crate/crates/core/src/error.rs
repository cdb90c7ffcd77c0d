//! Crate-wide error type.

/// Errors returned by constructors and operations in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter failed validation. `name` identifies the offending field
    /// or argument, `why` states the violated constraint and the value seen.
    #[error("invalid {name}: {why}")]
    Invalid { name: &'static str, why: String },

    /// Two detectors that must advance in lockstep were at different steps.
    #[error("detector step mismatch: subsystem 1 at step {left}, subsystem 2 at step {right}")]
    StepMismatch { left: u64, right: u64 },

    /// The requested computation has no answer on the given inputs.
    #[error("{0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid { name, why: why.into() }
    }
}
