//! Crate-wide error type.
//!
//! Numerical routines in this crate validate their inputs eagerly and report
//! structured errors instead of panicking; panics are reserved for violated
//! internal invariants (plain `assert!` on documented preconditions of pure
//! math helpers).

use thiserror::Error;

/// Error type shared by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its documented domain (empty sample set,
    /// mismatched lengths, probability outside `(0, 1)`, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Rejection sampling could not place the requested scene entities, i.e.
    /// the environment configuration is geometrically infeasible.
    #[error("configuration infeasible: {0}")]
    Infeasible(String),

    /// A loss or statistic became NaN/Inf during training. Carries enough
    /// context to locate the failing update.
    #[error("non-finite value at env step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    /// A sampling request asked for more data than is available (e.g. a
    /// batch larger than the replay buffer's current fill).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A checkpoint file was missing, truncated, or failed its header checks.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Underlying I/O failure (checkpoint reads/writes).
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for [`Error::InvalidArgument`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
