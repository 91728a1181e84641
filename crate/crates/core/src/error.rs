//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by environments, networks, and the training engine.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Invalid configuration: bad shapes, out-of-range settings, teams that
    /// do not fit on the grid, and similar construction-time failures.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's contract (e.g. stepping an environment
    /// with an unavailable action, or an empty availability mask).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric failure: non-finite loss or gradient, diverged run.
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        CoreError::Contract(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CoreError::Numeric(msg.into())
    }
}
