//! Crate-wide error type. Domain errors carry enough context to point at the
//! offending input (field, count, buyer) rather than just a message.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Construction or argument validation failed; the message names the
    /// offending field or quantity.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An exact enumeration was requested on an instance whose profile space
    /// exceeds the configured cap; callers should fall back to Monte Carlo.
    #[error("instance too large for exact enumeration: {cells} profiles exceeds cap {cap}; use the Monte Carlo variant")]
    InstanceTooLarge { cells: usize, cap: usize },

    /// A sample-consuming pipeline was handed fewer rows than its sample-count
    /// formula requires.
    #[error("insufficient samples: {required} required, {available} available ({context})")]
    InsufficientSamples {
        required: usize,
        available: usize,
        context: String,
    },

    /// A mechanism was run on a value outside the relevant buyer's support.
    #[error("value {value} is not in the support of buyer {buyer}")]
    ValueNotInSupport { buyer: usize, value: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
