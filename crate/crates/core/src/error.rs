use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite argument {0}")]
    NonFinite(f64),

    #[error("normalized Doppler f_d*T_s = {0} must be below 0.5")]
    DopplerTooHigh(f64),

    #[error("trace of length {length} is too short for max lag {max_lag} (need more than {required} samples)")]
    TraceTooShort {
        length: usize,
        max_lag: usize,
        required: usize,
    },

    #[error("index window ending at age {end} exceeds the tabulated reward curve (length {len})")]
    WindowOutOfRange { end: usize, len: usize },

    #[error("horizon exhausted: no age up to {searched} has index at or below {beta}")]
    HorizonExhausted { beta: f64, searched: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("data slot scheduled before the first pilot of the run (slot {0})")]
    DataBeforePilot(u64),

    #[error("{path}: {message}")]
    TableFormat { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
