use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StefanError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{assumption} violated: {detail}")]
    AssumptionViolated {
        assumption: &'static str,
        detail: String,
    },

    #[error("jet of order 0 has no derivative information left")]
    JetExhausted,

    #[error("series diverges at offset {offset:e} (radius of convergence {radius:e})")]
    SeriesDivergence { offset: f64, radius: f64 },

    #[error("series truncation tail {tail:e} exceeds tolerance relative to partial sum {scale:e}")]
    TruncationTail { tail: f64, scale: f64 },

    #[error("interface left admissible domain at t = {t} s: s = {s} m (allowed [{floor}, {ceiling}))")]
    DomainViolation {
        t: f64,
        s: f64,
        floor: f64,
        ceiling: f64,
    },

    #[error("non-finite value in {what} at t = {t} s")]
    NonFinite { what: &'static str, t: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = StefanError> = std::result::Result<T, E>;

impl StefanError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that stem from the numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Self::SeriesDivergence { .. }
                | Self::TruncationTail { .. }
                | Self::DomainViolation { .. }
                | Self::NonFinite { .. }
                | Self::JetExhausted
        )
    }
}
