use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulate / learn / control pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite state encountered at t = {time:.6} s")]
    BlowUp { time: f64 },

    #[error("trace too short: need at least {needed} samples, have {available}")]
    TraceTooShort { needed: usize, available: usize },

    #[error("input gain is unidentifiable: the excitation sequence is identically zero")]
    Unidentifiable,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("R^2 undefined: truth series is constant")]
    ConstantTruth,

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("window [{start}, {end}] s lies outside the trace")]
    WindowOutOfRange { start: f64, end: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing upstream artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("config hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by bad user input rather than runtime conditions.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config(_) | Error::HashMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
