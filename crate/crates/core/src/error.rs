use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("field is not mean-zero: mean = {mean:e}")]
    MeanZeroViolation { mean: f64 },

    #[error("nonfinite value encountered: {0}")]
    NonFinite(String),

    #[error("blowup detected at step {step} (t = {time}): {reason}")]
    Blowup { step: usize, time: f64, reason: String },

    #[error("profile is not a traveling wave: relative residual {residual:e} exceeds {tolerance:e}")]
    NotASoliton { residual: f64, tolerance: f64 },

    #[error("Picard iteration failed to contract at iteration {iteration}: ratios {ratios:?}")]
    ContractionFailure { iteration: usize, ratios: Vec<f64> },

    #[error("quadrature tolerance {requested:e} unachievable, best bound {achieved:e}")]
    Accuracy { requested: f64, achieved: f64 },

    #[error("truncation box too small: tail fraction {tail_fraction:e} exceeds {limit:e}")]
    BoxTooSmall { tail_fraction: f64, limit: f64 },

    #[error("lattice of {requested} cells exceeds the guard of {limit}")]
    SizeGuard { requested: usize, limit: usize },

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
