use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("negative density at cell {index}: {value}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("non-finite value at cell {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration has {} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    ConfigViolations(Vec<String>),

    #[error("time step {dt:e} exceeds the stability bound {limit:e} ({bound})")]
    StepTooLarge { dt: f64, limit: f64, bound: &'static str },

    #[error("step {step} at t={t}: {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep member sigma={sigma}: {source}")]
    SweepMember {
        sigma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize, t: f64) -> Self {
        Error::Step {
            step,
            t,
            source: Box::new(self),
        }
    }
}
