use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time step {dt} exceeds the CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("linear/nonlinear decomposition drifted: relative mismatch {drift:e} > {tol:e}")]
    DecompositionDrift { drift: f64, tol: f64 },

    #[error("initial amplitude {max_abs} exceeds the 1/2 sup-norm bound")]
    AmplitudeTooLarge { max_abs: f64 },

    #[error("no grid points inside the separation region |x3| <= L/3")]
    RegionEmpty,

    #[error("label column at ({i1}, {i2}) is not strictly monotone in x3")]
    NotMonotone { i1: usize, i2: usize },

    #[error("fit needs at least {needed} samples, got {got}")]
    FitIllConditioned { needed: usize, got: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("snapshot header mismatch in {path:?}: {msg}")]
    HeaderMismatch { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CflViolation { .. } => 2,
            Error::NotMonotone { .. } => 3,
            Error::Io(_) => 4,
            Error::HeaderMismatch { .. } => 5,
            _ => 1,
        }
    }
}
