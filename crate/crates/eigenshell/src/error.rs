//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not self-adjoint: max asymmetry {max_asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSelfAdjoint { max_asymmetry: f64, tolerance: f64 },

    #[error("matrix is not unitary: max |U*U - I| entry {residual:.3e}")]
    NotUnitary { residual: f64 },

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("energy shell [{lo}, {hi}] selects no states")]
    EmptyShell { lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trajectory aborted at t = {t:.6}: momentum left (-1, 1)")]
    TrajectoryAborted { t: f64 },

    #[error("no admissible energy-surface point after {attempts} consecutive draws")]
    SeedExhausted { attempts: usize },

    #[error("zero density mass on the half-section")]
    EmptySection,

    #[error("spectrum cache unreadable: {0}")]
    CorruptCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
