use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state is not normalized (|norm - 1| = {0:e})")]
    NotNormalized(f64),

    #[error("polar angle {0} outside [0, pi]")]
    PolarAngleOutOfRange(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("propagation did not converge: last refinement changed the state by {change:e} at {steps_per_period} steps per period")]
    NonConvergence { steps_per_period: usize, change: f64 },

    #[error("path is not closed (endpoint gap {0:e})")]
    OpenPath(f64),

    #[error("field magnitude vanishes at t = {0}")]
    VanishingField(f64),

    #[error("drive does not hold the cone angle fixed (max deviation {0:e} rad)")]
    DriveInconsistent(f64),

    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("export failed: {0}")]
    Export(String),
}

pub type Result<T> = std::result::Result<T, Error>;
