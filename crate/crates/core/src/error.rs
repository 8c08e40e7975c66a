//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by grid construction, system assembly, solving, and the
/// PDE/POD pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate grid: composite Simpson needs at least 3 points, got {0}")]
    DegenerateGrid(usize),

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    #[error("index {index} out of range for basis of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("exponent {exponent} exceeds max degree {max_degree}")]
    DegreeOutOfRange { exponent: u32, max_degree: u32 },

    #[error("incompatible domain: {0}")]
    IncompatibleDomain(String),

    #[error("trajectory carries no derivative data; estimate derivatives explicitly first")]
    MissingDerivatives,

    #[error("state range [{lo}, {hi}] escapes the test-basis domain [{a}, {b}]")]
    StateOutOfDomain { lo: f64, hi: f64, a: f64, b: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("integration blew up: first non-finite state at t = {t}")]
    Blowup { t: f64 },

    #[error(
        "FTCS stability violated: max beta*dt/dx^2 = {ratio} > 0.5; \
         largest stable dt is {required_dt}"
    )]
    CflViolation { ratio: f64, required_dt: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
