use thiserror::Error;

/// Errors raised by the integrators, noise generators and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive semi-definite (pivot {pivot} = {value:e})")]
    Indefinite { pivot: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step increments are missing `{0}`")]
    MissingIncrement(&'static str),

    #[error("invalid scheme combination: {0}")]
    InvalidCombination(String),

    #[error("particles {i} and {j} collided (r = {r:e})")]
    Collision { i: usize, j: usize, r: f64 },

    #[error("window [{start}, {end}) is not aligned with the fine path: {reason}")]
    Misaligned { start: f64, end: f64, reason: &'static str },

    #[error("every path was excluded for scheme {scheme} at dt = {dt:e}")]
    AllPathsExcluded { scheme: String, dt: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors that come from the numerics (blow-ups, collisions) rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::Collision { .. } | Error::Indefinite { .. } | Error::AllPathsExcluded { .. }
        )
    }
}
