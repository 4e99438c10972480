use thiserror::Error;

/// Errors raised by the simulator.
///
/// Variants are grouped by how a caller should react: `Domain`, `CutoffMismatch`,
/// `NotNormalized`, `CutoffTooSmall` and `InvalidParams` are input validation
/// failures; `NonConverged` and `Underflow` are numerical accuracy failures;
/// `Sampler` means the rejection sampler gave up.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("cutoff {cutoff} too small: truncation leakage {leakage:e} exceeds {limit:e}")]
    CutoffTooSmall {
        cutoff: usize,
        leakage: f64,
        limit: f64,
    },

    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge: boundary mass {boundary_mass:e} exceeds {limit:e}")]
    NonConverged { boundary_mass: f64, limit: f64 },

    #[error("measurement probability {weight:e} below underflow threshold")]
    Underflow { weight: f64 },

    #[error("sampler failure: {0}")]
    Sampler(String),
}

impl Error {
    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::CutoffMismatch { .. }
                | Error::NotNormalized { .. }
                | Error::CutoffTooSmall { .. }
                | Error::InvalidParams(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
