//! Error type shared by all solvers.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Parameters outside the massless antiferromagnetic window handled here.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// Evaluation closer to a pole or branch line than the guard radius.
    #[error("domain error: {0}")]
    Domain(String),

    /// Linear solve failed or is too ill-conditioned to trust.
    #[error("linear solve failed: {reason} (condition estimate {cond:.3e})")]
    LinearSolve { reason: String, cond: f64 },

    /// Bracketing or Newton root search failed.
    #[error("root search failed: {0}")]
    RootSearch(String),

    /// Implicit-curve tracing left the admissible strip or stalled.
    #[error("contour tracing failed: {0}")]
    Tracing(String),

    /// Fixed-point iteration did not reach the requested tolerance.
    #[error("no convergence after {iterations} sweeps (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Two excitation roots collided; the configuration is invalid.
    #[error("root collision: {0}")]
    RootCollision(String),

    /// Invalid excitation or run configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// I/O error while writing artifacts.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
