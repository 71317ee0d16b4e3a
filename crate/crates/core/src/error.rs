//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical kernels, solvers and front end.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands of incompatible shape were combined.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A value violates the invariant of the type it was meant to build.
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    /// A numeric parameter is outside the domain of the operation.
    #[error("parameter `{key}` out of range: {detail}")]
    Parameter { key: String, detail: String },

    /// The Hermitian eigensolver failed to reproduce its input.
    #[error("eigensolver did not converge (relative residual {residual:.3e})")]
    EigenNonConvergence { residual: f64 },

    /// The adaptive integrator could not take a step larger than the floor.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    /// The integrated state left the positive cone beyond tolerance.
    #[error("positivity violated at t = {t:.6e}: minimum eigenvalue {min_eigenvalue:.3e}")]
    PositivityViolation { t: f64, min_eigenvalue: f64 },

    /// Iterative solver stopped without reaching its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NonConvergence { solver: &'static str, iterations: usize, residual: f64 },

    /// Distinct initial states relaxed to distinct fixed points.
    #[error("ambiguous steady state: seeds disagree by {distance:.3e}")]
    AmbiguousSteadyState { distance: f64 },

    /// A protocol ran too fast for the state to follow its instantaneous steady state.
    #[error("quasi-static monitor tripped at t = {t:.6e}: trace distance {distance:.3e} > {threshold}; use longer ramps")]
    Adiabaticity { t: f64, distance: f64, threshold: f64 },

    /// A grid or sampling is too coarse for the requested derivative or quadrature.
    #[error("insufficient resolution: {0}")]
    Resolution(String),

    /// A root-finding bracket could not be established.
    #[error("bracket failure: {0}")]
    Bracket(String),

    /// A computed quantity violates a structural invariant.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// Input/output failure in the front end.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON configuration or manifest.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from user input rather than a numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. } | Error::Invalid { .. } | Error::Parameter { .. }
        )
    }

    pub(crate) fn param(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parameter { key: key.into(), detail: detail.into() }
    }

    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid { what, detail: detail.into() }
    }
}
