//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, operators, reconstruction, and training.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or structural parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// Array shapes or lengths do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Scene raster spacing is inconsistent with the radar parameters.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Explicit measurement matrix would exceed the tiny-instance size cap.
    #[error("size cap exceeded: {rows}x{cols} entries > {cap}")]
    SizeCapExceeded { rows: usize, cols: usize, cap: usize },

    /// Requested sampling pattern cannot satisfy its constraints.
    #[error("infeasible sampling pattern: {0}")]
    InfeasiblePattern(String),

    /// Doppler bin outside the propagating region (migration factor <= 0).
    #[error("evanescent Doppler bin: migration factor D = {d} at f_eta = {f_eta} Hz")]
    EvanescentDoppler { d: f64, f_eta: f64 },

    /// Conjugate-gradient curvature collapsed before convergence.
    #[error("conjugate-gradient breakdown: curvature {curvature} at iteration {iteration}")]
    CgBreakdown { curvature: f64, iteration: usize },

    /// Iterative thresholding objective increased beyond the allowed slack.
    #[error("iteration diverged: objective rose from {previous} to {current} at iteration {iteration}")]
    Divergence { previous: f64, current: f64, iteration: usize },

    /// Gradient-descent step exceeds the estimated stability bound.
    #[error("step {step} exceeds stability bound {bound}")]
    StepTooLarge { step: f64, bound: f64 },

    /// Finite-difference step vanished against the parameter magnitude.
    #[error("finite-difference step underflow: step {step} at parameter {index}")]
    StepUnderflow { step: f64, index: usize },

    /// Training loss became NaN/inf; carries a diagnostic dump of the state.
    #[error("non-finite loss at epoch {epoch}, sample {sample}: {diagnostic}")]
    NonFiniteLoss { epoch: usize, sample: usize, diagnostic: String },

    /// Weight container decode failure.
    #[error("malformed weight container: {0}")]
    MalformedContainer(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
