use thiserror::Error;

/// Errors raised by the flow, spectral and verification layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid domain mask: {0}")]
    InvalidMask(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside the existence interval [0, {t_max})")]
    TimeOutOfRange { t: f64, t_max: f64 },

    #[error("no initial spectrum available for mode {mode}")]
    UnknownSpectrum { mode: usize },

    #[error("time step {dt:e} exceeds the stability bound {bound:e} at t = {t}")]
    StabilityViolation { dt: f64, bound: f64, t: f64 },

    #[error("conformal factor blew up at t = {t} (max |phi| = {max_abs_phi})")]
    BlowUp { t: f64, max_abs_phi: f64 },

    #[error("domain has no interior node")]
    EmptyInterior,

    #[error("eigensolver did not converge for mode {mode_index} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        mode_index: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },

    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StabilityViolation { .. } | Error::BlowUp { .. } | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
