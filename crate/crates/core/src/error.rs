use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("generalized numbers live on different gauges or grids")]
    GridMismatch,
    #[error("divisor is not invertible on the grid tail")]
    NotInvertible,
    #[error("need at least {required} grid points, got {available}")]
    InsufficientData { required: usize, available: usize },
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("quadrature reached {achieved:e} but {requested:e} was requested")]
    Accuracy { achieved: f64, requested: f64 },
    #[error("derivative of order {requested} requested, only {available} available")]
    Capability { requested: usize, available: usize },
    #[error("{0} is not supported for this system")]
    Unsupported(&'static str),
    #[error("invalid state at t = {t}: {reason}")]
    InvalidState { t: f64, reason: String },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },
    #[error("solution diverged at t = {t}")]
    Divergence { t: f64 },
    #[error("degenerate problem: {0}")]
    Degenerate(&'static str),
    #[error("internal consistency check failed: {lhs} vs {rhs}")]
    InternalConsistency { lhs: f64, rhs: f64 },
    #[error("cost did not decrease for {iterations} iterations; try a smaller step")]
    StepSize { iterations: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub(crate) fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }
}
