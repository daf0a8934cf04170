use thiserror::Error;

/// Errors raised by the numerical layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("field corrupted: non-finite value at node {index}")]
    Corruption { index: usize },

    #[error("rescale out of range: {fraction:.3e} of the gradient mass would be pushed beyond R")]
    OutOfRange { fraction: f64 },

    #[error("inconsistent ground-state energy: quadrature {quadrature:.12e} vs (1/d)|grad W|^2 {identity:.12e}")]
    Consistency { quadrature: f64, identity: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("step size collapsed to {dt:.3e} at t = {t:.6e}")]
    StepCollapse { t: f64, dt: f64 },

    #[error("no field checkpoint at t = {0}")]
    MissingCheckpoint(f64),

    #[error("fit window too short: [{t_lo:.3e}, {t_hi:.3e}] with {samples} samples")]
    WindowTooShort { t_lo: f64, t_hi: f64, samples: usize },

    #[error("tail mass too large: |u| near R is {ratio:.3e} of the peak")]
    TailMass { ratio: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
