use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("fully coherent has no finite lc (A = {0})")]
    FullyCoherent(f64),

    #[error("degenerate coefficients: `{symbol}` is {value}")]
    DegenerateCoefficients { symbol: &'static str, value: String },

    #[error("degenerate pattern: every sample is zero or non-finite")]
    DegeneratePattern,

    #[error("insufficient fringe structure: {0}")]
    InsufficientFringes(String),

    #[error("sweep row {index}: {source}")]
    SweepRow {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "refused under-resolved quadrature for {what}: {have} available, {need} required \
         (oscillation guard {guard})"
    )]
    RefusedUnderresolved {
        what: &'static str,
        have: f64,
        need: f64,
        guard: f64,
    },

    #[error("non-Hermitian residual at u1 = {u1:e} m, u2 = {u2:e} m: |imag|/|real| = {ratio:e}")]
    NonHermitianResidual { u1: f64, u2: f64, ratio: f64 },

    #[error("pattern grids do not match: {0}")]
    GridMismatch(String),

    #[error("spot-size fit failed: {reason}")]
    FitFailed { reason: String, trace: Vec<(f64, f64)> },

    #[error("no coincidence signal in column {0}")]
    NoCoincidenceSignal(usize),

    #[error("region out of bounds: {0}")]
    RegionOutOfBounds(String),

    #[error("frame container: {0}")]
    Container(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}
