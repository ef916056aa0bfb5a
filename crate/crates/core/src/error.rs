use thiserror::Error;

/// Errors produced by the allocation, decision and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("function value not finite at x = {x}")]
    NotFinite { x: f64 },

    #[error("root finder did not converge after {iterations} iterations (best x = {best}, residual = {residual})")]
    NoConvergence { best: f64, residual: f64, iterations: usize },

    #[error("size {requested} for hypothesis {index} is not attainable; attainable range is [0, {max_attainable}]")]
    Saturated { index: usize, requested: f64, max_attainable: f64 },

    #[error("{what}: size {got} exceeds the limit {limit}")]
    TooLarge { what: &'static str, limit: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("allocation solver failed: {0}")]
    Solver(String),

    #[error("replicate {rep} failed: {source}")]
    Replicate { rep: u64, source: Box<Error> },
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::LengthMismatch { .. } | Error::TooLarge { .. } => false,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in [0, 1], got {p}")))
    }
}
