use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimated error {error:e} after {evaluations} evaluations on {intervals} intervals")]
    Quadrature {
        error: f64,
        evaluations: usize,
        intervals: usize,
    },

    #[error("reflection/transmission ratio undefined for zero input amplitude")]
    ZeroInput,

    #[error("no transparency dip: depth {depth:e} is below 1e-6 of baseline {baseline:e}")]
    NoDip { depth: f64, baseline: f64 },

    #[error("integrator failure at t = {t:e} s: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("fit did not converge after {iterations} iterations (residual sum of squares {rss:e})")]
    FitNotConverged { iterations: usize, rss: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("complex logarithm left its principal branch near Δ = {delta:e} rad/s")]
    BranchCut { delta: f64 },

    #[error("insufficient data: {needed} points needed, {got} supplied")]
    InsufficientData { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}
