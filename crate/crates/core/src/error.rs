use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CanardError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: exponent {exponent} exceeds the representable range")]
    Overflow { exponent: f64 },
    #[error("singular configuration: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NonConvergent(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },
    #[error("pattern deviation after loops {achieved}")]
    PatternDeviation { achieved: String },
}

pub type Result<T> = std::result::Result<T, CanardError>;

pub(crate) fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CanardError::Domain(format!("{name} is not finite ({v})")))
    }
}
