//! First integrals of the canard normal form and overflow-safe evaluation
//! of the exponentially weighted level terms used by the controllers.

use crate::error::{finite, CanardError, Result};

/// Largest exponent passed to `exp`.
pub const EXP_LIMIT: f64 = 700.0;

/// Beyond this value of `2y/ε` the first integral is reported as exactly zero.
pub const H_UNDERFLOW: f64 = 1490.0;

/// A point in the original phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for PhasePoint {
    fn from(s: [f64; 2]) -> Self {
        Self { x: s[0], y: s[1] }
    }
}

impl From<PhasePoint> for [f64; 2] {
    fn from(p: PhasePoint) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub eps: f64,
    pub alpha: f64,
}

impl SystemParams {
    pub fn new(eps: f64, alpha: f64) -> Result<Self> {
        finite("alpha", alpha)?;
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(CanardError::Domain(format!("eps must be >= 0, got {eps}")));
        }
        Ok(Self { eps, alpha })
    }

    /// Rejects ε = 0, which is only meaningful for layer analysis.
    pub fn require_positive(&self) -> Result<()> {
        if self.eps > 0.0 {
            Ok(())
        } else {
            Err(CanardError::Domain(format!("eps must be > 0, got {}", self.eps)))
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub x_star: f64,
    pub K: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { c1: 1.0, c2: 2.0, k1: 1.0, x_star: 0.0, K: 1.0 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("c1", self.c1), ("c2", self.c2), ("k1", self.k1), ("x_star", self.x_star), ("K", self.K)] {
            finite(n, v)?;
        }
        if self.c1 <= 0.0 {
            return Err(CanardError::Domain(format!("c1 must be > 0, got {}", self.c1)));
        }
        if self.k1 < 0.0 {
            return Err(CanardError::Domain(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if self.x_star.abs() >= 1.0 {
            return Err(CanardError::Domain(format!("|x_star| must be < 1, got {}", self.x_star)));
        }
        if self.K <= 0.0 {
            return Err(CanardError::Domain(format!("K must be > 0, got {}", self.K)));
        }
        Ok(())
    }
}

/// A level `h = h0·exp(−E)`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledLevel {
    pub h0: f64,
    pub E: f64,
}

impl ScaledLevel {
    /// The maximal canard, h = 0.
    pub const MAXIMAL: ScaledLevel = ScaledLevel { h0: 0.0, E: 0.0 };

    #[allow(non_snake_case)]
    pub fn new(h0: f64, E: f64) -> Result<Self> {
        finite("h0", h0)?;
        finite("E", E)?;
        if E < 0.0 {
            return Err(CanardError::Domain(format!("E must be >= 0, got {E}")));
        }
        if h0 > 0.0 && h0.ln() - E > 0.25f64.ln() + 1e-15 {
            return Err(CanardError::Domain(format!("level h0·exp(-E) = {h0}·exp(-{E}) exceeds 1/4")));
        }
        Ok(Self { h0, E })
    }

    /// Plain floating-point value; underflows to zero for large `E`.
    pub fn value(&self) -> f64 {
        if self.h0 == 0.0 {
            0.0
        } else {
            self.h0 * (-self.E).exp()
        }
    }

    /// `h·exp(a)` evaluated as `h0·exp(a − E)`.
    pub fn times_exp(&self, a: f64) -> Result<f64> {
        if self.h0 == 0.0 {
            return Ok(0.0);
        }
        Ok(self.h0 * checked_exp(a - self.E)?)
    }
}

/// `exp(a)` with a typed overflow error above [`EXP_LIMIT`] and a hard zero
/// below `−EXP_LIMIT`.
pub fn checked_exp(a: f64) -> Result<f64> {
    if a.is_nan() {
        return Err(CanardError::Domain("NaN exponent".into()));
    }
    if a > EXP_LIMIT {
        return Err(CanardError::Overflow { exponent: a });
    }
    if a < -EXP_LIMIT {
        return Ok(0.0);
    }
    Ok(a.exp())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CanardError::Domain(format!("{name} must be > 0, got {v}")))
    }
}

/// H(x, y, ε) = ½·exp(−2y/ε)·(y/ε − x²/ε + ½).
#[allow(non_snake_case)]
pub fn eval_H(p: PhasePoint, eps: f64) -> Result<f64> {
    finite("x", p.x)?;
    finite("y", p.y)?;
    positive("eps", eps)?;
    let a = 2.0 * p.y / eps;
    if a > H_UNDERFLOW {
        return Ok(0.0);
    }
    let bracket = (p.y - p.x * p.x) / eps + 0.5;
    if bracket == 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * checked_exp(-a)? * bracket)
}

/// H₂(x₂, y₂) = ½·exp(−2y₂)·(y₂ − x₂² + ½).
#[allow(non_snake_case)]
pub fn eval_H2(x2: f64, y2: f64) -> Result<f64> {
    finite("x2", x2)?;
    finite("y2", y2)?;
    if 2.0 * y2 > H_UNDERFLOW {
        return Ok(0.0);
    }
    let bracket = y2 - x2 * x2 + 0.5;
    if bracket == 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * checked_exp(-2.0 * y2)? * bracket)
}

/// H₁(x₁, ε₁) = ½·exp(−2/ε₁)·(1/ε₁ − x₁²/ε₁ + ½).
#[allow(non_snake_case)]
pub fn eval_H1(x1: f64, eps1: f64) -> Result<f64> {
    finite("x1", x1)?;
    positive("eps1", eps1)?;
    let a = 2.0 / eps1;
    if a > H_UNDERFLOW {
        return Ok(0.0);
    }
    let bracket = (1.0 - x1 * x1) / eps1 + 0.5;
    if bracket == 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * checked_exp(-a)? * bracket)
}

/// exp(c₂y/ε)·(H(x, y, ε) − h), never forming either exponential alone.
pub fn eval_level_term(p: PhasePoint, eps: f64, c2: f64, level: ScaledLevel) -> Result<f64> {
    finite("x", p.x)?;
    finite("y", p.y)?;
    finite("c2", c2)?;
    positive("eps", eps)?;
    let s = p.y / eps;
    let bracket = (p.y - p.x * p.x + 0.5 * eps) / (2.0 * eps);
    let head = if bracket == 0.0 { 0.0 } else { checked_exp((c2 - 2.0) * s)? * bracket };
    Ok(head - level.times_exp(c2 * s)?)
}

/// Chart-K₂ analogue: exp(c₂y₂)·(H₂(x₂, y₂) − h) for a plain level `h`.
pub fn eval_level_term_k2(x2: f64, y2: f64, c2: f64, h: f64) -> Result<f64> {
    finite("x2", x2)?;
    finite("y2", y2)?;
    finite("c2", c2)?;
    finite("h", h)?;
    let bracket = 0.5 * (y2 - x2 * x2 + 0.5);
    let head = if bracket == 0.0 { 0.0 } else { checked_exp((c2 - 2.0) * y2)? * bracket };
    let tail = if h == 0.0 { 0.0 } else { h * checked_exp(c2 * y2)? };
    Ok(head - tail)
}
