//! Planar vector fields: the canard normal form with pluggable higher-order
//! terms, and the van der Pol oscillator.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{finite, CanardError, Result};
use crate::integrals::{PhasePoint, SystemParams};

/// A scalar term of the normal form, called as `(x, y, eps, alpha)`.
pub type Term = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;

/// Higher-order terms f̃, g̃ of the fold normal form. When `phi_hat` is
/// present it satisfies `g̃(x̂ + α, y, ε, α) = x̂·φ̂(x̂, y, ε, α)`.
#[derive(Clone)]
pub struct HigherOrderTerms {
    pub f_tilde: Term,
    pub g_tilde: Term,
    pub phi_hat: Option<Term>,
    name: &'static str,
}

impl fmt::Debug for HigherOrderTerms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HigherOrderTerms")
            .field("preset", &self.name)
            .field("phi_hat", &self.phi_hat.is_some())
            .finish()
    }
}

impl HigherOrderTerms {
    pub fn new(f_tilde: Term, g_tilde: Term, phi_hat: Option<Term>) -> Self {
        Self { f_tilde, g_tilde, phi_hat, name: "custom" }
    }

    pub fn zero() -> Self {
        Self {
            f_tilde: Arc::new(|_, _, _, _| 0.0),
            g_tilde: Arc::new(|_, _, _, _| 0.0),
            phi_hat: Some(Arc::new(|_, _, _, _| 0.0)),
            name: "zero",
        }
    }

    /// g̃ = k·x̂·(y − x̂²) with φ̂ = k·(y − x̂²). With α = 0 and k = 100 this is
    /// the coupling g = 100x(y − x²).
    pub fn slow_coupling(k: f64) -> Self {
        Self {
            f_tilde: Arc::new(|_, _, _, _| 0.0),
            g_tilde: Arc::new(move |x, y, _, a| {
                let xh = x - a;
                k * xh * (y - xh * xh)
            }),
            phi_hat: Some(Arc::new(move |xh, y, _, _| k * (y - xh * xh))),
            name: "slow_coupling",
        }
    }

    /// The original-coordinate counterpart of the chart term φ₂ = y₂ − x₂²:
    /// ĝ = ε·g₂(x̂/√ε, y/ε) = x̂(y − x̂²)/√ε.
    pub fn rescaled_parabola() -> Self {
        fn inv_root(eps: f64) -> f64 {
            if eps > 0.0 {
                1.0 / eps.sqrt()
            } else {
                0.0
            }
        }
        Self {
            f_tilde: Arc::new(|_, _, _, _| 0.0),
            g_tilde: Arc::new(|x, y, e, a| {
                let xh = x - a;
                xh * (y - xh * xh) * inv_root(e)
            }),
            phi_hat: Some(Arc::new(|xh, y, e, _| (y - xh * xh) * inv_root(e))),
            name: "rescaled_parabola",
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Self::zero()),
            "slow_coupling" => Ok(Self::slow_coupling(100.0)),
            "rescaled_parabola" => Ok(Self::rescaled_parabola()),
            other => Err(CanardError::Usage(format!("unknown higher-order preset '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// `g̃(x̂ + α, ·) − x̂·φ̂(x̂, ·)`; `None` without a factorization.
    pub fn factorization_defect(&self, xh: f64, y: f64, eps: f64, alpha: f64) -> Option<f64> {
        let phi = self.phi_hat.as_ref()?;
        Some((self.g_tilde)(xh + alpha, y, eps, alpha) - xh * phi(xh, y, eps, alpha))
    }
}

impl Default for HigherOrderTerms {
    fn default() -> Self {
        Self::zero()
    }
}

/// Phase-plane velocity in fast time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub dx: f64,
    pub dy: f64,
}

impl From<Derivative> for [f64; 2] {
    fn from(d: Derivative) -> Self {
        [d.dx, d.dy]
    }
}

/// Where the control input enters the normal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Fast,
    Slow,
}

impl FromStr for Channel {
    type Err = CanardError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Channel::Fast),
            "slow" => Ok(Channel::Slow),
            other => Err(CanardError::Usage(format!("unknown channel '{other}'"))),
        }
    }
}

/// x' = −y + x² + f̃ + u_fast, y' = ε(x − α + g̃ + u_slow).
pub fn fold_rhs(p: PhasePoint, params: SystemParams, hot: &HigherOrderTerms, u: f64, channel: Channel) -> Result<Derivative> {
    finite("u", u)?;
    let SystemParams { eps, alpha } = params;
    let f = (hot.f_tilde)(p.x, p.y, eps, alpha);
    let g = (hot.g_tilde)(p.x, p.y, eps, alpha);
    let (uf, us) = match channel {
        Channel::Fast => (u, 0.0),
        Channel::Slow => (0.0, u),
    };
    let d = Derivative { dx: -p.y + p.x * p.x + f + uf, dy: eps * (p.x - alpha + g + us) };
    finite("dx", d.dx)?;
    finite("dy", d.dy)?;
    Ok(d)
}

/// x' = −y + x² − x³/3 + u, y' = εx.
pub fn vdp_rhs(p: PhasePoint, eps: f64, u: f64) -> Result<Derivative> {
    finite("x", p.x)?;
    finite("y", p.y)?;
    finite("u", u)?;
    let x = p.x;
    Ok(Derivative { dx: -p.y + x * x - x * x * x / 3.0 + u, dy: eps * x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    Fold,
    Vdp,
}

impl FromStr for ModelId {
    type Err = CanardError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold" => Ok(ModelId::Fold),
            "vdp" => Ok(ModelId::Vdp),
            other => Err(CanardError::Usage(format!("unknown model '{other}'"))),
        }
    }
}

/// Fast field at ε = 0 and u = 0 (zero higher-order terms); vanishes exactly
/// on the critical manifold.
pub fn critical_residual(model: ModelId, p: PhasePoint) -> f64 {
    match model {
        ModelId::Fold => -p.y + p.x * p.x,
        ModelId::Vdp => -p.y + p.x * p.x - p.x.powi(3) / 3.0,
    }
}

/// ∂f/∂x at ε = 0.
pub fn fast_jacobian(model: ModelId, p: PhasePoint) -> f64 {
    match model {
        ModelId::Fold => 2.0 * p.x,
        ModelId::Vdp => 2.0 * p.x - p.x * p.x,
    }
}
