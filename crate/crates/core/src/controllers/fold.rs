use crate::error::{finite, CanardError, Result};
use crate::integrals::{eval_level_term, ControllerGains, PhasePoint, ScaledLevel, SystemParams};
use crate::models::{Channel, Term};

/// Fast-channel canard controller. With x̂ = x − α,
/// û = −2αx̂ − α² + c₁x̂√ε·exp(c₂y/ε)(H(x̂, y) − h), plus the compensation
/// −√ε(y − x̂²)φ̂ when a factorization φ̂ of the higher-order terms is given.
pub fn fast_u(p: PhasePoint, params: SystemParams, gains: ControllerGains, level: ScaledLevel, phi_hat: Option<&Term>) -> Result<f64> {
    params.require_positive()?;
    let SystemParams { eps, alpha } = params;
    let xh = p.x - alpha;
    let root = eps.sqrt();
    let mut u = -2.0 * alpha * xh - alpha * alpha;
    if xh != 0.0 {
        u += gains.c1 * xh * root * eval_level_term(PhasePoint::new(xh, p.y), eps, gains.c2, level)?;
    }
    if let Some(phi) = phi_hat {
        u -= root * (p.y - xh * xh) * phi(xh, p.y, eps, alpha);
    }
    finite("fast_u", u)
}

/// Slow-channel canard controller u = α + c₁(y − x²)ε^{−1/2}·exp(c₂y/ε)(H − h).
pub fn slow_u(p: PhasePoint, params: SystemParams, gains: ControllerGains, level: ScaledLevel) -> Result<f64> {
    params.require_positive()?;
    let SystemParams { eps, alpha } = params;
    let q = p.y - p.x * p.x;
    if q == 0.0 {
        return Ok(alpha);
    }
    finite("slow_u", alpha + gains.c1 * q / eps.sqrt() * eval_level_term(p, eps, gains.c2, level)?)
}

/// Upper bound on c₂ keeping the controller bounded along the canard:
/// 2 + κ(ε/y)ln(Kε/y) with κ = 3/2 (fast) or 5/2 (slow).
#[allow(non_snake_case)]
pub fn c2_bound(channel: Channel, eps: f64, y: f64, K: f64) -> Result<f64> {
    for (n, v) in [("eps", eps), ("y", y), ("K", K)] {
        finite(n, v)?;
        if v <= 0.0 {
            return Err(CanardError::Domain(format!("{n} must be > 0, got {v}")));
        }
    }
    let kappa = match channel {
        Channel::Fast => 1.5,
        Channel::Slow => 2.5,
    };
    let s = eps / y;
    Ok(2.0 + kappa * s * (K * s).ln())
}
