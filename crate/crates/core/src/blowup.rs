//! Blow-up charts K₁ (directional, ȳ = 1) and K₂ (rescaling, ε̄ = 1) of the
//! canard point, their transition maps, the blown-up vector fields and the
//! blow-up compatibility check of a closed-loop layer equation.

use std::sync::Arc;

use crate::error::{finite, CanardError, Result};
use crate::integrals::{PhasePoint, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPointK1 {
    pub r1: f64,
    pub x1: f64,
    pub eps1: f64,
    pub alpha1: f64,
    pub mu1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPointK2 {
    pub r2: f64,
    pub x2: f64,
    pub y2: f64,
    pub alpha2: f64,
    pub mu2: f64,
}

impl ChartPointK2 {
    /// A point of the entry-level chart with r₂ = 0 and no control.
    pub fn at(x2: f64, y2: f64, alpha2: f64) -> Self {
        Self { r2: 0.0, x2, y2, alpha2, mu2: 0.0 }
    }
}

/// A chart term of K₂, called as `(r2, x2, y2, alpha2)`.
pub type ChartTerm = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDerivativeK2 {
    pub dx2: f64,
    pub dy2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDerivativeK1 {
    pub dr1: f64,
    pub deps1: f64,
    pub dx1: f64,
}

/// (x, y, ε, α, u) ↦ (r₂, x₂, y₂, α₂, μ₂) with r₂ = √ε.
pub fn k2_lift(p: PhasePoint, params: SystemParams, u: f64) -> Result<ChartPointK2> {
    params.require_positive()?;
    let r = params.eps.sqrt();
    let xh = p.x - params.alpha;
    Ok(ChartPointK2 { r2: r, x2: xh / r, y2: p.y / params.eps, alpha2: params.alpha / r, mu2: u / params.eps })
}

/// Inverse of [`k2_lift`]: original point, parameters and control value.
pub fn k2_blowdown(q: ChartPointK2) -> Result<(PhasePoint, SystemParams, f64)> {
    if !(q.r2 > 0.0) {
        return Err(CanardError::Domain(format!("blow-down from K2 needs r2 > 0, got {}", q.r2)));
    }
    let r = q.r2;
    let eps = r * r;
    let alpha = r * q.alpha2;
    Ok((PhasePoint::new(r * q.x2 + alpha, eps * q.y2), SystemParams { eps, alpha }, eps * q.mu2))
}

/// (x, y, ε, α, u) ↦ (r₁, x₁, ε₁, α₁, μ₁) with r₁ = √y, defined for y > 0.
pub fn k1_lift(p: PhasePoint, params: SystemParams, u: f64) -> Result<ChartPointK1> {
    if !(p.y > 0.0) {
        return Err(CanardError::Domain(format!("chart K1 needs y > 0, got {}", p.y)));
    }
    let r = p.y.sqrt();
    let xh = p.x - params.alpha;
    Ok(ChartPointK1 { r1: r, x1: xh / r, eps1: params.eps / p.y, alpha1: params.alpha / r, mu1: u / p.y })
}

pub fn k1_blowdown(q: ChartPointK1) -> Result<(PhasePoint, SystemParams, f64)> {
    if !(q.r1 > 0.0) {
        return Err(CanardError::Domain(format!("blow-down from K1 needs r1 > 0, got {}", q.r1)));
    }
    let r = q.r1;
    let y = r * r;
    let alpha = r * q.alpha1;
    Ok((PhasePoint::new(r * q.x1 + alpha, y), SystemParams { eps: y * q.eps1, alpha }, y * q.mu1))
}

/// Transition K₁ → K₂.
pub fn kappa12(p: ChartPointK1) -> Result<ChartPointK2> {
    if !(p.eps1 > 0.0) {
        return Err(CanardError::Domain(format!("kappa12 needs eps1 > 0, got {}", p.eps1)));
    }
    let s = p.eps1.sqrt();
    Ok(ChartPointK2 { r2: p.r1 * s, x2: p.x1 / s, y2: 1.0 / p.eps1, alpha2: p.alpha1 / s, mu2: p.mu1 / p.eps1 })
}

/// Transition K₂ → K₁.
pub fn kappa21(p: ChartPointK2) -> Result<ChartPointK1> {
    if !(p.y2 > 0.0) {
        return Err(CanardError::Domain(format!("kappa21 needs y2 > 0, got {}", p.y2)));
    }
    let s = p.y2.sqrt();
    Ok(ChartPointK1 { r1: p.r2 * s, x1: p.x2 / s, eps1: 1.0 / p.y2, alpha1: p.alpha2 / s, mu1: p.mu2 / p.y2 })
}

/// Desingularized K₂ field: x₂' = −y₂ + (x₂ + α₂)² + μ₂, y₂' = x₂ + r₂g₂.
pub fn k2_field(p: ChartPointK2, g2: Option<&ChartTerm>, mu2: f64) -> ChartDerivativeK2 {
    let g = match g2 {
        Some(g) if p.r2 != 0.0 => g(p.r2, p.x2, p.y2, p.alpha2),
        _ => 0.0,
    };
    let s = p.x2 + p.alpha2;
    ChartDerivativeK2 { dx2: -p.y2 + s * s + mu2, dy2: p.x2 + p.r2 * g }
}

/// The chart term g₂ = x₂(y₂ − x₂²), i.e. φ₂ = y₂ − x₂².
pub fn parabola_g2() -> (ChartTerm, ChartTerm) {
    (Arc::new(|_, x, y, _| x * (y - x * x)), Arc::new(|_, x, y, _| y - x * x))
}

/// f₁(r₁, ε₁, x₁) = −1 + x₁² − ½x₁²ε₁ − ⅓r₁x₁³, the x₁-part of the open-loop
/// van der Pol field in K₁.
pub fn k1_vdp_f1(r1: f64, eps1: f64, x1: f64) -> f64 {
    -1.0 + x1 * x1 - 0.5 * x1 * x1 * eps1 - r1 * x1.powi(3) / 3.0
}

/// Van der Pol field in chart K₁.
pub fn k1_vdp_field(p: ChartPointK1, mu1: f64) -> ChartDerivativeK1 {
    ChartDerivativeK1 {
        dr1: 0.5 * p.r1 * p.eps1 * p.x1,
        deps1: -p.eps1 * p.eps1 * p.x1,
        dx1: k1_vdp_f1(p.r1, p.eps1, p.x1) + mu1,
    }
}

/// û = ε·μ₂.
pub fn blowdown_controller(mu2: f64, eps: f64) -> Result<f64> {
    finite("mu2", mu2)?;
    if !(eps > 0.0) {
        return Err(CanardError::Domain(format!("eps must be > 0, got {eps}")));
    }
    Ok(eps * mu2)
}

/// Finite-difference partials of a layer field at the origin, extrapolated
/// to ε → 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GermReport {
    pub f0: f64,
    pub fx: f64,
    pub fxx: f64,
    pub fy: f64,
    pub passes: bool,
}

/// Tolerance for the fold conditions after extrapolation.
pub const GERM_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-4;

type Partials = [f64; 4];

fn partials(f: &dyn Fn(f64, f64, f64) -> Result<f64>, eps: f64) -> Result<Partials> {
    let h = FD_STEP;
    let fx_at = |x: f64| f(x, 0.0, eps);
    let fy_at = |y: f64| f(0.0, y, eps);
    let (xm2, xm1, x0, xp1, xp2) = (fx_at(-2.0 * h)?, fx_at(-h)?, fx_at(0.0)?, fx_at(h)?, fx_at(2.0 * h)?);
    let (ym2, ym1, yp1, yp2) = (fy_at(-2.0 * h)?, fy_at(-h)?, fy_at(h)?, fy_at(2.0 * h)?);
    let fx = (-xp2 + 8.0 * xp1 - 8.0 * xm1 + xm2) / (12.0 * h);
    let fxx = (-xp2 + 16.0 * xp1 - 30.0 * x0 + 16.0 * xm1 - xm2) / (12.0 * h * h);
    let fy = (-yp2 + 8.0 * yp1 - 8.0 * ym1 + ym2) / (12.0 * h);
    let out = [x0, fx, fxx, fy];
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(CanardError::NonConvergent(format!("non-finite partials {out:?} at eps = {eps}")))
    }
}

/// Value at r = 0 of the quadratic through three samples `(r_i, v_i)`.
fn quadratic_at_zero(r: [f64; 3], v: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= r[j] / (r[j] - r[i]);
            }
        }
        acc += w * v[i];
    }
    acc
}

/// Checks that the closed-loop layer field `f(x, y, ε)` keeps the fold germ
/// of the open loop at the origin. Partials are extrapolated to ε → 0 with a
/// quadratic in r = √ε over each consecutive triple of the sequence.
pub fn germ_check(layer_field: &dyn Fn(f64, f64, f64) -> Result<f64>, eps_sequence: &[f64]) -> Result<GermReport> {
    if eps_sequence.len() < 3 {
        return Err(CanardError::Usage("germ_check needs at least three eps values".into()));
    }
    if eps_sequence.iter().any(|e| !(*e > 0.0)) || eps_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CanardError::Usage("eps sequence must be positive and strictly decreasing".into()));
    }
    let samples = eps_sequence.iter().map(|&e| partials(layer_field, e)).collect::<Result<Vec<_>>>()?;
    let r: Vec<f64> = eps_sequence.iter().map(|e| e.sqrt()).collect();
    let mut estimates: Vec<Partials> = Vec::new();
    for j in 0..samples.len() - 2 {
        let mut est = [0.0; 4];
        for (k, e) in est.iter_mut().enumerate() {
            *e = quadratic_at_zero([r[j], r[j + 1], r[j + 2]], [samples[j][k], samples[j + 1][k], samples[j + 2][k]]);
        }
        estimates.push(est);
    }
    if estimates.len() >= 3 {
        for k in 0..4 {
            let n = estimates.len();
            let d_last = (estimates[n - 1][k] - estimates[n - 2][k]).abs();
            let d_prev = (estimates[n - 2][k] - estimates[n - 3][k]).abs();
            let scale = GERM_TOL * estimates[n - 1][k].abs().max(1.0);
            if d_last > scale && d_last > d_prev {
                return Err(CanardError::NonConvergent(format!(
                    "extrapolated partial {k} diverges: successive changes {d_prev:e} then {d_last:e}"
                )));
            }
        }
    }
    let [f0, fx, fxx, fy] = *estimates.last().expect("at least one estimate");
    let passes = f0.abs() < GERM_TOL && fx.abs() < GERM_TOL && fxx.abs() > GERM_TOL && fy.abs() > GERM_TOL;
    Ok(GermReport { f0, fx, fxx, fy, passes })
}

/// ε values used by default: 1e−4 down to 1e−8.
pub fn default_germ_eps() -> Vec<f64> {
    vec![1e-4, 1e-5, 1e-6, 1e-7, 1e-8]
}
