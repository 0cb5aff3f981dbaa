//! Repelling slow manifold x = φ(y, ε) of the van der Pol oscillator between
//! the canard point and the upper fold (2, 4/3).

use crate::error::{CanardError, Result};
use crate::sim::{integrate, DenseSegment, IntegratorConfig, OpenLoop, Termination, Watcher};

use super::bump::NeighborhoodParams;

pub const FOLD_Y: f64 = 4.0 / 3.0;

/// Below this ε the tabulated manifold is replaced by its first-order
/// expansion (the backward integration needs O(1/ε) steps).
pub const REFINE_MIN_EPS: f64 = 1e-5;

fn cubic(x: f64, y: f64) -> f64 {
    -y + x * x - x * x * x / 3.0
}

/// Root of −y + x² − x³/3 = 0 with 0 < x < 2, for y ∈ [0, 4/3].
pub fn phi0(y: f64) -> Result<f64> {
    if !(0.0..=FOLD_Y).contains(&y) {
        return Err(CanardError::Domain(format!("critical manifold branch 0 < x < 2 has no point at y = {y}")));
    }
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    if cubic(lo, y) > 0.0 || cubic(hi, y) < 0.0 {
        return Err(CanardError::NonConvergent(format!("root bracket failed at y = {y}")));
    }
    while hi - lo > 1e-13 {
        let m = 0.5 * (lo + hi);
        if cubic(m, y) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// φ₀ + εφ₀/(2φ₀ − φ₀²)².
pub fn phi_first_order(y: f64, eps: f64) -> Result<f64> {
    let p = phi0(y)?;
    let d = 2.0 * p - p * p;
    if d == 0.0 {
        return Err(CanardError::Singular(format!("expansion singular at y = {y}")));
    }
    Ok(p + eps * p / (d * d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldMethod {
    /// First-order invariance expansion.
    FirstOrder,
    /// Backward integration of dx/dy = f(x, y)/(εx) from the upper fold.
    Refined,
}

/// Graph x = φ(y, ε) of the repelling slow manifold on `[y_lo, 4/3]`.
#[derive(Debug, Clone)]
pub struct SlowManifold {
    eps: f64,
    y_lo: f64,
    method: ManifoldMethod,
    table: Vec<DenseSegment<2>>,
}

impl SlowManifold {
    /// Refined where affordable, first order otherwise.
    pub fn new(eps: f64, y_lo: f64) -> Result<Self> {
        if eps >= REFINE_MIN_EPS {
            Self::refined(eps, y_lo)
        } else {
            Self::first_order(eps, y_lo)
        }
    }

    pub fn first_order(eps: f64, y_lo: f64) -> Result<Self> {
        Self::check(eps, y_lo)?;
        Ok(Self { eps, y_lo, method: ManifoldMethod::FirstOrder, table: Vec::new() })
    }

    pub fn refined(eps: f64, y_lo: f64) -> Result<Self> {
        Self::check(eps, y_lo)?;
        if eps == 0.0 {
            return Self::first_order(eps, y_lo);
        }
        // s = 4/3 − y runs forward; state (x, y)
        let sys = OpenLoop(move |s: &[f64; 2]| Ok([-cubic(s[0], s[1]) / (eps * s[0]), -1.0]));
        let cfg = IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: 0.02,
            min_step: 1e-14,
            max_steps: 20_000_000,
            dense_output: true,
        };
        let stop = [Watcher::section(crate::sim::Direction::Down, |s: &[f64; 2]| s[0] - 1e-3).terminal()];
        let tr = integrate(&sys, [2.0, FOLD_Y], (0.0, FOLD_Y - y_lo), &cfg, &stop)?;
        match tr.termination {
            Termination::Completed => Ok(Self { eps, y_lo, method: ManifoldMethod::Refined, table: tr.dense }),
            Termination::Stopped { .. } => Err(CanardError::Domain(format!(
                "slow manifold for eps = {eps} reaches x = 0 at y = {}, above y_lo = {y_lo}",
                tr.final_state()[1]
            ))),
            _ => Err(tr.failure().unwrap_or_else(|| CanardError::NonConvergent("slow manifold integration".into()))),
        }
    }

    /// Manifold on the domain of a neighbourhood configuration.
    pub fn for_neighborhoods(eps: f64, nbhd: &NeighborhoodParams) -> Result<Self> {
        Self::new(eps, nbhd.y_min)
    }

    fn check(eps: f64, y_lo: f64) -> Result<()> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(CanardError::Domain(format!("eps must be >= 0, got {eps}")));
        }
        if !(y_lo > 0.0 && y_lo < FOLD_Y) {
            return Err(CanardError::Domain(format!("lower end y_lo = {y_lo} outside (0, 4/3)")));
        }
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn method(&self) -> ManifoldMethod {
        self.method
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.y_lo, FOLD_Y)
    }

    pub fn phi(&self, y: f64) -> Result<f64> {
        if !(y >= self.y_lo && y <= FOLD_Y) {
            return Err(CanardError::Domain(format!("y = {y} outside the manifold domain [{}, 4/3]", self.y_lo)));
        }
        match self.method {
            ManifoldMethod::FirstOrder => phi_first_order(y, self.eps),
            ManifoldMethod::Refined => {
                let s = (FOLD_Y - y).max(0.0);
                let i = self.table.partition_point(|seg| seg.t1() < s).min(self.table.len() - 1);
                Ok(self.table[i].eval(s)[0])
            }
        }
    }

    /// Chart-K₁ graph φ₁(r₁, ε₁) = φ(r₁², ε)/r₁; requires r₁²ε₁ = ε.
    pub fn phi_chart(&self, r1: f64, eps1: f64) -> Result<f64> {
        if !(r1 > 0.0) {
            return Err(CanardError::Domain(format!("phi1 needs r1 > 0, got {r1}")));
        }
        let eps = r1 * r1 * eps1;
        if (eps - self.eps).abs() > 1e-9 * self.eps.max(1e-300) {
            return Err(CanardError::Domain(format!("r1²·eps1 = {eps} does not match the manifold's eps = {}", self.eps)));
        }
        Ok(self.phi(r1 * r1)? / r1)
    }
}

/// φ(y, ε) on the neighbourhood domain `[y_min, y_h]`.
pub fn vdp_slow_manifold_phi(y: f64, eps: f64, nbhd: &NeighborhoodParams) -> Result<f64> {
    if !(y >= nbhd.y_min && y <= nbhd.y_h) {
        return Err(CanardError::Domain(format!("y = {y} outside [y_min, y_h] = [{}, {}]", nbhd.y_min, nbhd.y_h)));
    }
    if eps == 0.0 {
        return phi0(y);
    }
    SlowManifold::for_neighborhoods(eps, nbhd)?.phi(y)
}
