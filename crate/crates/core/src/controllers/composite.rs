use std::str::FromStr;
use std::sync::Arc;

use crate::error::{finite, CanardError, Result};
use crate::integrals::{ControllerGains, PhasePoint};

use super::bump::{bump_psi, NeighborhoodParams, Region};
use super::manifold::SlowManifold;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// u = ½ψ₁u₁ + ½ψ₂u₂.
    HalfWeights,
    /// Partition of unity {ψ₁, ψ₂, (1 − ψ₁)(1 − ψ₂)} with a zero open-loop
    /// member: u = (ψ₁u₁ + ψ₂u₂)/(1 + ψ₁ψ₂).
    Normalized,
}

impl FromStr for Weighting {
    type Err = CanardError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" | "paper_literal" => Ok(Weighting::HalfWeights),
            "normalized" => Ok(Weighting::Normalized),
            other => Err(CanardError::Usage(format!("unknown weighting '{other}'"))),
        }
    }
}

/// Canard-cycle controller for the van der Pol oscillator blending the
/// repelling-branch controller u₁ (active on N₁) with the canard-point
/// controller u₂ (active on N₂).
#[derive(Debug, Clone)]
pub struct CompositeController {
    pub eps: f64,
    pub gains: ControllerGains,
    pub nbhd: NeighborhoodParams,
    pub weighting: Weighting,
    manifold: Arc<SlowManifold>,
}

impl CompositeController {
    pub fn new(eps: f64, gains: ControllerGains, nbhd: NeighborhoodParams, weighting: Weighting) -> Result<Self> {
        let manifold = Arc::new(SlowManifold::for_neighborhoods(eps, &nbhd)?);
        Self::with_manifold(gains, nbhd, weighting, manifold)
    }

    /// Reuses a manifold table, e.g. when only x* or y_h change.
    pub fn with_manifold(gains: ControllerGains, nbhd: NeighborhoodParams, weighting: Weighting, manifold: Arc<SlowManifold>) -> Result<Self> {
        let eps = manifold.eps();
        if !(eps > 0.0) {
            return Err(CanardError::Domain(format!("eps must be > 0, got {eps}")));
        }
        gains.validate()?;
        nbhd.validate()?;
        if manifold.domain().0 > nbhd.y_min {
            return Err(CanardError::Domain("slow manifold table does not reach y_min".into()));
        }
        Ok(Self { eps, gains, nbhd, weighting, manifold })
    }

    pub fn manifold(&self) -> &Arc<SlowManifold> {
        &self.manifold
    }

    /// Blow-down of the chart-K₁ controller: u₁ = −F₀ − F_{x*} + v₁.
    pub fn u1(&self, p: PhasePoint) -> Result<f64> {
        let PhasePoint { x, y } = p;
        if y < self.nbhd.y_min {
            return Err(CanardError::Domain(format!("u1 evaluated below y_min at y = {y}")));
        }
        let eps = self.eps;
        let ph = self.manifold.phi(y)?;
        if ph == 0.0 {
            return Err(CanardError::Singular(format!("phi vanishes at y = {y}")));
        }
        let sy = y.sqrt();
        let xs = self.gains.x_star * sy;
        let f = |z: f64| -y + z * z - z * z * eps / (2.0 * y) - z * z * z / 3.0;
        let v1 = (2.0 * ph + xs) / ph * f(ph) - (eps * ph / y + ph * ph + self.gains.k1 * sy) * (x - ph - xs);
        finite("u1", -f(x) - f(x - xs) + v1)
    }

    /// u₂ = c₁xε^{−1/2}(y − x² + ε/2).
    pub fn u2(&self, p: PhasePoint) -> f64 {
        self.gains.c1 * p.x / self.eps.sqrt() * (p.y - p.x * p.x + 0.5 * self.eps)
    }

    pub fn weights(&self, p: PhasePoint) -> (f64, f64) {
        (bump_psi(p, Region::N1, &self.nbhd), bump_psi(p, Region::N2, &self.nbhd))
    }

    pub fn u(&self, p: PhasePoint) -> Result<f64> {
        let (a, b) = self.weights(p);
        let ua = if a > 0.0 { a * self.u1(p)? } else { 0.0 };
        let ub = if b > 0.0 { b * self.u2(p) } else { 0.0 };
        Ok(match self.weighting {
            Weighting::HalfWeights => 0.5 * (ua + ub),
            Weighting::Normalized => (ua + ub) / (1.0 + a * b),
        })
    }
}

/// One-shot evaluation; builds the slow-manifold table on every call.
pub fn composite_u(p: PhasePoint, eps: f64, gains: ControllerGains, nbhd: NeighborhoodParams, weighting: Weighting) -> Result<f64> {
    CompositeController::new(eps, gains, nbhd, weighting)?.u(p)
}
