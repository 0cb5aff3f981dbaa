//! Ready-made closed-loop systems for the integrator.

use std::sync::Arc;

use crate::blowup::{k1_vdp_field, k2_field, ChartPointK1, ChartPointK2, ChartTerm};
use crate::controllers::{fast_u, k1_vdp_mu, k2_mu, slow_u, CompositeController, SlowManifold};
use crate::error::Result;
use crate::integrals::{ControllerGains, PhasePoint, ScaledLevel, SystemParams};
use crate::models::{fold_rhs, vdp_rhs, Channel, HigherOrderTerms};
use crate::sim::ControlledSystem;

/// Fold normal form under the fast- or slow-channel canard controller.
#[derive(Debug, Clone)]
pub struct FoldLoop {
    pub params: SystemParams,
    pub gains: ControllerGains,
    pub level: ScaledLevel,
    pub hot: HigherOrderTerms,
    pub channel: Channel,
    /// Add the φ̂ compensation of the fast controller.
    pub compensate: bool,
    /// Apply no control at all.
    pub open: bool,
}

impl FoldLoop {
    pub fn new(params: SystemParams, gains: ControllerGains, level: ScaledLevel, channel: Channel) -> Self {
        Self { params, gains, level, hot: HigherOrderTerms::zero(), channel, compensate: false, open: false }
    }
}

impl ControlledSystem<2> for FoldLoop {
    fn control(&self, s: &[f64; 2]) -> Result<f64> {
        if self.open {
            return Ok(0.0);
        }
        let p = PhasePoint::from(*s);
        match self.channel {
            Channel::Fast => {
                let phi = if self.compensate { self.hot.phi_hat.as_ref() } else { None };
                fast_u(p, self.params, self.gains, self.level, phi)
            }
            Channel::Slow => slow_u(p, self.params, self.gains, self.level),
        }
    }

    fn field(&self, s: &[f64; 2], u: f64) -> Result<[f64; 2]> {
        Ok(fold_rhs(PhasePoint::from(*s), self.params, &self.hot, u, self.channel)?.into())
    }
}

/// Van der Pol oscillator under the composite controller (open loop without one).
#[derive(Debug, Clone)]
pub struct VdpLoop {
    pub eps: f64,
    pub controller: Option<CompositeController>,
}

impl ControlledSystem<2> for VdpLoop {
    fn control(&self, s: &[f64; 2]) -> Result<f64> {
        match &self.controller {
            Some(c) => c.u(PhasePoint::from(*s)),
            None => Ok(0.0),
        }
    }

    fn field(&self, s: &[f64; 2], u: f64) -> Result<[f64; 2]> {
        Ok(vdp_rhs(PhasePoint::from(*s), self.eps, u)?.into())
    }
}

/// Chart K₂ under the Lyapunov controller; state `[x2, y2]`.
#[derive(Clone)]
pub struct K2Loop {
    pub r2: f64,
    pub alpha2: f64,
    pub gains: ControllerGains,
    pub h: f64,
    pub g2: Option<ChartTerm>,
    /// Compensation term φ₂; `None` leaves g₂ uncompensated.
    pub phi2: Option<ChartTerm>,
}

impl std::fmt::Debug for K2Loop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("K2Loop")
            .field("r2", &self.r2)
            .field("alpha2", &self.alpha2)
            .field("gains", &self.gains)
            .field("h", &self.h)
            .field("g2", &self.g2.is_some())
            .field("phi2", &self.phi2.is_some())
            .finish()
    }
}

impl K2Loop {
    pub fn point(&self, s: &[f64; 2]) -> ChartPointK2 {
        ChartPointK2 { r2: self.r2, x2: s[0], y2: s[1], alpha2: self.alpha2, mu2: 0.0 }
    }
}

impl ControlledSystem<2> for K2Loop {
    fn control(&self, s: &[f64; 2]) -> Result<f64> {
        k2_mu(self.point(s), self.gains, self.h, self.phi2.as_ref())
    }

    fn field(&self, s: &[f64; 2], mu: f64) -> Result<[f64; 2]> {
        let d = k2_field(self.point(s), self.g2.as_ref(), mu);
        Ok([d.dx2, d.dy2])
    }
}

/// Van der Pol chart K₁ under μ₁; state `[r1, eps1, x1]`. The manifold table
/// must belong to ε = r₁²ε₁ of the trajectory, which the flow preserves.
#[derive(Debug, Clone)]
pub struct K1VdpLoop {
    pub gains: ControllerGains,
    pub manifold: Arc<SlowManifold>,
}

impl ControlledSystem<3> for K1VdpLoop {
    fn control(&self, s: &[f64; 3]) -> Result<f64> {
        let p = ChartPointK1 { r1: s[0], eps1: s[1], x1: s[2], alpha1: 0.0, mu1: 0.0 };
        let m = &self.manifold;
        // r₁²ε₁ drifts only at round-off level; evaluate at the table's ε
        k1_vdp_mu(p, self.gains, &|r, _| Ok(m.phi(r * r)? / r))
    }

    fn field(&self, s: &[f64; 3], mu: f64) -> Result<[f64; 3]> {
        let d = k1_vdp_field(ChartPointK1 { r1: s[0], eps1: s[1], x1: s[2], alpha1: 0.0, mu1: 0.0 }, mu);
        Ok([d.dr1, d.deps1, d.dx1])
    }
}
