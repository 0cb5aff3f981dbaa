//! Feedback laws: fast- and slow-channel canard controllers, the chart-level
//! controllers of the blow-up analysis, and the composite controller for the
//! van der Pol oscillator.

mod bump;
mod chart;
mod composite;
mod fold;
mod manifold;

pub use bump::{bump_psi, smoothstep, NeighborhoodParams, Region};
pub use chart::{h1_branch, k1_vdp_mu, k2_mu, lyapunov_L2};
pub use composite::{composite_u, CompositeController, Weighting};
pub use fold::{c2_bound, fast_u, slow_u};
pub use manifold::{phi0, phi_first_order, vdp_slow_manifold_phi, ManifoldMethod, SlowManifold, FOLD_Y, REFINE_MIN_EPS};

/// Chart-K₁ domain: Σ₁ᵉⁿ = {ε₁ = δ₁}, Σ₁ᵉˣ = {r₁ = ρ₁}, entry rectangle
/// |x₁ − h₁ − x*| ≤ σ₁, r₁ ≤ ρ̃₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K1Domain {
    pub rho1: f64,
    pub delta1: f64,
    pub sigma1: f64,
    pub rho1_tilde: f64,
}

impl K1Domain {
    pub fn validate(&self) -> crate::Result<()> {
        let bound = 2.0 / 3f64.sqrt();
        let ok = self.rho1 > 0.0 && self.rho1 < bound && self.delta1 > 0.0 && self.sigma1 > 0.0 && self.rho1_tilde > 0.0 && self.rho1_tilde < self.rho1;
        if ok {
            Ok(())
        } else {
            Err(crate::CanardError::Domain(format!("invalid K1 domain {self:?}")))
        }
    }

    /// Whether ρ₁ is small enough for the stability of W₁,₊.
    pub fn stable_branch(&self) -> bool {
        self.rho1 < (3.0 - 3f64.sqrt()) / 3f64.sqrt()
    }
}

impl Default for K1Domain {
    fn default() -> Self {
        Self { rho1: 0.5, delta1: 0.2, sigma1: 0.1, rho1_tilde: 0.3 }
    }
}
