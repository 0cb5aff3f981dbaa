use crate::error::{CanardError, Result};
use crate::integrals::PhasePoint;

/// Supports of the two localized controllers: N₁ around the repelling branch
/// up to the canard height y_h, N₂ around the parabola near the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodParams {
    pub beta1: f64,
    pub beta2: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_h: f64,
    /// Width of each transition band as a fraction of the constraint's scale.
    pub inner_margin: f64,
}

impl NeighborhoodParams {
    pub fn defaults(eps: f64, y_h: f64) -> Self {
        Self { beta1: 0.15, beta2: 0.15, x_min: 0.3, x_max: 0.3, y_min: 2.0 * eps, y_h, inner_margin: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.beta1, self.beta2, self.x_min, self.x_max, self.y_min, self.y_h];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(CanardError::Domain(format!("neighbourhood constants must be positive: {self:?}")));
        }
        if self.y_min >= self.y_h {
            return Err(CanardError::Domain(format!("y_min = {} must be below y_h = {}", self.y_min, self.y_h)));
        }
        if self.y_h > 4.0 / 3.0 {
            return Err(CanardError::Domain(format!("y_h = {} lies above the upper fold", self.y_h)));
        }
        if !(self.inner_margin > 0.0 && self.inner_margin < 1.0) {
            return Err(CanardError::Domain(format!("inner_margin = {} outside (0, 1)", self.inner_margin)));
        }
        let w = self.inner_margin;
        if w * self.beta1 > 1.0 || w * self.beta2 > 0.5 * (self.x_min + self.x_max) {
            return Err(CanardError::Domain("transition bands wider than their intervals".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    N1,
    N2,
}

/// 6t⁵ − 15t⁴ + 10t³ on [0, 1], clamped outside.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// 0 outside (lo, hi), 1 at distance ≥ width from both ends.
fn gate(g: f64, lo: f64, hi: f64, width: f64) -> f64 {
    if g <= lo || g >= hi {
        return 0.0;
    }
    smoothstep((g - lo).min(hi - g) / width)
}

/// C² bump equal to 1 on the shrunken region and 0 outside the support. Band
/// constraints |·| < β and the x-ranges use a transition of width
/// `inner_margin·β`; the y-range of N₁ uses `inner_margin` times its half-length.
pub fn bump_psi(p: PhasePoint, region: Region, nbhd: &NeighborhoodParams) -> f64 {
    let PhasePoint { x, y } = p;
    let m = nbhd.inner_margin;
    match region {
        Region::N1 => {
            let b = nbhd.beta1;
            let band = -y + x * x - x * x * x / 3.0;
            let g = gate(band, -b, b, m * b);
            if g == 0.0 {
                return 0.0;
            }
            g * gate(x, 0.0, 2.0, m * b) * gate(y, nbhd.y_min, nbhd.y_h, 0.5 * m * (nbhd.y_h - nbhd.y_min))
        }
        Region::N2 => {
            let b = nbhd.beta2;
            gate(-y + x * x, -b, b, m * b) * gate(x, -nbhd.x_min, nbhd.x_max, m * b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert_eq!(smoothstep(-3.0), 0.0);
        assert_eq!(smoothstep(7.0), 1.0);
    }

    #[test]
    fn examples() {
        let nb = NeighborhoodParams::defaults(0.01, 1.25);
        assert_eq!(bump_psi(PhasePoint::new(0.0, 0.0), Region::N2, &nb), 1.0);
        assert_eq!(bump_psi(PhasePoint::new(10.0, 0.0), Region::N1, &nb), 0.0);
        assert_eq!(bump_psi(PhasePoint::new(10.0, 0.0), Region::N2, &nb), 0.0);
        // x-gate of N₂ alone is active: midpoint of its band at x = 0.3 − 0.0375
        let mid = nb.x_max - 0.5 * nb.inner_margin * nb.beta2;
        assert!((bump_psi(PhasePoint::new(mid, mid * mid), Region::N2, &nb) - 0.5).abs() < 1e-12);
        // on the repelling branch at mid height
        let y = 0.6;
        let x = super::super::manifold::phi0(y).unwrap();
        assert_eq!(bump_psi(PhasePoint::new(x, y), Region::N1, &nb), 1.0);
        assert_eq!(bump_psi(PhasePoint::new(x, nb.y_h + 0.01), Region::N1, &nb), 0.0);
    }

    #[test]
    fn validation() {
        assert!(NeighborhoodParams::defaults(0.01, 1.25).validate().is_ok());
        assert!(NeighborhoodParams::defaults(0.01, 1.4).validate().is_err());
        assert!(NeighborhoodParams { inner_margin: 1.0, ..NeighborhoodParams::defaults(0.01, 1.0) }.validate().is_err());
        assert!(NeighborhoodParams::defaults(0.6, 1.0).validate().is_err());
    }
}
