use crate::blowup::{k1_vdp_f1, ChartPointK1, ChartPointK2, ChartTerm};
use crate::error::{finite, CanardError, Result};
use crate::integrals::{checked_exp, eval_H2, eval_level_term_k2, ControllerGains};

/// μ₂ = −2α₂x₂ − α₂² + c₁x₂·exp(c₂y₂)(H₂ − h), with the compensation
/// −(y₂ − x₂²)r₂φ₂ when `phi2` is given.
pub fn k2_mu(p: ChartPointK2, gains: ControllerGains, level_h: f64, phi2: Option<&ChartTerm>) -> Result<f64> {
    let a = p.alpha2;
    let mut mu = -2.0 * a * p.x2 - a * a;
    if p.x2 != 0.0 {
        mu += gains.c1 * p.x2 * eval_level_term_k2(p.x2, p.y2, gains.c2, level_h)?;
    }
    if let Some(phi) = phi2 {
        if p.r2 != 0.0 {
            mu -= (p.y2 - p.x2 * p.x2) * p.r2 * phi(p.r2, p.x2, p.y2, p.alpha2);
        }
    }
    finite("mu2", mu)
}

/// L₂ = ½(H₂ − h)² and its closed-loop rate −c₁x₂²exp((c₂ − 2)y₂)(H₂ − h)².
#[allow(non_snake_case)]
pub fn lyapunov_L2(p: ChartPointK2, gains: ControllerGains, level_h: f64) -> Result<(f64, f64)> {
    let e = eval_H2(p.x2, p.y2)? - level_h;
    let l = 0.5 * e * e;
    let rate = if p.x2 == 0.0 || e == 0.0 {
        0.0
    } else {
        -gains.c1 * p.x2 * p.x2 * checked_exp((gains.c2 - 2.0) * p.y2)? * e * e
    };
    Ok((l, rate))
}

/// Centre-manifold branches h₁,±(ε₁) = ±(1 + ε₁/2)^{1/2} of the K₁ van der Pol chart.
pub fn h1_branch(eps1: f64, positive: bool) -> f64 {
    let v = (1.0 + 0.5 * eps1).sqrt();
    if positive {
        v
    } else {
        -v
    }
}

/// Chart-K₁ controller μ₁ = −f₁(x₁) − f₁(x₁ − x*) + ν₁ steering the centre
/// manifold x₁ = φ₁(r₁, ε₁) to x₁ = x* + φ₁ and damping transverse motion.
pub fn k1_vdp_mu(p: ChartPointK1, gains: ControllerGains, phi1: &dyn Fn(f64, f64) -> Result<f64>) -> Result<f64> {
    let ChartPointK1 { r1, x1, eps1, .. } = p;
    let xs = gains.x_star;
    let ph = phi1(r1, eps1)?;
    if ph == 0.0 || !ph.is_finite() {
        return Err(CanardError::Singular(format!("phi1 = {ph} at (r1, eps1) = ({r1}, {eps1})")));
    }
    let nu = (2.0 * ph + xs) / ph * k1_vdp_f1(r1, eps1, ph) - (eps1 * ph + r1 * ph * ph + gains.k1) * (x1 - xs - ph);
    finite("mu1", -k1_vdp_f1(r1, eps1, x1) - k1_vdp_f1(r1, eps1, x1 - xs) + nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::{k1_vdp_field, k2_field, parabola_g2};
    use crate::integrals::eval_H1;

    fn gains(c1: f64, c2: f64) -> ControllerGains {
        ControllerGains { c1, c2, ..Default::default() }
    }

    #[test]
    fn k2_mu_examples() {
        let mu = k2_mu(ChartPointK2::at(0.0, 0.0, 1.0), gains(1.0, 2.0), 1e-16, None).unwrap();
        assert_eq!(mu, -1.0);
        assert_eq!(k2_mu(ChartPointK2::at(0.0, 3.0, 0.0), gains(1.0, 2.0), 0.0, None).unwrap(), 0.0);
        let (_, phi) = parabola_g2();
        let q = ChartPointK2 { r2: 1.0, x2: 0.0, y2: 1.0, alpha2: 0.0, mu2: 0.0 };
        assert_eq!(k2_mu(q, gains(1.0, 2.0), 0.0, Some(&phi)).unwrap(), -1.0);
    }

    #[test]
    fn k2_closed_loop_on_axis() {
        // x₂ = 0: (x₂', y₂') = (−y₂, 0)
        for y2 in [-1.0, 0.5, 3.0] {
            let q = ChartPointK2::at(0.0, y2, 1.0);
            let mu = k2_mu(q, gains(1.0, 2.0), 1e-16, None).unwrap();
            let d = k2_field(q, None, mu);
            assert_eq!((d.dx2, d.dy2), (-y2, 0.0));
        }
    }

    #[test]
    fn lyapunov_examples() {
        let g = gains(1.0, 2.0);
        let x2: f64 = 0.8;
        let (l, r) = lyapunov_L2(ChartPointK2::at(x2, x2 * x2 - 0.5, 0.0), g, 0.0).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        let (l, r) = lyapunov_L2(ChartPointK2::at(0.0, 0.3, 0.0), g, 0.0).unwrap();
        assert!(l > 0.0 && r == 0.0);
        let (l, r) = lyapunov_L2(ChartPointK2::at(1.0, 0.0, 0.0), g, 0.0).unwrap();
        assert!((l - 1.0 / 32.0).abs() < 1e-15 && (r + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn h1_roots() {
        for i in 1..=300 {
            let e1 = 0.01 * i as f64;
            for s in [true, false] {
                assert!(eval_H1(h1_branch(e1, s), e1).unwrap().abs() < 1e-13);
            }
        }
    }

    #[test]
    fn k1_mu_examples() {
        let g = ControllerGains { x_star: 0.0, k1: 1.0, ..Default::default() };
        let one = |_: f64, _: f64| Ok(1.0);
        let p = ChartPointK1 { r1: 0.0, x1: 1.0, eps1: 0.0, alpha1: 0.0, mu1: 0.0 };
        assert_eq!(k1_vdp_mu(p, g, &one).unwrap(), 0.0);
        // at x₁ = 0 the closed loop reads 1 − (x₁ − x*)² − k₁(x₁ − x* − φ₁)
        for k1 in [0.0, 1.0, 2.5] {
            let g = ControllerGains { k1, ..g };
            let p = ChartPointK1 { x1: 0.0, ..p };
            let mu = k1_vdp_mu(p, g, &one).unwrap();
            assert!((k1_vdp_field(p, mu).dx1 - (1.0 + k1)).abs() < 1e-15);
        }
        let zero = |_: f64, _: f64| Ok(0.0);
        assert!(matches!(k1_vdp_mu(p, g, &zero), Err(CanardError::Singular(_))));
    }

    #[test]
    fn k1_variational_rate() {
        let g = ControllerGains { x_star: 0.02, k1: 1.5, ..Default::default() };
        let phi = |_: f64, e: f64| Ok(h1_branch(e, true));
        for delta in [1e-3, 1e-4] {
            let base = ChartPointK1 { r1: 0.0, x1: 0.0, eps1: 0.0, alpha1: 0.0, mu1: 0.0 };
            let f = |z: f64| {
                let p = ChartPointK1 { x1: 1.0 + g.x_star + z, ..base };
                k1_vdp_field(p, k1_vdp_mu(p, g, &phi).unwrap()).dx1
            };
            let slope = (f(delta) - f(-delta)) / (2.0 * delta);
            assert!((slope + (2.0 + g.k1)).abs() < 1e-9, "slope {slope}");
            assert!(f(0.0).abs() < 1e-15);
        }
    }
}
