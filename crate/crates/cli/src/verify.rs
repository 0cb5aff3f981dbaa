//! Quick invariant suite behind `canard-ctl verify`.

use std::time::Instant;

use canard_core::blowup::{default_germ_eps, germ_check, kappa12, kappa21, ChartPointK2};
use canard_core::closed_loop::{FoldLoop, K2Loop};
use canard_core::controllers::{fast_u, lyapunov_L2, CompositeController, NeighborhoodParams, Weighting};
use canard_core::integrals::{eval_H, eval_H1, eval_H2, eval_level_term};
use canard_core::mmo::{label_string, run_pattern};
use canard_core::models::Channel;
use canard_core::sim::{integrate, Direction, EventKind, IntegratorConfig, OpenLoop, Watcher};
use canard_core::{ControllerGains, PhasePoint, Result, ScaledLevel, SystemParams};

use crate::output::{parse_csv, write_csv};
use crate::svg::{critical_fold, emit_svg, Overlay, OverlayKind};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<(bool, String)>;

/// Deterministic uniform samples in [0, 1).
fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed;
    move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn level_identity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        for j in 0..50 {
            let eps = 0.01;
            let x = -2.0 + 4.0 * i as f64 / 49.0;
            let y = -0.5 + 2.5 * j as f64 / 49.0;
            let v = eval_level_term(PhasePoint::new(x, y), eps, 2.0, ScaledLevel::MAXIMAL)?;
            worst = worst.max((v - (y - x * x + 0.5 * eps) / (2.0 * eps)).abs());
        }
    }
    Ok((worst == 0.0, format!("max deviation {worst:e}")))
}

fn chart_identities() -> Result<(bool, String)> {
    let mut next = lcg(7);
    let (mut scale, mut trans, mut round): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let eps = 0.01 + next();
        let (x, y) = (-1.0 + 2.0 * next(), -0.2 + 1.2 * next());
        let h = eval_H(PhasePoint::new(x, y), eps)?;
        scale = scale.max((h - eval_H2(x / eps.sqrt(), y / eps)?).abs() / h.abs().max(1e-12));
        let e1 = 0.1 + 2.0 * next();
        let x1 = -2.0 + 4.0 * next();
        let a = eval_H1(x1, e1)?;
        trans = trans.max((a - eval_H2(x1 / e1.sqrt(), 1.0 / e1)?).abs() / a.abs().max(1e-12));
        let p = ChartPointK2 { r2: next(), x2: -3.0 + 6.0 * next(), y2: 0.05 + 3.0 * next(), alpha2: next() - 0.5, mu2: next() - 0.5 };
        let q = kappa12(kappa21(p)?)?;
        round = round.max((p.x2 - q.x2).abs().max((p.y2 - q.y2).abs()).max((p.r2 - q.r2).abs()));
    }
    Ok((scale < 1e-10 && trans < 1e-10 && round < 1e-13, format!("rescaling {scale:.1e}, transition {trans:.1e}, round trip {round:.1e}")))
}

fn lyapunov_sign() -> Result<(bool, String)> {
    let gains = ControllerGains { c1: 1.0, c2: 2.0, ..Default::default() };
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        for j in 0..100 {
            let p = ChartPointK2::at(-3.0 + 6.0 * i as f64 / 99.0, -1.0 + 5.0 * j as f64 / 99.0, 0.0);
            worst = worst.max(lyapunov_L2(p, gains, 1e-16)?.1);
        }
    }
    Ok((worst <= 0.0, format!("largest rate {worst:e} on a 100x100 grid")))
}

fn germs() -> Result<(bool, String)> {
    let eps = default_germ_eps();
    let maximal = ControllerGains { c1: 1.0, c2: 2.0 - (-15.0f64).exp(), ..Default::default() };
    let open = germ_check(&|x, y, _| Ok(-y + x * x), &eps)?;
    let fast = germ_check(&|x, y, e| Ok(-y + x * x + fast_u(PhasePoint::new(x, y), SystemParams::new(e, 0.0)?, maximal, ScaledLevel::MAXIMAL, None)?), &eps)?;
    let comp = germ_check(
        &|x, y, e| {
            let g = ControllerGains { c1: 1.0, k1: 1.0, x_star: -0.01, ..Default::default() };
            let c = CompositeController::new(e, g, NeighborhoodParams::defaults(e, 1.25), Weighting::Normalized)?;
            Ok(-y + x * x - x * x * x / 3.0 + c.u(PhasePoint::new(x, y))?)
        },
        &eps,
    )?;
    let same = open.passes && fast.passes && comp.passes;
    Ok((same, format!("open {}, fast {}, composite {}", open.passes, fast.passes, comp.passes)))
}

fn integrator_basics() -> Result<(bool, String)> {
    let decay = OpenLoop(|s: &[f64; 1]| Ok([-s[0]]));
    let tr = integrate(&decay, [1.0], (0.0, 1.0), &IntegratorConfig::with_tolerances(1e-10, 1e-12), &[])?;
    let err = (tr.final_state()[0] - (-1f64).exp()).abs();
    let line = OpenLoop(|_: &[f64; 1]| Ok([1.0]));
    let w = Watcher::section(Direction::Up, |s: &[f64; 1]| s[0]);
    let tr = integrate(&line, [-1.0], (0.0, 2.0), &IntegratorConfig::default(), &[w])?;
    let t_event = tr.events_of(EventKind::SectionCrossing).next().map(|e| e.time).unwrap_or(f64::NAN);
    Ok((err < 1e-8 && (t_event - 1.0).abs() < 1e-9, format!("decay error {err:.1e}, event at {t_event}")))
}

fn conservation() -> Result<(bool, String)> {
    let eps = 0.01;
    let mut sys = FoldLoop::new(SystemParams::new(eps, 0.0)?, ControllerGains::default(), ScaledLevel::MAXIMAL, Channel::Fast);
    sys.open = true;
    let start = [0.05, 0.0];
    let h0 = eval_H(PhasePoint::from(start), eps)?;
    let tr = integrate(&sys, start, (0.0, 10.0), &IntegratorConfig::with_tolerances(1e-10, 1e-12), &[])?;
    let mut drift: f64 = 0.0;
    for p in tr.points() {
        drift = drift.max((eval_H(p, eps)? - h0).abs());
    }
    Ok((drift < 1e-8, format!("max |H(t) - H(0)| = {drift:.1e}")))
}

fn k2_convergence() -> Result<(bool, String)> {
    let gains = ControllerGains { c1: 1.0, c2: 2.0, ..Default::default() };
    let sys = K2Loop { r2: 0.0, alpha2: 1.0, gains, h: 0.1, g2: None, phi2: None };
    let cfg = IntegratorConfig { max_step: 0.5, ..IntegratorConfig::with_tolerances(1e-10, 1e-13) };
    let tr = integrate(&sys, [0.5, 0.5], (0.0, 200.0), &cfg, &[])?;
    let s = tr.final_state();
    let e = (eval_H2(s[0], s[1])? - 0.1).abs();
    Ok((e < 1e-6, format!("terminal |H2 - h| = {e:.1e}")))
}

fn head_rule() -> Result<(bool, String)> {
    let eps = 0.01;
    let cfg = IntegratorConfig { max_step: 0.5, ..IntegratorConfig::with_tolerances(1e-9, 1e-11) };
    let gains = ControllerGains { c1: 1.0, k1: 1.0, ..Default::default() };
    let nbhd = NeighborhoodParams::defaults(eps, 1.0);
    let sao = run_pattern(&"2S:1.25:-0.01".parse()?, eps, gains, nbhd, &cfg)?;
    let lao = run_pattern(&"2L:0.75:0.01".parse()?, eps, gains, nbhd, &cfg)?;
    let ok = sao.loops.iter().all(|l| l.max_x < 2.0) && lao.loops.iter().all(|l| l.max_x > 2.2);
    Ok((ok, format!("x*<0 gives {}, x*>0 gives {}", label_string(&sao.loops), label_string(&lao.loops))))
}

fn artifacts() -> Result<(bool, String)> {
    let t: Vec<f64> = (0..50).map(|k| k as f64 / 7.0).collect();
    let s: Vec<[f64; 2]> = t.iter().map(|v| [v.sin(), v.cos() / 3.0]).collect();
    let u: Vec<f64> = t.iter().map(|v| v.exp()).collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &t, &s, &u).expect("writing to memory");
    let exact = match parse_csv(&String::from_utf8_lossy(&buf)) {
        Ok((t2, s2, u2)) => t2 == t && s2 == s && u2 == u,
        Err(_) => false,
    };
    let pts: Vec<(f64, f64)> = s.iter().map(|p| (p[0], p[1])).collect();
    let o = [Overlay::new(OverlayKind::CriticalManifold, "critical manifold", critical_fold(-1.0, 1.0))];
    let stable = emit_svg(&pts, &o, ("x", "y"), "v") == emit_svg(&pts, &o, ("x", "y"), "v");
    Ok((exact && stable, format!("csv round trip exact: {exact}, svg deterministic: {stable}")))
}

pub const CHECKS: [(&str, Check); 9] = [
    ("level term identity", level_identity),
    ("chart identities", chart_identities),
    ("Lyapunov sign", lyapunov_sign),
    ("fold germ", germs),
    ("integrator basics", integrator_basics),
    ("first-integral conservation", conservation),
    ("K2 convergence", k2_convergence),
    ("head rule", head_rule),
    ("artifact round trip", artifacts),
];

pub fn run_all() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let (passed, detail) = match f() {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult { name, passed, detail, seconds: t.elapsed().as_secs_f64() }
        })
        .collect()
}
