use canard_core::closed_loop::{FoldLoop, K2Loop, VdpLoop};
use canard_core::integrals::{eval_H, eval_H2};
use canard_core::mmo::{classify_loops, Label, MmoPattern, Supervisor, DISC_RADIUS};
use canard_core::models::{fold_rhs, Channel, HigherOrderTerms};
use canard_core::sim::{integrate, Direction, EventKind, IntegratorConfig, OpenLoop, Termination, Watcher};
use canard_core::{ControllerGains, PhasePoint, ScaledLevel, SystemParams};
use canard_core::controllers::NeighborhoodParams;
use proptest::prelude::*;

fn decay() -> OpenLoop<impl Fn(&[f64; 1]) -> canard_core::Result<[f64; 1]>> {
    OpenLoop(|s: &[f64; 1]| Ok([-s[0]]))
}

#[test]
fn linear_decay_reaches_inverse_e() {
    let tr = integrate(&decay(), [1.0], (0.0, 1.0), &IntegratorConfig::with_tolerances(1e-10, 1e-12), &[]).unwrap();
    assert_eq!(tr.termination, Termination::Completed);
    assert!((tr.final_state()[0] - (-1f64).exp()).abs() < 1e-8);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn global_error_tracks_tolerance() {
    let mut errs = Vec::new();
    for k in 6..=10 {
        let tol = 10f64.powi(-k);
        let cfg = IntegratorConfig::with_tolerances(tol, tol * 1e-3);
        let tr = integrate(&decay(), [1.0], (0.0, 5.0), &cfg, &[]).unwrap();
        let err = (tr.final_state()[0] - (-5f64).exp()).abs() / (-5f64).exp();
        assert!(err < 10.0 * tol, "tol {tol:e}: relative error {err:e}");
        errs.push(err);
    }
    // four decades of tolerance buy at least two and a half decades of accuracy
    assert!(errs[4] < errs[0] * 10f64.powf(-2.5), "{errs:?}");
}

#[test]
fn section_event_on_linear_motion() {
    let sys = OpenLoop(|_: &[f64; 1]| Ok([1.0]));
    let w = Watcher::section(Direction::Up, |s: &[f64; 1]| s[0]);
    let tr = integrate(&sys, [-1.0], (0.0, 3.0), &IntegratorConfig::default(), &[w]).unwrap();
    let hits: Vec<_> = tr.events_of(EventKind::SectionCrossing).collect();
    assert_eq!(hits.len(), 1);
    assert!((hits[0].time - 1.0).abs() < 1e-9);
}

#[test]
fn event_state_is_reproduced_by_stopping_there() {
    let params = SystemParams::new(0.01, 0.0).unwrap();
    let hot = HigherOrderTerms::zero();
    let sys = OpenLoop(move |s: &[f64; 2]| Ok(fold_rhs(PhasePoint::from(*s), params, &hot, 0.0, Channel::Fast)?.into()));
    let cfg = IntegratorConfig::with_tolerances(1e-11, 1e-13);
    let w = Watcher::section(Direction::Down, |s: &[f64; 2]| s[0]);
    let start = [0.05, 0.0];
    let tr = integrate(&sys, start, (0.0, 60.0), &cfg, &[w]).unwrap();
    let e = tr.events_of(EventKind::SectionCrossing).next().expect("orbit crosses x = 0");
    let again = integrate(&sys, start, (0.0, e.time), &cfg, &[]).unwrap();
    let end = again.final_state();
    assert!((end[0] - e.state[0]).abs() < 1e-9 && (end[1] - e.state[1]).abs() < 1e-9, "{end:?} vs {:?}", e.state);
}

#[test]
fn integration_is_bitwise_deterministic() {
    let eps = 0.01;
    let c = canard_core::controllers::CompositeController::new(
        eps,
        ControllerGains { c1: 1.0, k1: 1.0, x_star: -0.01, ..Default::default() },
        NeighborhoodParams::defaults(eps, 1.25),
        canard_core::controllers::Weighting::Normalized,
    )
    .unwrap();
    let sys = VdpLoop { eps, controller: Some(c) };
    let cfg = IntegratorConfig::with_tolerances(1e-9, 1e-11);
    let a = integrate(&sys, [-1.5, 1.0], (0.0, 400.0), &cfg, &[]).unwrap();
    let b = integrate(&sys, [-1.5, 1.0], (0.0, 400.0), &cfg, &[]).unwrap();
    assert_eq!(a.times.len(), b.times.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x[0].to_bits(), y[0].to_bits());
        assert_eq!(x[1].to_bits(), y[1].to_bits());
    }
    assert!(a.times.iter().zip(&b.times).all(|(s, t)| s.to_bits() == t.to_bits()));
}

#[test]
fn open_fold_conserves_first_integral() {
    let eps = 0.01;
    let params = SystemParams::new(eps, 0.0).unwrap();
    let mut sys = FoldLoop::new(params, ControllerGains::default(), ScaledLevel::MAXIMAL, Channel::Fast);
    sys.open = true;
    let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
    for start in [[0.05, 0.0], [0.0, 0.004], [-0.08, 0.002]] {
        let h0 = eval_H(PhasePoint::from(start), eps).unwrap();
        let tr = integrate(&sys, start, (0.0, 10.0), &cfg, &[]).unwrap();
        let drift = tr.points().map(|p| (eval_H(p, eps).unwrap() - h0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "{start:?}: drift {drift:e}");
    }
}

#[test]
fn open_fold_level_residual_stays_constant() {
    // start on H = −0.01 at y = 0: x² = ε(½ + 2·0.01)
    let eps: f64 = 0.01;
    let h: f64 = -0.01;
    let x0 = (eps * (0.5 - 2.0 * h)).sqrt();
    let mut sys = FoldLoop::new(SystemParams::new(eps, 0.0).unwrap(), ControllerGains::default(), ScaledLevel::MAXIMAL, Channel::Fast);
    sys.open = true;
    let tr = integrate(&sys, [x0, 0.0], (0.0, 10.0), &IntegratorConfig::with_tolerances(1e-11, 1e-13), &[]).unwrap();
    for p in tr.points() {
        assert!((eval_H(p, eps).unwrap() - h).abs() < 1e-8);
    }
}

#[test]
fn k2_closed_loop_settles_on_level() {
    let gains = ControllerGains { c1: 1.0, c2: 2.0, ..Default::default() };
    let h = 0.1;
    let sys = K2Loop { r2: 0.0, alpha2: 1.0, gains, h, g2: None, phi2: None };
    let cfg = IntegratorConfig { max_step: 0.5, ..IntegratorConfig::with_tolerances(1e-10, 1e-13) };
    let tr = integrate(&sys, [0.5, 0.5], (0.0, 200.0), &cfg, &[]).unwrap();
    let s = tr.final_state();
    assert!((eval_H2(s[0], s[1]).unwrap() - h).abs() < 1e-6);
}

fn supervisor(start: PhasePoint) -> Supervisor {
    let eps = 0.01;
    let cfg = IntegratorConfig { max_step: 0.5, ..IntegratorConfig::with_tolerances(1e-9, 1e-11) };
    let mut s = Supervisor::new(eps, ControllerGains { c1: 1.0, k1: 1.0, ..Default::default() }, NeighborhoodParams::defaults(eps, 1.0), cfg);
    s.start = start;
    s
}

#[test]
fn single_lao_repeated_three_times() {
    let run = supervisor(PhasePoint::new(-1.5, 1.0)).run(&"1L:0.75:0.01*3".parse::<MmoPattern>().unwrap()).unwrap();
    assert_eq!(canard_core::mmo::label_string(&run.loops), "LLL");
}

#[test]
fn two_saos() {
    let run = supervisor(PhasePoint::new(-1.5, 1.0)).run(&"2S:1.25:-0.01".parse::<MmoPattern>().unwrap()).unwrap();
    assert_eq!(canard_core::mmo::label_string(&run.loops), "SS");
    for l in &run.loops {
        assert!((l.max_y - 1.25).abs() <= 0.1, "max_y {}", l.max_y);
    }
}

#[test]
fn switches_happen_inside_the_disc() {
    let run = supervisor(PhasePoint::new(-1.5, 1.0)).run(&"2L:0.75:0.01,2S:1.25:-0.01".parse::<MmoPattern>().unwrap()).unwrap();
    assert_eq!(run.switches.len(), 4);
    for s in &run.switches {
        assert!(s.state.x.hypot(s.state.y) <= DISC_RADIUS * (1.0 + 1e-9), "{s:?}");
    }
}

#[test]
fn open_loop_vdp_has_no_lao() {
    let sys = VdpLoop { eps: 0.01, controller: None };
    let tr = integrate(&sys, [-1.5, 1.0], (0.0, 1500.0), &IntegratorConfig::with_tolerances(1e-9, 1e-11), &[]).unwrap();
    assert!(classify_loops(&tr).iter().all(|l| l.label != Label::Lao));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn head_and_height_rules(x0 in -2.2..-1.2f64, y0 in 0.3..1.2f64, y_h in 0.3..1.25f64) {
        let sup = supervisor(PhasePoint::new(x0, y0));
        let sao = sup.run(&format!("2S:{y_h}:-0.01").parse::<MmoPattern>().unwrap()).unwrap();
        for l in &sao.loops {
            prop_assert!(l.max_x < 2.0, "SAO loop reached x = {}", l.max_x);
            prop_assert!((l.max_y - y_h).abs() <= 0.1, "SAO loop height {} for y_h {y_h}", l.max_y);
        }
        let lao = sup.run(&"2L:0.75:0.01".parse::<MmoPattern>().unwrap()).unwrap();
        for l in &lao.loops {
            prop_assert!(l.max_x > 2.2, "LAO loop reached only x = {}", l.max_x);
        }
    }
}
