//! Registry of experiment runners. Each runner integrates one closed loop and
//! returns the trajectory in plotting coordinates, overlays and a summary.

use std::sync::Arc;

use canard_core::blowup::parabola_g2;
use canard_core::closed_loop::{FoldLoop, K1VdpLoop, K2Loop, VdpLoop};
use canard_core::controllers::{h1_branch, CompositeController, K1Domain, NeighborhoodParams, SlowManifold, Weighting};
use canard_core::integrals::{eval_H2, eval_level_term};
use canard_core::mmo::{classify_loops, label_string, LoopLabel, MmoPattern, Supervisor};
use canard_core::models::{Channel, HigherOrderTerms};
use canard_core::sim::{integrate, Direction, Event, EventKind, IntegratorConfig, Termination, Trajectory, Watcher};
use canard_core::{CanardError, ControllerGains, PhasePoint, ScaledLevel, SystemParams};
use serde_json::{json, Map, Value};

use crate::config::{Experiment, ResolvedConfig};
use crate::error::CliError;
use crate::svg::{critical_fold, critical_vdp, neighborhood_polygon, Overlay, OverlayKind};

/// What a run produced, in phase-plane coordinates.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub controls: Vec<f64>,
    pub overlays: Vec<Overlay>,
    /// Axis labels of the phase portrait.
    pub axes: (&'static str, &'static str),
    pub summary: Map<String, Value>,
}

pub fn run(cfg: &ResolvedConfig) -> Result<RunOutput, CliError> {
    match cfg.experiment {
        Experiment::FoldFast => fold(cfg, Channel::Fast, false),
        Experiment::FoldFastHot => fold(cfg, Channel::Fast, true),
        Experiment::FoldSlow => fold(cfg, Channel::Slow, false),
        Experiment::K2 => k2(cfg, false),
        Experiment::K2Hot => k2(cfg, true),
        Experiment::K1Vdp => k1_vdp(cfg),
        Experiment::VdpCanard => vdp_canard(cfg),
        Experiment::VdpMmo => vdp_mmo(cfg),
        Experiment::Verify => Err(CliError::Validation("verify is run through the verify suite, not as a simulation".into())),
    }
}

fn integrator(cfg: &ResolvedConfig) -> IntegratorConfig {
    IntegratorConfig { max_step: cfg.integrator.max_step, ..IntegratorConfig::with_tolerances(cfg.integrator.rel_tol, cfg.integrator.abs_tol) }
}

fn gains(cfg: &ResolvedConfig) -> ControllerGains {
    let p = cfg.params;
    ControllerGains { c1: p.c1, c2: p.c2, k1: p.k1, x_star: p.x_star, K: p.K }
}

fn start(cfg: &ResolvedConfig) -> [f64; 2] {
    cfg.initial.expect("experiment defines a start point")
}

/// Turns a failed integration into an exit-3 error.
fn check<const N: usize>(tr: &Trajectory<N>) -> Result<(), CliError> {
    match tr.failure() {
        Some(e) => Err(CliError::Integration(e.to_string())),
        None => Ok(()),
    }
}

fn termination<const N: usize>(tr: &Trajectory<N>) -> Value {
    match &tr.termination {
        Termination::Completed => json!("completed"),
        Termination::Stopped { event } => json!({"stopped_by": kind_name(tr.events[*event].kind), "time": tr.events[*event].time}),
        other => json!(format!("{other:?}")),
    }
}

fn kind_name(k: EventKind) -> &'static str {
    match k {
        EventKind::SectionCrossing => "section",
        EventKind::SetEntry => "set_entry",
        EventKind::SetExit => "set_exit",
        EventKind::LevelConvergence => "level_convergence",
        EventKind::OverflowFault => "overflow",
    }
}

fn events_json(events: &[Event<2>]) -> Value {
    Value::Array(events.iter().map(|e| json!({"kind": kind_name(e.kind), "time": e.time, "x": e.state[0], "y": e.state[1]})).collect())
}

fn loops_json(loops: &[LoopLabel]) -> Value {
    Value::Array(
        loops
            .iter()
            .map(|l| json!({"label": l.label.letter().to_string(), "t_start": l.t_start, "t_end": l.t_end, "max_x": l.max_x, "max_y": l.max_y}))
            .collect(),
    )
}

fn stats<const N: usize>(tr: &Trajectory<N>) -> Value {
    json!({"accepted": tr.stats.accepted, "rejected": tr.stats.rejected, "evaluations": tr.stats.evaluations})
}

fn terminal_state(times: &[f64], states: &[[f64; 2]], controls: &[f64]) -> Value {
    let n = times.len() - 1;
    json!({"t": times[n], "x": states[n][0], "y": states[n][1], "u": controls[n]})
}

/// The level set H(x − shift, y) = h as a closed polyline, clipped at `y_top`.
fn reference_cycle(eps: f64, level: ScaledLevel, shift: f64, y_top: f64) -> Vec<(f64, f64)> {
    let n = 400;
    let y_lo = -0.5 * eps;
    let mut right = Vec::new();
    for k in 0..=n {
        let y = y_lo + (y_top - y_lo) * k as f64 / n as f64;
        let Ok(tail) = level.times_exp(2.0 * y / eps) else { break };
        let r = y + 0.5 * eps - 2.0 * eps * tail;
        if r >= 0.0 {
            right.push((r.sqrt(), y));
        } else if !right.is_empty() {
            break;
        }
    }
    let mut pts: Vec<(f64, f64)> = right.iter().rev().map(|&(x, y)| (-x + shift, y)).collect();
    pts.extend(right.iter().map(|&(x, y)| (x + shift, y)));
    if level.h0 > 0.0 {
        if let Some(&first) = pts.first() {
            pts.push(first);
        }
    }
    pts
}

fn y_max(states: &[[f64; 2]]) -> f64 {
    states.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max)
}

fn fold(cfg: &ResolvedConfig, channel: Channel, hot: bool) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let params = SystemParams::new(p.eps, p.alpha)?;
    let level = ScaledLevel::new(p.h0, p.E)?;
    let g = gains(cfg);
    g.validate()?;
    let mut sys = FoldLoop::new(params, g, level, channel);
    if hot {
        sys.hot = HigherOrderTerms::slow_coupling(100.0);
        sys.compensate = cfg.compensate;
    }
    let shift = match channel {
        Channel::Fast => params.alpha,
        Channel::Slow => 0.0,
    };
    let section = Watcher::section(Direction::Up, move |s: &[f64; 2]| s[0] - shift);
    let tr = integrate(&sys, start(cfg), (0.0, cfg.t_end), &integrator(cfg), &[section])?;
    check(&tr)?;
    let resid = |s: &[f64; 2]| eval_level_term(PhasePoint::new(s[0] - shift, s[1]), params.eps, 2.0, level);
    let initial = resid(&tr.states[0])?;
    let terminal = resid(&tr.final_state())?;
    let hits: Vec<&Event<2>> = tr.events_of(EventKind::SectionCrossing).collect();
    let mut summary = Map::new();
    summary.insert("residual_initial".into(), json!(initial));
    summary.insert("residual_terminal".into(), json!(terminal));
    if let Some(last) = hits.last() {
        summary.insert("residual_last_return".into(), json!(resid(&last.state)?));
    }
    if hits.len() >= 2 {
        let (a, b) = (hits[hits.len() - 2], hits[hits.len() - 1]);
        summary.insert("period".into(), json!(b.time - a.time));
        summary.insert("return_distance".into(), json!((a.state[0] - b.state[0]).hypot(a.state[1] - b.state[1])));
    }
    summary.insert("overflow_events".into(), json!(tr.events_of(EventKind::OverflowFault).count()));
    summary.insert("events".into(), events_json(&tr.events));
    summary.insert("termination".into(), termination(&tr));
    summary.insert("steps".into(), stats(&tr));
    let top = y_max(&tr.states).max(0.1) * 1.2;
    let overlays = vec![
        Overlay::new(OverlayKind::CriticalManifold, "critical manifold", critical_fold(-top.sqrt() * 1.5, top.sqrt() * 1.5)),
        Overlay::new(OverlayKind::ReferenceCycle, "reference cycle", reference_cycle(params.eps, level, shift, top)),
    ];
    Ok(RunOutput { times: tr.times.clone(), states: tr.states.clone(), controls: tr.controls.clone(), overlays, axes: ("x", "y"), summary })
}

fn k2(cfg: &ResolvedConfig, hot: bool) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let g = gains(cfg);
    g.validate()?;
    let level = ScaledLevel::new(p.h0, p.E)?;
    let h = level.value();
    let (g2, phi2) = if hot {
        let (g2, phi2) = parabola_g2();
        (Some(g2), cfg.compensate.then_some(phi2))
    } else {
        (None, None)
    };
    let sys = K2Loop { r2: p.eps.sqrt(), alpha2: p.alpha, gains: g, h, g2, phi2 };
    let tr = integrate(&sys, start(cfg), (0.0, cfg.t_end), &integrator(cfg), &[])?;
    check(&tr)?;
    let err = |s: &[f64; 2]| -> Result<f64, CanardError> { Ok(eval_H2(s[0], s[1])? - h) };
    let mut summary = Map::new();
    summary.insert("h".into(), json!(h));
    summary.insert("level_error_initial".into(), json!(err(&tr.states[0])?));
    summary.insert("level_error_terminal".into(), json!(err(&tr.final_state())?));
    summary.insert("termination".into(), termination(&tr));
    summary.insert("steps".into(), stats(&tr));
    let top = y_max(&tr.states).max(1.0) * 1.2;
    // chart level set: y₂ − x₂² + ½ = 2h·exp(2y₂)
    let mut right = Vec::new();
    let n = 400;
    for k in 0..=n {
        let y = -0.5 + (top + 0.5) * k as f64 / n as f64;
        let r = y + 0.5 - 2.0 * h * (2.0 * y).exp();
        if r >= 0.0 {
            right.push((r.sqrt(), y));
        } else if !right.is_empty() {
            break;
        }
    }
    let mut cycle: Vec<(f64, f64)> = right.iter().rev().map(|&(x, y)| (-x, y)).collect();
    cycle.extend(right.iter().copied());
    let a = p.alpha;
    let w = top.sqrt() * 1.5;
    let manifold = (0..=200).map(|k| -w + 2.0 * w * k as f64 / 200.0).map(|x| (x, (x + a) * (x + a))).collect();
    let overlays = vec![
        Overlay::new(OverlayKind::CriticalManifold, "critical manifold", manifold),
        Overlay::new(OverlayKind::ReferenceCycle, "reference cycle", cycle),
    ];
    Ok(RunOutput { times: tr.times.clone(), states: tr.states.clone(), controls: tr.controls.clone(), overlays, axes: ("x2", "y2"), summary })
}

fn k1_vdp(cfg: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let g = gains(cfg);
    g.validate()?;
    let dom = K1Domain::default();
    let eps = p.eps;
    if !(eps > 0.0) {
        return Err(CliError::Validation("k1-vdp needs eps > 0".into()));
    }
    let state = match cfg.initial {
        Some([x, y]) => {
            if !(y > 0.0) {
                return Err(CliError::Validation(format!("k1-vdp start needs y > 0, got {y}")));
            }
            let r = y.sqrt();
            [r, eps / y, x / r]
        }
        None => {
            // entry section ε₁ = δ₁ on the chart centre manifold shifted by x*
            let r0 = (eps / dom.delta1).sqrt();
            [r0, dom.delta1, h1_branch(dom.delta1, true) + g.x_star]
        }
    };
    if state[0] >= dom.rho1 {
        return Err(CliError::Validation(format!("start r1 = {} is past the exit section r1 = {}", state[0], dom.rho1)));
    }
    let y_lo = 0.99 * state[0] * state[0];
    let manifold = Arc::new(SlowManifold::new(eps, y_lo)?);
    let sys = K1VdpLoop { gains: g, manifold: manifold.clone() };
    let rho = dom.rho1;
    let exit = [Watcher::section(Direction::Up, move |s: &[f64; 3]| s[0] - rho).terminal()];
    let tr = integrate(&sys, state, (0.0, cfg.t_end), &integrator(cfg), &exit)?;
    check(&tr)?;
    let z = |s: &[f64; 3]| -> Result<f64, CanardError> { Ok(s[2] - g.x_star - manifold.phi(s[0] * s[0])? / s[0]) };
    let states: Vec<[f64; 2]> = tr.states.iter().map(|s| [s[0] * s[2], s[0] * s[0]]).collect();
    let controls: Vec<f64> = tr.states.iter().zip(&tr.controls).map(|(s, mu)| s[0] * s[0] * mu).collect();
    let fin = tr.final_state();
    let mut summary = Map::new();
    summary.insert("exited".into(), json!(matches!(tr.termination, Termination::Stopped { .. })));
    summary.insert("chart_start".into(), json!({"r1": state[0], "eps1": state[1], "x1": state[2]}));
    summary.insert("chart_end".into(), json!({"r1": fin[0], "eps1": fin[1], "x1": fin[2]}));
    summary.insert("z1_start".into(), json!(z(&state)?));
    summary.insert("z1_end".into(), json!(z(&fin)?));
    summary.insert(
        "events".into(),
        Value::Array(tr.events.iter().map(|e| json!({"kind": kind_name(e.kind), "time": e.time, "r1": e.state[0], "eps1": e.state[1], "x1": e.state[2]})).collect()),
    );
    summary.insert("termination".into(), termination(&tr));
    summary.insert("steps".into(), stats(&tr));
    let y_hi = fin[0] * fin[0];
    let target: Vec<(f64, f64)> = (0..=200)
        .filter_map(|k| {
            let y = y_lo + (y_hi - y_lo) * k as f64 / 200.0;
            manifold.phi(y).ok().map(|ph| (ph + g.x_star * y.sqrt(), y))
        })
        .collect();
    let overlays = vec![
        Overlay::new(OverlayKind::CriticalManifold, "critical manifold", critical_vdp(-0.2, 1.0)),
        Overlay::new(OverlayKind::ReferenceCycle, "target manifold", target),
    ];
    Ok(RunOutput { times: tr.times.clone(), states, controls, overlays, axes: ("x", "y"), summary })
}

fn vdp_overlays(nbhd: &NeighborhoodParams) -> Vec<Overlay> {
    vec![
        Overlay::new(OverlayKind::CriticalManifold, "critical manifold", critical_vdp(-1.2, 3.0)),
        Overlay::new(OverlayKind::Neighborhood, "N1", neighborhood_polygon(nbhd, 1)),
        Overlay::new(OverlayKind::Neighborhood, "N2", neighborhood_polygon(nbhd, 2)),
    ]
}

fn vdp_canard(cfg: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let nbhd = NeighborhoodParams::defaults(p.eps, p.y_h);
    let c = CompositeController::new(p.eps, gains(cfg), nbhd, Weighting::Normalized)?;
    let manifold = c.manifold().clone();
    let sys = VdpLoop { eps: p.eps, controller: Some(c) };
    let tr = integrate(&sys, start(cfg), (0.0, cfg.t_end), &integrator(cfg), &[])?;
    check(&tr)?;
    let loops = classify_loops(&tr);
    let mut summary = Map::new();
    summary.insert("labels".into(), json!(label_string(&loops)));
    summary.insert("loops".into(), loops_json(&loops));
    summary.insert("termination".into(), termination(&tr));
    summary.insert("steps".into(), stats(&tr));
    let mut overlays = vdp_overlays(&nbhd);
    let cycle = (0..=200)
        .filter_map(|k| {
            let y = nbhd.y_min + (p.y_h - nbhd.y_min) * k as f64 / 200.0;
            manifold.phi(y).ok().map(|x| (x, y))
        })
        .collect();
    overlays.push(Overlay::new(OverlayKind::ReferenceCycle, "repelling slow manifold", cycle));
    Ok(RunOutput { times: tr.times.clone(), states: tr.states.clone(), controls: tr.controls.clone(), overlays, axes: ("x", "y"), summary })
}

fn vdp_mmo(cfg: &ResolvedConfig) -> Result<RunOutput, CliError> {
    let p = cfg.params;
    let text = cfg.pattern.as_deref().expect("vdp-mmo always resolves a pattern");
    let pattern: MmoPattern = text.parse()?;
    let nbhd = NeighborhoodParams::defaults(p.eps, p.y_h);
    let mut sup = Supervisor::new(p.eps, gains(cfg), nbhd, integrator(cfg));
    sup.start = PhasePoint::from(start(cfg));
    sup.loop_time = cfg.t_end;
    let requested: String = pattern.expand(sup.loop_cap).iter().map(|s| s.label.letter()).collect();
    let run = match sup.run(&pattern) {
        Ok(r) => r,
        Err(CanardError::PatternDeviation { achieved }) => return Err(CliError::Pattern { achieved, requested }),
        Err(e @ (CanardError::NonConvergent(_) | CanardError::Stiffness { .. } | CanardError::Overflow { .. })) => {
            return Err(CliError::Integration(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let tr = &run.trajectory;
    let mut summary = Map::new();
    summary.insert("requested".into(), json!(requested));
    summary.insert("labels".into(), json!(label_string(&run.loops)));
    summary.insert("loops".into(), loops_json(&run.loops));
    summary.insert(
        "switches".into(),
        Value::Array(run.switches.iter().map(|s| json!({"time": s.time, "x": s.state.x, "y": s.state.y, "y_h": s.y_h, "x_star": s.x_star})).collect()),
    );
    summary.insert("steps".into(), stats(tr));
    // draw N₁ for the tallest small-amplitude request
    let y_h = pattern.segments.iter().map(|s| s.y_h).fold(f64::NEG_INFINITY, f64::max);
    let overlays = vdp_overlays(&NeighborhoodParams { y_h, ..nbhd });
    Ok(RunOutput { times: tr.times.clone(), states: tr.states.clone(), controls: tr.controls.clone(), overlays, axes: ("x", "y"), summary })
}

pub fn terminal_json(out: &RunOutput) -> Value {
    terminal_state(&out.times, &out.states, &out.controls)
}
