//! Adaptive Dormand–Prince integration of controlled systems with event
//! detection and trajectory recording.

mod dopri;
mod metrics;

use std::fmt;
use std::sync::Arc;

pub use dopri::DenseSegment;
pub use metrics::{convergence_metrics, ConvergenceReport};

use crate::error::{CanardError, Result};
use crate::integrals::PhasePoint;
use dopri::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Keep the continuous extension of every accepted step.
    pub dense_output: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-10, max_step: 1.0, min_step: 1e-12, max_steps: 5_000_000, dense_output: false }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.min_step > 0.0
            && self.min_step < self.max_step
            && self.max_steps > 0
            && self.rel_tol.is_finite()
            && self.abs_tol.is_finite();
        if ok {
            Ok(())
        } else {
            Err(CanardError::Domain(format!("invalid integrator configuration {self:?}")))
        }
    }
}

/// A plant with a state-feedback controller.
pub trait ControlledSystem<const N: usize> {
    fn control(&self, state: &[f64; N]) -> Result<f64>;
    fn field(&self, state: &[f64; N], u: f64) -> Result<[f64; N]>;
}

/// Couples a plant `f(state, u)` with a feedback law `u(state)`.
pub struct ClosedLoop<F, C> {
    pub plant: F,
    pub controller: C,
}

impl<F, C> ClosedLoop<F, C> {
    pub fn new(plant: F, controller: C) -> Self {
        Self { plant, controller }
    }
}

impl<const N: usize, F, C> ControlledSystem<N> for ClosedLoop<F, C>
where
    F: Fn(&[f64; N], f64) -> Result<[f64; N]>,
    C: Fn(&[f64; N]) -> Result<f64>,
{
    fn control(&self, state: &[f64; N]) -> Result<f64> {
        (self.controller)(state)
    }
    fn field(&self, state: &[f64; N], u: f64) -> Result<[f64; N]> {
        (self.plant)(state, u)
    }
}

/// An uncontrolled vector field.
pub struct OpenLoop<F>(pub F);

impl<const N: usize, F> ControlledSystem<N> for OpenLoop<F>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    fn control(&self, _: &[f64; N]) -> Result<f64> {
        Ok(0.0)
    }
    fn field(&self, state: &[f64; N], _: f64) -> Result<[f64; N]> {
        (self.0)(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    SectionCrossing,
    SetEntry,
    SetExit,
    LevelConvergence,
    OverflowFault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Any,
}

impl Direction {
    fn admits(self, actual: Direction) -> bool {
        self == Direction::Any || self == actual
    }
}

pub type EventFn<const N: usize> = Arc<dyn Fn(&[f64; N]) -> f64 + Send + Sync>;

/// Watches a scalar function of the state for sign changes.
#[derive(Clone)]
pub struct Watcher<const N: usize> {
    pub kind: EventKind,
    pub direction: Direction,
    pub terminal: bool,
    g: EventFn<N>,
}

impl<const N: usize> fmt::Debug for Watcher<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Watcher")
            .field("kind", &self.kind)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish()
    }
}

impl<const N: usize> Watcher<N> {
    pub fn new(kind: EventKind, direction: Direction, g: impl Fn(&[f64; N]) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind, direction, terminal: false, g: Arc::new(g) }
    }

    /// Zero crossings of `g`.
    pub fn section(direction: Direction, g: impl Fn(&[f64; N]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(EventKind::SectionCrossing, direction, g)
    }

    /// Entry into the set `{g < 0}`.
    pub fn set_entry(g: impl Fn(&[f64; N]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(EventKind::SetEntry, Direction::Down, g)
    }

    /// Exit from the set `{g < 0}`.
    pub fn set_exit(g: impl Fn(&[f64; N]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(EventKind::SetExit, Direction::Up, g)
    }

    /// First time the nonnegative residual `r` drops below `threshold`.
    pub fn level_convergence(threshold: f64, r: impl Fn(&[f64; N]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(EventKind::LevelConvergence, Direction::Down, move |s| r(s) - threshold)
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn eval(&self, state: &[f64; N]) -> f64 {
        (self.g)(state)
    }
}

impl Watcher<2> {
    /// Entry into the open disc of radius `radius` around `(cx, cy)`.
    pub fn disc_entry(cx: f64, cy: f64, radius: f64) -> Self {
        Self::set_entry(move |s| (s[0] - cx).powi(2) + (s[1] - cy).powi(2) - radius * radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<const N: usize = 2> {
    pub kind: EventKind,
    pub watcher: usize,
    pub time: f64,
    pub state: [f64; N],
    pub direction: Direction,
}

impl Event<2> {
    pub fn point(&self) -> PhasePoint {
        self.state.into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Reached the end of the time span.
    Completed,
    /// A terminal watcher fired; the index points into `events`.
    Stopped { event: usize },
    /// The step size controller asked for a step below `min_step`.
    StepUnderflow { t: f64, h: f64 },
    MaxSteps { t: f64 },
    /// The controller or vector field failed at an accepted state.
    Fault { t: f64, error: CanardError },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize = 2> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Controller output at each recorded state.
    pub controls: Vec<f64>,
    pub events: Vec<Event<N>>,
    pub dense: Vec<DenseSegment<N>>,
    pub termination: Termination,
    pub stats: StepStats,
}

impl<const N: usize> Trajectory<N> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> [f64; N] {
        *self.states.last().expect("trajectory is never empty")
    }

    /// The error behind a fault, step underflow or step budget exhaustion.
    pub fn failure(&self) -> Option<CanardError> {
        match &self.termination {
            Termination::Completed | Termination::Stopped { .. } => None,
            Termination::StepUnderflow { t, h } => Some(CanardError::Stiffness { t: *t, h: *h }),
            Termination::MaxSteps { t } => Some(CanardError::NonConvergent(format!("step budget exhausted at t = {t}"))),
            Termination::Fault { error, .. } => Some(error.clone()),
        }
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event<N>> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// State at time `t` from the stored continuous extension.
    pub fn interpolate(&self, t: f64) -> Option<[f64; N]> {
        let i = self.dense.partition_point(|s| s.t1() < t);
        let seg = self.dense.get(i)?;
        seg.contains(t).then(|| seg.eval(t))
    }
}

impl Trajectory<2> {
    pub fn points(&self) -> impl Iterator<Item = PhasePoint> + '_ {
        self.states.iter().map(|s| PhasePoint::from(*s))
    }
}

fn stage<const N: usize, S: ControlledSystem<N>>(sys: &S, y: &[f64; N]) -> Result<(f64, [f64; N])> {
    let u = sys.control(y)?;
    let f = sys.field(y, u)?;
    if u.is_finite() && f.iter().all(|v| v.is_finite()) {
        Ok((u, f))
    } else {
        Err(CanardError::Domain(format!("non-finite field {f:?} (u = {u})")))
    }
}

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn initial_step<const N: usize, S: ControlledSystem<N>>(sys: &S, y0: &[f64; N], f0: &[f64; N], cfg: &IntegratorConfig, span: f64) -> f64 {
    let sk: Vec<f64> = y0.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let rms = |v: &[f64; N]| (v.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / N as f64).sqrt();
    let dnf = rms(f0);
    let dny = rms(y0);
    let hmax = cfg.max_step.min(span);
    let mut h = if dnf <= 1e-5 || dny <= 1e-5 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(hmax);
    let y1 = combo(y0, h, &[(1.0, f0)]);
    let Ok((_, f1)) = stage(sys, &y1) else {
        return h.max(cfg.min_step);
    };
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let der2 = rms(&diff) / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(hmax).max(cfg.min_step)
}

fn locate<const N: usize>(w: &Watcher<N>, seg: &DenseSegment<N>, g0: f64) -> (f64, [f64; N]) {
    let (mut a, mut b) = (seg.t0, seg.t1());
    let below = g0 < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = w.eval(&seg.eval(m));
        if (gm < 0.0) == below && gm != 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (b, seg.eval(b))
}

/// Integrates `sys` from `start` over `t_span` with Dormand–Prince 5(4),
/// PI step-size control and watcher-driven events.
pub fn integrate<const N: usize, S: ControlledSystem<N>>(
    sys: &S,
    start: [f64; N],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    watchers: &[Watcher<N>],
) -> Result<Trajectory<N>> {
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(CanardError::Domain(format!("empty time span [{t0}, {t1}]")));
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(CanardError::Domain(format!("non-finite initial state {start:?}")));
    }
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![start],
        controls: Vec::new(),
        events: Vec::new(),
        dense: Vec::new(),
        termination: Termination::Completed,
        stats: StepStats::default(),
    };
    let (u0, mut k1) = match stage(sys, &start) {
        Ok(v) => v,
        Err(error) => {
            traj.controls.push(f64::NAN);
            traj.events.push(Event { kind: EventKind::OverflowFault, watcher: usize::MAX, time: t0, state: start, direction: Direction::Any });
            traj.termination = Termination::Fault { t: t0, error };
            return Ok(traj);
        }
    };
    traj.controls.push(u0);
    traj.stats.evaluations += 1;

    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FACC1: f64 = 5.0;
    const FACC2: f64 = 0.1;

    let mut t = t0;
    let mut y = start;
    let mut h = initial_step(sys, &y, &k1, cfg, t1 - t0);
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut g_prev: Vec<f64> = watchers.iter().map(|w| w.eval(&y)).collect();
    let mut steps = 0usize;

    while t < t1 {
        if steps >= cfg.max_steps {
            traj.termination = Termination::MaxSteps { t };
            break;
        }
        steps += 1;
        h = h.min(cfg.max_step);
        let clipped = t + 1.01 * h >= t1;
        if clipped {
            h = t1 - t;
        }
        if h < cfg.min_step && !clipped {
            traj.termination = Termination::StepUnderflow { t, h };
            break;
        }

        let attempt = (|| -> Result<([f64; N], f64, [[f64; N]; 7], f64)> {
            let (_, k2) = stage(sys, &combo(&y, h, &[(A21, &k1)]))?;
            let (_, k3) = stage(sys, &combo(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let (_, k4) = stage(sys, &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let (_, k5) = stage(sys, &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let (_, k6) = stage(sys, &combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let ynew = combo(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let (u7, k7) = stage(sys, &ynew)?;
            let mut err: f64 = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
                err = err.max((e / sk).abs());
            }
            Ok((ynew, u7, [k1, k2, k3, k4, k5, k6, k7], err))
        })();
        traj.stats.evaluations += 6;

        let (ynew, u7, ks, err) = match attempt {
            Ok(v) if v.3.is_finite() => v,
            _ => {
                // a failing stage point usually means the step overshot
                traj.stats.rejected += 1;
                last_rejected = true;
                h *= 0.25;
                if h < cfg.min_step {
                    let error = stage(sys, &y).err().unwrap_or(CanardError::Stiffness { t, h });
                    traj.events.push(Event { kind: EventKind::OverflowFault, watcher: usize::MAX, time: t, state: y, direction: Direction::Any });
                    traj.termination = Termination::Fault { t, error };
                    break;
                }
                continue;
            }
        };

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FACC2, FACC1);
            let mut hnew = h / fac;
            facold = err.max(1e-4);
            if last_rejected {
                hnew = hnew.min(h);
            }
            last_rejected = false;
            traj.stats.accepted += 1;

            let tnew = if clipped { t1 } else { t + h };
            let seg = DenseSegment::new(t, tnew - t, &y, &ynew, &ks);
            let mut hits: Vec<(f64, usize, [f64; N], Direction)> = Vec::new();
            for (i, w) in watchers.iter().enumerate() {
                let gn = w.eval(&ynew);
                let go = g_prev[i];
                let actual = if go < 0.0 && gn >= 0.0 {
                    Some(Direction::Up)
                } else if go > 0.0 && gn <= 0.0 {
                    Some(Direction::Down)
                } else {
                    None
                };
                if let Some(d) = actual.filter(|d| w.direction.admits(*d)) {
                    let (te, se) = locate(w, &seg, go);
                    hits.push((te, i, se, d));
                }
                g_prev[i] = gn;
            }
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut stop = None;
            for (te, i, se, d) in hits {
                traj.events.push(Event { kind: watchers[i].kind, watcher: i, time: te, state: se, direction: d });
                if watchers[i].terminal {
                    stop = Some((te, se));
                    break;
                }
            }
            if cfg.dense_output {
                traj.dense.push(seg);
            }
            if let Some((te, se)) = stop {
                let ue = sys.control(&se).unwrap_or(f64::NAN);
                if te > t {
                    traj.times.push(te);
                    traj.states.push(se);
                    traj.controls.push(ue);
                }
                traj.termination = Termination::Stopped { event: traj.events.len() - 1 };
                return Ok(traj);
            }
            t = tnew;
            y = ynew;
            k1 = ks[6];
            traj.times.push(t);
            traj.states.push(y);
            traj.controls.push(u7);
            h = hnew;
        } else {
            let hnew = h / FACC1.min(fac11 / SAFE);
            traj.stats.rejected += 1;
            last_rejected = true;
            h = hnew;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> OpenLoop<impl Fn(&[f64; 1]) -> Result<[f64; 1]>> {
        OpenLoop(|s: &[f64; 1]| Ok([-s[0]]))
    }

    #[test]
    fn linear_decay() {
        let tr = integrate(&decay(), [1.0], (0.0, 1.0), &IntegratorConfig::default(), &[]).unwrap();
        assert_eq!(tr.termination, Termination::Completed);
        assert_eq!(tr.final_time(), 1.0);
        assert!((tr.final_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn crossing_event() {
        let sys = OpenLoop(|_: &[f64; 1]| Ok([1.0]));
        let w = [Watcher::section(Direction::Up, |s: &[f64; 1]| s[0])];
        let tr = integrate(&sys, [-1.0], (0.0, 3.0), &IntegratorConfig::default(), &w).unwrap();
        assert_eq!(tr.events.len(), 1);
        assert!((tr.events[0].time - 1.0).abs() < 1e-9);
        assert_eq!(tr.events[0].direction, Direction::Up);
    }

    #[test]
    fn terminal_event_truncates() {
        let sys = OpenLoop(|_: &[f64; 1]| Ok([1.0]));
        let w = [Watcher::section(Direction::Any, |s: &[f64; 1]| s[0] - 0.5).terminal()];
        let tr = integrate(&sys, [0.0], (0.0, 3.0), &IntegratorConfig::default(), &w).unwrap();
        assert_eq!(tr.termination, Termination::Stopped { event: 0 });
        assert!((tr.final_time() - 0.5).abs() < 1e-12);
        assert_eq!(tr.controls.len(), tr.len());
    }

    #[test]
    fn direction_filter() {
        let sys = OpenLoop(|_: &[f64; 1]| Ok([1.0]));
        let w = [Watcher::section(Direction::Down, |s: &[f64; 1]| s[0])];
        let tr = integrate(&sys, [-1.0], (0.0, 3.0), &IntegratorConfig::default(), &w).unwrap();
        assert!(tr.events.is_empty());
    }

    #[test]
    fn blowup_reports_stiffness_or_fault() {
        // x' = x² escapes at t = 1
        let sys = OpenLoop(|s: &[f64; 1]| Ok([s[0] * s[0]]));
        let tr = integrate(&sys, [1.0], (0.0, 2.0), &IntegratorConfig::default(), &[]).unwrap();
        assert!(tr.failure().is_some());
        assert!((tr.final_time() - 1.0).abs() < 1e-6, "{:?} at {}", tr.termination, tr.final_time());
    }

    #[test]
    fn controller_fault_becomes_event() {
        let sys = ClosedLoop::new(
            |s: &[f64; 1], u: f64| Ok([1.0 + 0.0 * s[0] + u]),
            |s: &[f64; 1]| if s[0] > 0.5 { Err(CanardError::Overflow { exponent: 701.0 }) } else { Ok(0.0) },
        );
        let tr = integrate(&sys, [0.0], (0.0, 2.0), &IntegratorConfig::default(), &[]).unwrap();
        assert!(matches!(tr.termination, Termination::Fault { .. }));
        assert_eq!(tr.events.last().unwrap().kind, EventKind::OverflowFault);
        assert!(tr.final_state()[0] <= 0.5);
    }

    #[test]
    fn dense_interpolation() {
        let cfg = IntegratorConfig { dense_output: true, ..IntegratorConfig::with_tolerances(1e-10, 1e-12) };
        let tr = integrate(&decay(), [1.0], (0.0, 2.0), &cfg, &[]).unwrap();
        for i in 0..=40 {
            let t = 0.05 * i as f64;
            let v = tr.interpolate(t).unwrap()[0];
            assert!((v - (-t).exp()).abs() < 1e-9, "t = {t}");
        }
        assert!(tr.interpolate(2.5).is_none());
    }

    #[test]
    fn bad_inputs() {
        assert!(integrate(&decay(), [1.0], (1.0, 1.0), &IntegratorConfig::default(), &[]).is_err());
        assert!(integrate(&decay(), [f64::NAN], (0.0, 1.0), &IntegratorConfig::default(), &[]).is_err());
        let cfg = IntegratorConfig { min_step: 2.0, ..Default::default() };
        assert!(integrate(&decay(), [1.0], (0.0, 1.0), &cfg, &[]).is_err());
    }
}
