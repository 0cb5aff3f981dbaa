//! Mixed-mode oscillations: loop classification and a supervisor that
//! switches the composite controller between loops.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::closed_loop::VdpLoop;
use crate::controllers::{CompositeController, NeighborhoodParams, SlowManifold, Weighting, FOLD_Y};
use crate::error::{CanardError, Result};
use crate::integrals::{ControllerGains, PhasePoint};
use crate::sim::{integrate, IntegratorConfig, Termination, Trajectory, Watcher};

/// Radius of the origin disc whose entries delimit loops.
pub const DISC_RADIUS: f64 = 0.25;
/// Loops reaching beyond this abscissa jumped to the right branch.
pub const LAO_THRESHOLD: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Sao,
    Lao,
}

impl Label {
    pub fn letter(self) -> char {
        match self {
            Label::Sao => 'S',
            Label::Lao => 'L',
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Sao => "SAO",
            Label::Lao => "LAO",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopLabel {
    pub label: Label,
    pub t_start: f64,
    pub t_end: f64,
    pub max_x: f64,
    pub max_y: f64,
}

/// Compact label string, e.g. "LLLSSSS".
pub fn label_string(loops: &[LoopLabel]) -> String {
    loops.iter().map(|l| l.label.letter()).collect()
}

fn in_disc(s: &[f64; 2]) -> bool {
    s[0] * s[0] + s[1] * s[1] <= DISC_RADIUS * DISC_RADIUS
}

/// Splits a trajectory at its entries into the origin disc and labels each
/// complete loop. The part before the first entry and after the last one is
/// ignored.
pub fn classify_loops(traj: &Trajectory<2>) -> Vec<LoopLabel> {
    let mut entries = Vec::new();
    for i in 0..traj.states.len() {
        let inside = in_disc(&traj.states[i]);
        let was = i > 0 && in_disc(&traj.states[i - 1]);
        if inside && !was && i > 0 {
            entries.push(i);
        }
    }
    entries
        .windows(2)
        .map(|w| {
            let seg = &traj.states[w[0]..=w[1]];
            let max_x = seg.iter().map(|s| s[0]).fold(f64::NEG_INFINITY, f64::max);
            let max_y = seg.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max);
            LoopLabel {
                label: if max_x > LAO_THRESHOLD { Label::Lao } else { Label::Sao },
                t_start: traj.times[w[0]],
                t_end: traj.times[w[1]],
                max_x,
                max_y,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub count: usize,
    pub label: Label,
    pub y_h: f64,
    pub x_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repeat {
    Times(usize),
    Forever,
}

/// A requested loop sequence. Parsed from strings like
/// `"3L:0.75:0.01,4S:1.25:-0.01"` with an optional `*N` or `*inf` suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct MmoPattern {
    pub segments: Vec<Segment>,
    pub repeat: Repeat,
}

impl MmoPattern {
    /// Checks the head rule (x* < 0 for SAO, x* > 0 for LAO) and the SAO cap
    /// heights against the lower end `y_min` of N₁.
    pub fn validate(&self, y_min: f64) -> Result<()> {
        if self.segments.is_empty() {
            return Err(CanardError::Usage("pattern has no segments".into()));
        }
        if self.repeat == Repeat::Times(0) {
            return Err(CanardError::Usage("pattern repeat count must be positive".into()));
        }
        for s in &self.segments {
            if s.count == 0 {
                return Err(CanardError::Usage("segment counts must be positive".into()));
            }
            if !(s.y_h > 0.0) || !s.y_h.is_finite() || !s.x_star.is_finite() {
                return Err(CanardError::Usage(format!("bad segment constants y_h = {}, x* = {}", s.y_h, s.x_star)));
            }
            match s.label {
                Label::Sao if !(s.x_star < 0.0) => {
                    return Err(CanardError::Usage(format!("SAO segments need x* < 0, got {}", s.x_star)))
                }
                Label::Lao if !(s.x_star > 0.0) => {
                    return Err(CanardError::Usage(format!("LAO segments need x* > 0, got {}", s.x_star)))
                }
                _ => {}
            }
            if s.label == Label::Sao && !(s.y_h > y_min && s.y_h < FOLD_Y) {
                return Err(CanardError::Usage(format!("SAO cap y_h = {} outside ({y_min}, 4/3)", s.y_h)));
            }
        }
        Ok(())
    }

    pub fn period(&self) -> usize {
        self.segments.iter().map(|s| s.count).sum()
    }

    /// The requested segment of every loop, up to `cap` loops.
    pub fn expand(&self, cap: usize) -> Vec<Segment> {
        let reps = match self.repeat {
            Repeat::Times(n) => n,
            Repeat::Forever => usize::MAX,
        };
        let mut out = Vec::new();
        'outer: for _ in 0..reps {
            for s in &self.segments {
                for _ in 0..s.count {
                    if out.len() == cap {
                        break 'outer;
                    }
                    out.push(*s);
                }
            }
        }
        out
    }

    /// Label string of one period, e.g. "LLLSSSS".
    pub fn period_string(&self) -> String {
        self.segments.iter().flat_map(|s| std::iter::repeat(s.label.letter()).take(s.count)).collect()
    }
}

impl FromStr for MmoPattern {
    type Err = CanardError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| CanardError::Usage(format!("pattern '{s}': {why}"));
        let (body, repeat) = match s.trim().rsplit_once('*') {
            Some((b, r)) => {
                let r = r.trim();
                let rep = if r.eq_ignore_ascii_case("inf") {
                    Repeat::Forever
                } else {
                    Repeat::Times(r.parse().map_err(|_| bad("repeat must be a count or 'inf'"))?)
                };
                (b, rep)
            }
            None => (s.trim(), Repeat::Times(1)),
        };
        let mut segments = Vec::new();
        for item in body.split(',') {
            let parts: Vec<&str> = item.trim().split(':').collect();
            if parts.len() != 3 {
                return Err(bad("segments read COUNT{L|S}:y_h:x*"));
            }
            let head = parts[0];
            let (count, letter) = head.split_at(head.len().saturating_sub(1));
            let label = match letter {
                "L" | "l" => Label::Lao,
                "S" | "s" => Label::Sao,
                _ => return Err(bad("label must be L or S")),
            };
            let count = if count.is_empty() { 1 } else { count.parse().map_err(|_| bad("bad count"))? };
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("bad number"));
            segments.push(Segment { count, label, y_h: num(parts[1])?, x_star: num(parts[2])? });
        }
        Ok(Self { segments, repeat })
    }
}

impl fmt::Display for MmoPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}{}:{}:{}", s.count, s.label.letter(), s.y_h, s.x_star)?;
        }
        match self.repeat {
            Repeat::Times(1) => Ok(()),
            Repeat::Times(n) => write!(f, "*{n}"),
            Repeat::Forever => f.write_str("*inf"),
        }
    }
}

/// Parameters applied from a disc entry onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch {
    pub time: f64,
    pub state: PhasePoint,
    pub y_h: f64,
    pub x_star: f64,
}

#[derive(Debug, Clone)]
pub struct MmoRun {
    pub trajectory: Trajectory<2>,
    pub loops: Vec<LoopLabel>,
    pub switches: Vec<Switch>,
}

/// Runs the composite controller loop by loop, switching (x*, y_h) at each
/// entry into the origin disc.
#[derive(Debug, Clone)]
pub struct Supervisor {
    pub eps: f64,
    pub gains: ControllerGains,
    /// Neighbourhood template; `y_h` is overwritten per segment.
    pub nbhd: NeighborhoodParams,
    pub weighting: Weighting,
    pub cfg: IntegratorConfig,
    pub start: PhasePoint,
    /// Time allowed per loop (and for the approach to the first entry).
    pub loop_time: f64,
    /// Number of loops run for a pattern repeated forever.
    pub loop_cap: usize,
}

impl Supervisor {
    pub fn new(eps: f64, gains: ControllerGains, nbhd: NeighborhoodParams, cfg: IntegratorConfig) -> Self {
        Self {
            eps,
            gains,
            nbhd,
            weighting: Weighting::Normalized,
            cfg,
            start: PhasePoint::new(-1.5, 1.0),
            loop_time: 20.0 / eps,
            loop_cap: 64,
        }
    }

    pub fn run(&self, pattern: &MmoPattern) -> Result<MmoRun> {
        pattern.validate(self.nbhd.y_min)?;
        if !(self.loop_time > 0.0) {
            return Err(CanardError::Usage(format!("loop_time must be positive, got {}", self.loop_time)));
        }
        let requests = pattern.expand(self.loop_cap);
        let manifold = Arc::new(SlowManifold::for_neighborhoods(self.eps, &self.nbhd)?);
        let controller = |seg: &Segment| -> Result<VdpLoop> {
            let gains = ControllerGains { x_star: seg.x_star, ..self.gains };
            let nbhd = NeighborhoodParams { y_h: seg.y_h, ..self.nbhd };
            let c = CompositeController::with_manifold(gains, nbhd, self.weighting, manifold.clone())?;
            Ok(VdpLoop { eps: self.eps, controller: Some(c) })
        };
        let stop = [Watcher::disc_entry(0.0, 0.0, DISC_RADIUS).terminal()];

        let mut full: Option<Trajectory<2>> = None;
        let mut switches = Vec::new();
        let mut loops = Vec::new();
        let mut t = 0.0;
        let mut state: [f64; 2] = self.start.into();
        // piece 0 approaches the disc under the first request; piece j ≥ 1 is loop j
        for j in 0..=requests.len() {
            let seg = requests[j.saturating_sub(1)];
            if j > 0 {
                switches.push(Switch { time: t, state: state.into(), y_h: seg.y_h, x_star: seg.x_star });
            }
            let sys = controller(&seg)?;
            let piece = integrate(&sys, state, (t, t + self.loop_time), &self.cfg, &stop)?;
            if let Some(e) = piece.failure() {
                return Err(e);
            }
            let entered = matches!(piece.termination, Termination::Stopped { .. });
            t = piece.final_time();
            state = piece.final_state();
            append(&mut full, piece);
            if !entered {
                return Err(CanardError::NonConvergent(format!(
                    "no entry into the origin disc within {} time units after t = {}",
                    self.loop_time,
                    t - self.loop_time
                )));
            }
            if j > 0 {
                let traj = full.as_ref().expect("pieces appended");
                let start = switches[j - 1].time;
                let seg_states = traj.times.iter().zip(&traj.states).filter(|(tt, _)| **tt >= start);
                let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for (_, s) in seg_states {
                    max_x = max_x.max(s[0]);
                    max_y = max_y.max(s[1]);
                }
                let label = if max_x > LAO_THRESHOLD { Label::Lao } else { Label::Sao };
                loops.push(LoopLabel { label, t_start: start, t_end: t, max_x, max_y });
                if label != seg.label {
                    return Err(CanardError::PatternDeviation { achieved: label_string(&loops) });
                }
            }
        }
        Ok(MmoRun { trajectory: full.expect("at least one piece"), loops, switches })
    }
}

fn append(acc: &mut Option<Trajectory<2>>, piece: Trajectory<2>) {
    match acc {
        None => *acc = Some(piece),
        Some(a) => {
            a.times.extend_from_slice(&piece.times[1..]);
            a.states.extend_from_slice(&piece.states[1..]);
            a.controls.extend_from_slice(&piece.controls[1..]);
            a.events.extend(piece.events);
            a.dense.extend(piece.dense);
            a.stats.accepted += piece.stats.accepted;
            a.stats.rejected += piece.stats.rejected;
            a.stats.evaluations += piece.stats.evaluations;
            a.termination = piece.termination;
        }
    }
}

/// Runs `pattern` from the default start with the normalized weighting.
pub fn run_pattern(pattern: &MmoPattern, eps: f64, gains: ControllerGains, nbhd: NeighborhoodParams, cfg: &IntegratorConfig) -> Result<MmoRun> {
    Supervisor::new(eps, gains, nbhd, *cfg).run(pattern)
}
