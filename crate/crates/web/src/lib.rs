//! wasm-bindgen front end for the static page in `www/`.
//!
//! Every operation returns a [`Run`]: a flat `[x0, y0, x1, y1, ...]` point
//! buffer plus a few scalars. The Rust-side functions (`*_run`) are plain and
//! testable natively; the exported wrappers only turn errors into JS errors.

use canard_core::closed_loop::{K2Loop, VdpLoop};
use canard_core::controllers::{CompositeController, NeighborhoodParams, Weighting};
use canard_core::integrals::eval_H2;
use canard_core::mmo::{classify_loops, label_string, MmoPattern, Supervisor};
use canard_core::sim::{integrate, IntegratorConfig, Trajectory};
use canard_core::{CanardError, ControllerGains};
use wasm_bindgen::prelude::*;

/// Enough for a smooth canvas polyline.
const MAX_POINTS: usize = 4000;

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Run {
    points: Vec<f64>,
    series: Vec<f64>,
    labels: String,
    residual: f64,
}

#[wasm_bindgen]
impl Run {
    /// Phase-plane points, interleaved x, y.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    /// Secondary time series, interleaved t, value (K₂: |H₂ − h|; empty otherwise).
    #[wasm_bindgen(getter)]
    pub fn series(&self) -> Vec<f64> {
        self.series.clone()
    }

    /// Loop labels, one letter per loop (L or S).
    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> String {
        self.labels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

fn every(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

fn flatten(tr: &Trajectory<2>) -> Vec<f64> {
    let step = every(tr.states.len());
    let mut out: Vec<f64> = tr.states.iter().step_by(step).flat_map(|s| [s[0], s[1]]).collect();
    if !(tr.states.len() - 1).is_multiple_of(step) {
        let s = tr.final_state();
        out.extend([s[0], s[1]]);
    }
    out
}

fn checked(tr: Trajectory<2>) -> Result<Trajectory<2>, CanardError> {
    match tr.failure() {
        Some(e) => Err(e),
        None => Ok(tr),
    }
}

fn vdp_cfg() -> IntegratorConfig {
    IntegratorConfig { max_step: 0.5, ..IntegratorConfig::with_tolerances(1e-9, 1e-11) }
}

/// Lyapunov stabilization of the level H₂ = h in the rescaling chart, from
/// (x0, y0), for gain c1.
pub fn k2_run(h: f64, c1: f64, x0: f64, y0: f64, t_end: f64) -> Result<Run, CanardError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CanardError::Usage(format!("t_end must be positive, got {t_end}")));
    }
    let gains = ControllerGains { c1, c2: 2.0, ..Default::default() };
    let sys = K2Loop { r2: 0.0, alpha2: 1.0, gains, h, g2: None, phi2: None };
    let cfg = IntegratorConfig { max_step: 0.1, ..IntegratorConfig::with_tolerances(1e-10, 1e-13) };
    let tr = checked(integrate(&sys, [x0, y0], (0.0, t_end), &cfg, &[])?)?;
    let step = every(tr.times.len());
    let mut series = Vec::new();
    for (t, s) in tr.times.iter().zip(&tr.states).step_by(step) {
        series.extend([*t, (eval_H2(s[0], s[1])? - h).abs()]);
    }
    let last = tr.final_state();
    let residual = (eval_H2(last[0], last[1])? - h).abs();
    Ok(Run { points: flatten(&tr), series, labels: String::new(), residual })
}

/// Van der Pol under the composite controller with cap y_h and target x*.
pub fn vdp_run(eps: f64, y_h: f64, x_star: f64, t_end: f64) -> Result<Run, CanardError> {
    let gains = ControllerGains { c1: 1.0, k1: 1.0, x_star, ..Default::default() };
    let c = CompositeController::new(eps, gains, NeighborhoodParams::defaults(eps, y_h), Weighting::Normalized)?;
    let sys = VdpLoop { eps, controller: Some(c) };
    let tr = checked(integrate(&sys, [-1.5, 1.0], (0.0, t_end), &vdp_cfg(), &[])?)?;
    let labels = label_string(&classify_loops(&tr));
    Ok(Run { points: flatten(&tr), series: Vec::new(), labels, residual: f64::NAN })
}

/// Drives the oscillator through `pattern`, e.g. `"2L:0.75:0.01,3S:1.25:-0.01"`.
pub fn mmo_run(pattern: &str, eps: f64) -> Result<Run, CanardError> {
    let pattern: MmoPattern = pattern.parse()?;
    let gains = ControllerGains { c1: 1.0, k1: 1.0, ..Default::default() };
    let mut sup = Supervisor::new(eps, gains, NeighborhoodParams::defaults(eps, 1.25), vdp_cfg());
    sup.loop_cap = 24;
    let run = sup.run(&pattern)?;
    Ok(Run { points: flatten(&run.trajectory), series: Vec::new(), labels: label_string(&run.loops), residual: f64::NAN })
}

fn js(e: CanardError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn k2_stabilize(h: f64, c1: f64, x0: f64, y0: f64) -> Result<Run, JsError> {
    k2_run(h, c1, x0, y0, 60.0).map_err(js)
}

#[wasm_bindgen]
pub fn vdp_canard(y_h: f64, x_star: f64) -> Result<Run, JsError> {
    vdp_run(0.01, y_h, x_star, 1500.0).map_err(js)
}

#[wasm_bindgen]
pub fn mmo(pattern: &str, eps: f64) -> Result<Run, JsError> {
    mmo_run(pattern, eps).map_err(js)
}

/// Points of the critical manifold y = x² − x³/3 on [x0, x1].
#[wasm_bindgen]
pub fn critical_manifold(x0: f64, x1: f64) -> Vec<f64> {
    (0..=200).flat_map(|k| {
        let x = x0 + (x1 - x0) * k as f64 / 200.0;
        [x, x * x - x * x * x / 3.0]
    })
    .collect()
}
