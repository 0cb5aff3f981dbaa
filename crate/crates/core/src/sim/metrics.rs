use crate::error::Result;
use crate::integrals::{eval_level_term, PhasePoint, ScaledLevel};

use super::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Scaled residual exp(2y/ε)(H − h) at every recorded state.
    pub residuals: Vec<f64>,
    pub initial: f64,
    pub terminal: f64,
    /// First recorded time with |residual| below the threshold.
    pub time_below: Option<f64>,
}

/// Scaled level residual along `traj`, evaluated at `(x − x_shift, y)` with
/// c₂ = 2 so that no exponential of the state survives on the canard itself.
pub fn convergence_metrics(traj: &Trajectory<2>, eps: f64, x_shift: f64, level: ScaledLevel, threshold: f64) -> Result<ConvergenceReport> {
    let residuals = traj
        .states
        .iter()
        .map(|s| eval_level_term(PhasePoint::new(s[0] - x_shift, s[1]), eps, 2.0, level))
        .collect::<Result<Vec<_>>>()?;
    let time_below = residuals.iter().position(|r| r.abs() < threshold).map(|i| traj.times[i]);
    Ok(ConvergenceReport {
        initial: residuals[0],
        terminal: *residuals.last().unwrap_or(&f64::NAN),
        time_below,
        residuals,
    })
}
