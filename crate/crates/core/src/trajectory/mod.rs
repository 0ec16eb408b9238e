//! UAV trajectories and their successive convex approximation.
//!
//! A trajectory holds `N + 1` horizontal waypoints `q[0..=N]` with
//! `q[0] = q0` and `q[N] = qF`; slot `n` (0-based) is served from `q[n + 1]`.

mod barrier;
mod coefficients;
mod sca;
mod subproblem;

pub use barrier::{solve_barrier, BarrierProgram, BarrierReport, ConstraintEval};
pub use coefficients::{abc_coefficients, taylor_rate, true_rate_uv, RateCoefficients, TaylorTerms};
pub use sca::{sample_average_objective, sca_trajectory, ScaOutcome};
pub use subproblem::{build_subproblem, solve_subproblem, ConvexSubproblem, SlackTerm, SlackVars, SlotTerms, SolveReport, SolveStatus};

use std::io::Write;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::dist2;

/// Absolute slack on the squared step constraint.
pub const STEP_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn num_slots(&self) -> usize {
        self.points.len() - 1
    }

    /// Waypoint serving slot `n`.
    pub fn slot_position(&self, n: usize) -> [f64; 2] {
        self.points[n + 1]
    }

    /// Uniformly spaced waypoints on the segment `q0 -> qF`.
    pub fn straight_line(cfg: &ScenarioConfig) -> Self {
        let n = cfg.n_slots;
        let points = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                [
                    cfg.q0[0] + s * (cfg.qf[0] - cfg.q0[0]),
                    cfg.q0[1] + s * (cfg.qf[1] - cfg.q0[1]),
                ]
            })
            .collect();
        Trajectory { points }
    }

    /// Fly to `hover` at full speed, stay there as long as possible, then fly
    /// to `qF` at full speed. Falls back to the straight line when `hover`
    /// cannot be reached within the horizon.
    pub fn fly_hover_fly(cfg: &ScenarioConfig, hover: [f64; 2]) -> Self {
        let n = cfg.n_slots;
        let step = cfg.step_max();
        let l_in = dist2(cfg.q0, hover);
        let l_out = dist2(hover, cfg.qf);
        let slots_in = (l_in / step).ceil() as usize;
        let slots_out = (l_out / step).ceil() as usize;
        if slots_in + slots_out > n {
            return Self::straight_line(cfg);
        }
        let toward = |from: [f64; 2], to: [f64; 2], travel: f64| {
            let d = dist2(from, to);
            if travel >= d || d == 0.0 {
                to
            } else {
                let s = travel / d;
                [from[0] + s * (to[0] - from[0]), from[1] + s * (to[1] - from[1])]
            }
        };
        let points = (0..=n)
            .map(|i| {
                let remaining = (n - i) as f64 * step;
                if remaining < l_out {
                    toward(cfg.qf, hover, remaining)
                } else {
                    toward(cfg.q0, hover, i as f64 * step)
                }
            })
            .collect();
        Trajectory { points }
    }

    /// The heuristic benchmark: hover above the RIS.
    pub fn heuristic(cfg: &ScenarioConfig) -> Self {
        Self::fly_hover_fly(cfg, [cfg.ris_pos[0], cfg.ris_pos[1]])
    }

    /// Largest violation of the step and endpoint constraints (0 if feasible).
    pub fn max_violation(&self, cfg: &ScenarioConfig) -> f64 {
        let d2 = cfg.step_max().powi(2);
        let mut worst: f64 = 0.0;
        for w in self.points.windows(2) {
            let s = (w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2);
            worst = worst.max(s - d2);
        }
        let first = *self.points.first().expect("nonempty trajectory");
        let last = *self.points.last().expect("nonempty trajectory");
        worst.max(dist2(first, cfg.q0)).max(dist2(last, cfg.qf))
    }

    pub fn check_feasible(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.points.len() != cfg.n_slots + 1 {
            return Err(Error::Dimension(format!(
                "trajectory has {} waypoints, expected N + 1 = {}",
                self.points.len(),
                cfg.n_slots + 1
            )));
        }
        let v = self.max_violation(cfg);
        if v > STEP_TOL {
            return Err(Error::Geometry(format!("trajectory violates mobility constraints by {v:.3e}")));
        }
        Ok(())
    }

    /// Smallest horizontal distance from a waypoint to `target`.
    pub fn closest_approach(&self, target: [f64; 2]) -> f64 {
        self.points
            .iter()
            .map(|p| dist2(*p, target))
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `n,x_m,y_m`, one row per waypoint.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,x_m,y_m")?;
        for (n, p) in self.points.iter().enumerate() {
            writeln!(out, "{n},{},{}", p[0], p[1])?;
        }
        Ok(())
    }
}

/// True when the only feasible trajectory is the straight line.
pub fn is_pinned(cfg: &ScenarioConfig) -> bool {
    let span = dist2(cfg.q0, cfg.qf);
    span >= cfg.n_slots as f64 * cfg.step_max() * (1.0 - 1e-9)
}
