//! The convex trajectory subproblem solved at every SCA iteration.
//!
//! Each scheduled slot contributes slack distances `u >= d_UG` and
//! `v >= d_UR` whose linearized rates are maximized. The reverse constraints
//! `u^2 >= ||q - w||^2 + H^2` are replaced by their first-order restriction
//! `||q - w||^2 + H^2 + e^2 - 2 e u <= 0` around the expansion value `e`,
//! which keeps every iterate feasible for the original problem.

use std::f64::consts::LN_2;

use serde::Serialize;

use super::barrier::{solve_barrier, BarrierProgram, ConstraintEval};
use super::coefficients::abc_coefficients;
use super::{is_pinned, Trajectory};
use crate::channel::ChannelSample;
use crate::config::{ScaHyperParams, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::distances;
use crate::rate::theta;
use crate::scheduling::ScheduleMatrix;

/// One slack distance of one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackTerm {
    /// Horizontal position of the far end (user or RIS).
    pub anchor: [f64; 2],
    /// Squared height difference to the far end.
    pub height2: f64,
    /// Expansion value `e` of the slack.
    pub expansion: f64,
    /// Derivative of the objective with respect to the slack, negative.
    pub slope: f64,
}

impl SlackTerm {
    /// Smallest slack allowed with the UAV at `q`.
    pub fn lower_bound(&self, q: [f64; 2]) -> f64 {
        let d2 = (q[0] - self.anchor[0]).powi(2) + (q[1] - self.anchor[1]).powi(2) + self.height2;
        (d2 + self.expansion * self.expansion) / (2.0 * self.expansion)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SlotTerms {
    pub user: Option<usize>,
    /// UAV-user slack, absent when its slope is not negative.
    pub u: Option<SlackTerm>,
    /// UAV-RIS slack, absent when its slope is not negative.
    pub v: Option<SlackTerm>,
}

/// Slack values per slot, `None` where the slot has no such term.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SlackVars {
    pub u: Vec<Option<f64>>,
    pub v: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    MaxIter,
    /// The mobility constraints leave only the straight line.
    Pinned,
    /// Every slope vanished; the expansion point is returned.
    Stationary,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Linearized objective at the solution.
    pub objective: f64,
    /// Linearized objective after each barrier stage.
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub newton_iters: usize,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct SlotIndex {
    q: Option<usize>,
    u: Option<usize>,
    v: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ConvexSubproblem {
    pub q0: [f64; 2],
    pub qf: [f64; 2],
    pub step_max: f64,
    pub expansion: Trajectory,
    pub slots: Vec<SlotTerms>,
    /// Linearized objective at the expansion point.
    pub constant: f64,
    pub pinned: bool,
    layout: Vec<SlotIndex>,
    cost: Vec<f64>,
}

impl ConvexSubproblem {
    pub fn new(
        cfg: &ScenarioConfig,
        expansion: Trajectory,
        slots: Vec<SlotTerms>,
        constant: f64,
    ) -> Result<Self> {
        expansion.check_feasible(cfg)?;
        if slots.len() != cfg.n_slots {
            return Err(Error::Dimension(format!("{} slot terms for N = {}", slots.len(), cfg.n_slots)));
        }
        for (n, s) in slots.iter().enumerate() {
            let q = expansion.slot_position(n);
            for t in s.u.iter().chain(&s.v) {
                if !(t.expansion > 0.0 && t.slope <= 0.0) {
                    return Err(Error::solver(
                        "subproblem",
                        format!("slot {n}: slack needs positive expansion and nonpositive slope"),
                    ));
                }
                if t.lower_bound(q) > t.expansion * (1.0 + 1e-9) + 1e-9 {
                    return Err(Error::solver(
                        "subproblem",
                        format!("slot {n}: expansion point violates its slack constraint"),
                    ));
                }
            }
        }
        let pinned = is_pinned(cfg);
        let n_slots = cfg.n_slots;
        let mut layout = Vec::with_capacity(n_slots);
        let mut cost = Vec::new();
        for (n, s) in slots.iter().enumerate() {
            let mut idx = SlotIndex::default();
            if !pinned && n + 1 < n_slots {
                idx.q = Some(cost.len());
                cost.extend([0.0, 0.0]);
            }
            if let Some(t) = &s.u {
                idx.u = Some(cost.len());
                cost.push(-t.slope);
            }
            if let Some(t) = &s.v {
                idx.v = Some(cost.len());
                cost.push(-t.slope);
            }
            layout.push(idx);
        }
        Ok(ConvexSubproblem {
            q0: cfg.q0,
            qf: cfg.qf,
            step_max: cfg.step_max(),
            expansion,
            slots,
            constant,
            pinned,
            layout,
            cost,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    /// Waypoint `i` (0..=N) under the variables `x`.
    fn waypoint(&self, x: &[f64], i: usize) -> ([f64; 2], Option<usize>) {
        if i == 0 {
            return (self.q0, None);
        }
        match self.layout[i - 1].q {
            Some(j) => ([x[j], x[j + 1]], Some(j)),
            None if i == self.num_slots() => (self.qf, None),
            None => (self.expansion.points[i], None),
        }
    }

    /// Linearized objective at variables `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for (s, idx) in self.slots.iter().zip(&self.layout) {
            if let (Some(t), Some(j)) = (&s.u, idx.u) {
                v += t.slope * (x[j] - t.expansion);
            }
            if let (Some(t), Some(j)) = (&s.v, idx.v) {
                v += t.slope * (x[j] - t.expansion);
            }
        }
        v
    }

    fn start_point(&self) -> Vec<f64> {
        let n = self.num_slots();
        let d2 = self.step_max * self.step_max;
        let mut points = self.expansion.points.clone();
        let tight = points
            .windows(2)
            .any(|w| (w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) >= d2 * (1.0 - 1e-9));
        if tight && !self.pinned {
            // Pull slightly toward the straight line, which has slack on every step.
            let s = 1e-2;
            for (i, p) in points.iter_mut().enumerate() {
                let r = i as f64 / n as f64;
                let line = [self.q0[0] + r * (self.qf[0] - self.q0[0]), self.q0[1] + r * (self.qf[1] - self.q0[1])];
                p[0] = (1.0 - s) * p[0] + s * line[0];
                p[1] = (1.0 - s) * p[1] + s * line[1];
            }
        }
        let mut x = vec![0.0; self.cost.len()];
        for (slot, (s, idx)) in self.slots.iter().zip(&self.layout).enumerate() {
            let q = points[slot + 1];
            if let Some(j) = idx.q {
                x[j] = q[0];
                x[j + 1] = q[1];
            }
            for (t, j) in [(&s.u, idx.u), (&s.v, idx.v)] {
                if let (Some(t), Some(j)) = (t, j) {
                    // Start well inside so the first centering stage is cheap.
                    x[j] = t.lower_bound(q) + 0.01 * t.expansion;
                }
            }
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> (Trajectory, SlackVars) {
        let n = self.num_slots();
        let points = (0..=n).map(|i| self.waypoint(x, i).0).collect();
        let pick = |j: Option<usize>, present: bool| if present { j.map(|j| x[j]) } else { None };
        let u = self.slots.iter().zip(&self.layout).map(|(s, i)| pick(i.u, s.u.is_some())).collect();
        let v = self.slots.iter().zip(&self.layout).map(|(s, i)| pick(i.v, s.v.is_some())).collect();
        (Trajectory { points }, SlackVars { u, v })
    }

    /// Largest relative excess of a slack over its lower bound.
    pub fn slack_gap(&self, traj: &Trajectory, slack: &SlackVars) -> f64 {
        let mut worst: f64 = 0.0;
        for (n, s) in self.slots.iter().enumerate() {
            let q = traj.slot_position(n);
            if let (Some(t), Some(u)) = (&s.u, slack.u[n]) {
                worst = worst.max((u - t.lower_bound(q)) / t.lower_bound(q));
            }
            if let (Some(t), Some(v)) = (&s.v, slack.v[n]) {
                worst = worst.max((v - t.lower_bound(q)) / t.lower_bound(q));
            }
        }
        worst
    }
}

fn slack_constraint(term: &SlackTerm, q: [f64; 2], qi: Option<usize>, s: f64, si: usize) -> ConstraintEval {
    let dx = q[0] - term.anchor[0];
    let dy = q[1] - term.anchor[1];
    let e = term.expansion;
    let mut c = ConstraintEval {
        value: dx * dx + dy * dy + term.height2 + e * e - 2.0 * e * s,
        grad: vec![(si, -2.0 * e)],
        hess: Vec::new(),
    };
    if let Some(j) = qi {
        c.grad.extend([(j, 2.0 * dx), (j + 1, 2.0 * dy)]);
        c.hess.extend([(j, j, 2.0), (j + 1, j + 1, 2.0)]);
    }
    c
}

impl BarrierProgram for ConvexSubproblem {
    fn dim(&self) -> usize {
        self.cost.len()
    }

    fn cost(&self) -> &[f64] {
        &self.cost
    }

    fn constraints(&self, x: &[f64]) -> Vec<ConstraintEval> {
        let n = self.num_slots();
        let d2 = self.step_max * self.step_max;
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            let (a, ai) = self.waypoint(x, i);
            let (b, bi) = self.waypoint(x, i + 1);
            if ai.is_none() && bi.is_none() {
                continue;
            }
            let dx = b[0] - a[0];
            let dy = b[1] - a[1];
            let mut c = ConstraintEval { value: dx * dx + dy * dy - d2, ..Default::default() };
            if let Some(j) = bi {
                c.grad.extend([(j, 2.0 * dx), (j + 1, 2.0 * dy)]);
                c.hess.extend([(j, j, 2.0), (j + 1, j + 1, 2.0)]);
            }
            if let Some(j) = ai {
                c.grad.extend([(j, -2.0 * dx), (j + 1, -2.0 * dy)]);
                c.hess.extend([(j, j, 2.0), (j + 1, j + 1, 2.0)]);
            }
            if let (Some(p), Some(q)) = (ai, bi) {
                c.hess.extend([(p, q, -2.0), (q, p, -2.0), (p + 1, q + 1, -2.0), (q + 1, p + 1, -2.0)]);
            }
            out.push(c);
        }
        for (slot, (s, idx)) in self.slots.iter().zip(&self.layout).enumerate() {
            let (q, qi) = self.waypoint(x, slot + 1);
            if let (Some(t), Some(j)) = (&s.u, idx.u) {
                out.push(slack_constraint(t, q, qi, x[j], j));
            }
            if let (Some(t), Some(j)) = (&s.v, idx.v) {
                out.push(slack_constraint(t, q, qi, x[j], j));
            }
        }
        out
    }
}

/// Linearizes the sample-average rate of the scheduled users around
/// `expansion`. `samples[n]` holds the channel draws of slot `n` taken at
/// `expansion.slot_position(n)`; `phases[n]` is the phase vector of slot `n`.
pub fn build_subproblem(
    cfg: &ScenarioConfig,
    expansion: &Trajectory,
    schedule: &ScheduleMatrix,
    phases: &[Vec<f64>],
    samples: &[Vec<ChannelSample>],
) -> Result<ConvexSubproblem> {
    let n_slots = cfg.n_slots;
    if schedule.num_slots() != n_slots || phases.len() != n_slots || samples.len() != n_slots {
        return Err(Error::Dimension("schedule, phases and samples must cover N slots".into()));
    }
    let ris = [cfg.ris_pos[0], cfg.ris_pos[1]];
    let mut constant = 0.0;
    let mut slots = Vec::with_capacity(n_slots);
    for n in 0..n_slots {
        let Some(k) = schedule.user(n) else {
            slots.push(SlotTerms::default());
            continue;
        };
        let q = expansion.slot_position(n);
        let dist = distances(q, cfg)?;
        let (u_j, v_j) = (dist.uav_user[k], dist.uav_ris);
        let th = theta(&phases[n]);
        let batch = &samples[n];
        if batch.is_empty() {
            return Err(Error::Dimension(format!("slot {n} has no channel samples")));
        }
        let weight = 1.0 / (n_slots as f64 * batch.len() as f64);
        let (mut su, mut sv) = (0.0, 0.0);
        for s in batch {
            let coef = abc_coefficients(s, &th, k, u_j, v_j, cfg)?;
            let t = coef.taylor(u_j, v_j, cfg);
            constant += weight * t.d.log2();
            su += weight * t.e / (t.d * LN_2);
            sv += weight * t.f / (t.d * LN_2);
        }
        let user = cfg.user_pos[k];
        let term = |anchor: [f64; 2], h: f64, e: f64, slope: f64| {
            (slope < 0.0).then_some(SlackTerm { anchor, height2: h * h, expansion: e, slope })
        };
        slots.push(SlotTerms {
            user: Some(k),
            u: term([user[0], user[1]], cfg.z_f - user[2], u_j, su),
            v: term(ris, cfg.z_f - cfg.ris_pos[2], v_j, sv),
        });
    }
    ConvexSubproblem::new(cfg, expansion.clone(), slots, constant)
}

/// Solves the subproblem and returns the new trajectory with its slacks.
pub fn solve_subproblem(
    prob: &ConvexSubproblem,
    params: &ScaHyperParams,
) -> Result<(Trajectory, SlackVars, SolveReport)> {
    let x0 = prob.start_point();
    if prob.cost.iter().all(|c| *c == 0.0) {
        let n = prob.num_slots();
        let slack = SlackVars { u: vec![None; n], v: vec![None; n] };
        let report = SolveReport {
            status: SolveStatus::Stationary,
            objective: prob.constant,
            objective_trace: vec![prob.constant],
            kkt_residual: 0.0,
            max_violation: 0.0,
            newton_iters: 0,
            gap: 0.0,
        };
        return Ok((prob.expansion.clone(), slack, report));
    }
    let r = solve_barrier(prob, x0, params).map_err(|e| e.within("trajectory subproblem"))?;
    let (traj, slack) = prob.unpack(&r.x);
    let status = if prob.pinned {
        SolveStatus::Pinned
    } else if r.converged {
        SolveStatus::Solved
    } else {
        SolveStatus::MaxIter
    };
    let objective = prob.objective(&r.x);
    let shift = prob.constant
        - prob
            .slots
            .iter()
            .flat_map(|s| s.u.iter().chain(&s.v))
            .map(|t| t.slope * t.expansion)
            .sum::<f64>();
    let report = SolveReport {
        status,
        objective,
        // objective = constant + sum slope (s - e) = shift - c^T x
        objective_trace: r.trace.iter().map(|c| shift - c).collect(),
        kkt_residual: r.kkt_residual,
        max_violation: r.max_violation,
        newton_iters: r.newton_iters,
        gap: r.gap,
    };
    Ok((traj, slack, report))
}
