use serde::Serialize;

use super::subproblem::{build_subproblem, solve_subproblem, SlackVars, SolveReport, SolveStatus};
use super::Trajectory;
use crate::channel::{ChannelSample, ChannelStream, SiteModel};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::par;
use crate::rate::{mrt_rate, theta};
use crate::scheduling::ScheduleMatrix;

/// Halvings of the step toward the subproblem solution before giving up.
const MAX_BACKTRACK: u32 = 10;

#[derive(Clone, Debug, Serialize)]
pub struct ScaOutcome {
    pub trajectory: Trajectory,
    /// Slacks of the last subproblem solution.
    pub slack: SlackVars,
    /// Sample-average objective of every accepted iterate, starting point first.
    pub objective_trace: Vec<f64>,
    pub reports: Vec<SolveReport>,
    /// Largest relative slack excess over all subproblem solutions.
    pub max_slack_gap: f64,
    pub outer_iters: usize,
}

/// Draws `draws` realizations of the scheduled user's links for every slot,
/// with the UAV on `traj`. Idle slots get no samples.
pub(crate) fn slot_samples(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    schedule: &ScheduleMatrix,
    stream: ChannelStream,
    draws: usize,
) -> Result<Vec<Vec<ChannelSample>>> {
    par::map(cfg.n_slots, |n| {
        let Some(k) = schedule.user(n) else {
            return Ok(Vec::new());
        };
        let site = SiteModel::new(traj.slot_position(n), cfg)?;
        Ok((0..draws as u64).map(|i| site.sample_user(cfg, n, stream, i, k)).collect())
    })
    .into_iter()
    .collect()
}

/// `(1 / (N I)) sum_n sum_i R_{k_n}` with MRT, channels drawn on `traj`.
pub fn sample_average_objective(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    schedule: &ScheduleMatrix,
    phases: &[Vec<f64>],
    stream: ChannelStream,
    draws: usize,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::Dimension("sample average needs at least one draw".into()));
    }
    let samples = slot_samples(cfg, traj, schedule, stream, draws)?;
    let total: f64 = samples
        .iter()
        .enumerate()
        .map(|(n, batch)| {
            let Some(k) = schedule.user(n) else { return 0.0 };
            let th = theta(&phases[n]);
            batch.iter().map(|s| mrt_rate(s, &th, k, cfg)).sum::<f64>()
        })
        .sum();
    Ok(total / (cfg.n_slots as f64 * draws as f64))
}

/// Successive convex approximation of the trajectory for a fixed schedule and
/// fixed per-slot phases. Each iterate is accepted only if it does not lower
/// the sample-average objective, so the trace is monotone.
pub fn sca_trajectory(
    cfg: &ScenarioConfig,
    schedule: &ScheduleMatrix,
    phases: &[Vec<f64>],
    init: &Trajectory,
    stream: ChannelStream,
    draws: usize,
) -> Result<ScaOutcome> {
    init.check_feasible(cfg).map_err(|e| e.within("initial trajectory"))?;
    let params = &cfg.sca;
    let mut traj = init.clone();
    let mut obj = sample_average_objective(cfg, &traj, schedule, phases, stream, draws)?;
    let mut trace = vec![obj];
    let mut reports = Vec::new();
    let mut slack = SlackVars::default();
    let mut max_slack_gap: f64 = 0.0;
    let mut outer_iters = 0;
    for _ in 0..params.max_outer_iters {
        outer_iters += 1;
        let samples = slot_samples(cfg, &traj, schedule, stream, draws)?;
        let prob = build_subproblem(cfg, &traj, schedule, phases, &samples)?;
        let (cand, cand_slack, report) = solve_subproblem(&prob, params)?;
        max_slack_gap = max_slack_gap.max(prob.slack_gap(&cand, &cand_slack));
        let status = report.status;
        reports.push(report);
        slack = cand_slack;
        if status == SolveStatus::Stationary {
            break;
        }
        let mut accepted = None;
        for h in 0..=MAX_BACKTRACK {
            let s = 0.5f64.powi(h as i32);
            let trial = Trajectory {
                points: traj
                    .points
                    .iter()
                    .zip(&cand.points)
                    .map(|(a, b)| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
                    .collect(),
            };
            let o = sample_average_objective(cfg, &trial, schedule, phases, stream, draws)?;
            if o >= obj {
                accepted = Some((trial, o));
                break;
            }
        }
        let Some((next, next_obj)) = accepted else {
            break;
        };
        let gain = next_obj - obj;
        traj = next;
        obj = next_obj;
        trace.push(obj);
        if gain <= params.obj_tol * obj.abs().max(1e-12) || status == SolveStatus::Pinned {
            break;
        }
    }
    Ok(ScaOutcome { trajectory: traj, slack, objective_trace: trace, reports, max_slack_gap, outer_iters })
}
