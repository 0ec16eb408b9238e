//! The offline alternating design, the online controller, the benchmark
//! schemes and Monte-Carlo evaluation campaigns.
//!
//! All schemes evaluated for one configuration share the evaluation stream,
//! so their rates are paired realization by realization.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use num_complex::Complex64;

use crate::channel::{ChannelSample, ChannelStream, SiteModel};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::par;
use crate::rate::{bits, effective_channel_unchecked, norm_sqr, theta, EvalResult};
use crate::scheduling::{offline_schedule, ScheduleMatrix, ScheduleOptions};
use crate::ssca::{batch_objective, optimize_phases, PhaseSchedule, PhaseTargets};
use crate::trajectory::{sample_average_objective, sca_trajectory, Trajectory};

/// Note attached to every full-I-CSI result.
pub const FULL_ICSI_NOTE: &str = "full_icsi re-optimizes phases, scheduling and beamforming per \
realization on the hybrid trajectory; the trajectory itself is not re-optimized, so the value is \
a lower bound on the clairvoyant joint optimum";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    Hybrid,
    OfflineOnly,
    FullIcsi,
    Dcm,
    HeuristicTrajectory,
    RandomPhase,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::Hybrid,
        SchemeId::OfflineOnly,
        SchemeId::FullIcsi,
        SchemeId::Dcm,
        SchemeId::HeuristicTrajectory,
        SchemeId::RandomPhase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Hybrid => "hybrid",
            SchemeId::OfflineOnly => "offline_only",
            SchemeId::FullIcsi => "full_icsi",
            SchemeId::Dcm => "dcm",
            SchemeId::HeuristicTrajectory => "heuristic_trajectory",
            SchemeId::RandomPhase => "random_phase",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Blocks held fixed by a benchmark instead of being optimized.
#[derive(Clone, Debug, Default)]
pub struct OfflineOptions {
    pub fixed_trajectory: Option<Trajectory>,
    /// Per-slot phases shared by all users.
    pub fixed_phases: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OfflineSolution {
    pub trajectory: Trajectory,
    pub phases: PhaseSchedule,
    pub schedule: ScheduleMatrix,
    /// Held-out objective after each round.
    pub objective_trace: Vec<f64>,
    /// Standard error of the held-out objective after each round.
    pub objective_se: Vec<f64>,
    /// Sample-average objective of each SCA outer iteration, per round.
    pub sca_traces: Vec<Vec<f64>>,
    pub rounds: usize,
}

fn master(cfg: &ScenarioConfig) -> ChannelStream {
    ChannelStream::new(cfg.seed)
}

/// Per-slot held-out objective draws, as the per-realization slot average.
fn holdout_draws(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    schedule: &ScheduleMatrix,
    phases: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let stream = master(cfg).named("holdout");
    let size = cfg.pipeline.holdout_size.max(1);
    let sites = slot_sites(cfg, traj)?;
    Ok(par::map(size, |i| {
        let mut total = 0.0;
        for (n, site) in sites.iter().enumerate() {
            if let Some(k) = schedule.user(n) {
                let s = site.sample_user(cfg, n, stream, i as u64, k);
                let h = effective_channel_unchecked(&s, &theta(&phases[n]), k);
                total += bits(cfg.snr_scale() * norm_sqr(&h));
            }
        }
        total / cfg.n_slots as f64
    }))
}

fn slot_sites(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<Vec<SiteModel>> {
    (0..cfg.n_slots).map(|n| SiteModel::new(traj.slot_position(n), cfg)).collect()
}

/// Sample-average rate of every user in every slot under its own phases.
fn rate_table(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    phases: &PhaseSchedule,
    stream: ChannelStream,
) -> Result<Vec<Vec<f64>>> {
    let k_users = cfg.num_users();
    let sites = slot_sites(cfg, traj)?;
    let size = cfg.batch_size.max(1);
    let cells = par::map(k_users * cfg.n_slots, |j| {
        let (k, n) = (j / cfg.n_slots, j % cfg.n_slots);
        let batch: Vec<_> = (0..size as u64).map(|i| sites[n].sample_user(cfg, n, stream, i, k)).collect();
        batch_objective(&batch, &phases.per_user[k][n], k, cfg)
    });
    Ok(cells.chunks(cfg.n_slots).map(|c| c.to_vec()).collect())
}

/// Starting trajectories tried in the first round: the straight line, and
/// fly-hover-fly paths over the RIS and over each user. Duplicates (targets
/// that cannot be reached fall back to the straight line) are dropped.
pub fn candidate_starts(cfg: &ScenarioConfig) -> Vec<Trajectory> {
    let mut out = vec![Trajectory::straight_line(cfg), Trajectory::heuristic(cfg)];
    out.extend(cfg.user_pos.iter().map(|u| Trajectory::fly_hover_fly(cfg, [u[0], u[1]])));
    let mut unique: Vec<Trajectory> = Vec::new();
    for t in out {
        if !unique.contains(&t) {
            unique.push(t);
        }
    }
    unique
}

struct RoundState {
    traj: Trajectory,
    phases: PhaseSchedule,
    schedule: ScheduleMatrix,
    sca_trace: Option<Vec<f64>>,
    holdout: EvalResult,
}

/// One pass of phases, scheduling and trajectory.
fn offline_round(
    cfg: &ScenarioConfig,
    opts: &OfflineOptions,
    round: usize,
    traj: Trajectory,
    phases: PhaseSchedule,
    schedule: ScheduleMatrix,
) -> Result<RoundState> {
    let root = master(cfg);
    let ctx = |stage: &str| format!("round {round}, {stage}");
    let mut phases = phases;
    let mut traj = traj;
    if opts.fixed_phases.is_none() {
        let prev = (round > 0).then_some(&phases);
        phases = optimize_phases(cfg, &traj, &schedule, prev, root.named("ssca").child(round as u64), PhaseTargets::AllUsers)
            .map_err(|e| e.within(&ctx("phase optimization")))?;
    }
    let table = rate_table(cfg, &traj, &phases, root.named("schedule").child(round as u64))
        .map_err(|e| e.within(&ctx("scheduling")))?;
    let schedule = offline_schedule(&table, &ScheduleOptions::default()).map_err(|e| e.within(&ctx("scheduling")))?;
    phases.recombine(&schedule);
    let mut sca_trace = None;
    if opts.fixed_trajectory.is_none() {
        let out = sca_trajectory(
            cfg,
            &schedule,
            &phases.combined,
            &traj,
            root.named("sca").child(round as u64),
            cfg.batch_size.max(1),
        )
        .map_err(|e| e.within(&ctx("trajectory")))?;
        traj = out.trajectory;
        sca_trace = Some(out.objective_trace);
    }
    let holdout = EvalResult::from_draws(holdout_draws(cfg, &traj, &schedule, &phases.combined)?, Vec::new());
    Ok(RoundState { traj, phases, schedule, sca_trace, holdout })
}

/// Alternates phase optimization, scheduling and trajectory design until the
/// held-out objective settles. Without a fixed trajectory the first round is
/// run from every [`candidate_starts`] entry and the best held-out result is
/// continued.
pub fn offline_optimize(cfg: &ScenarioConfig, opts: &OfflineOptions) -> Result<OfflineSolution> {
    cfg.validate()?;
    let k_users = cfg.num_users();
    let starts = match &opts.fixed_trajectory {
        Some(t) => {
            t.check_feasible(cfg).map_err(|e| e.within("fixed trajectory"))?;
            vec![t.clone()]
        }
        None => candidate_starts(cfg),
    };
    let phases = match &opts.fixed_phases {
        Some(p) => {
            if p.len() != cfg.n_slots || p.iter().any(|v| v.len() != cfg.num_elements()) {
                return Err(Error::Dimension("fixed phases must be N x M".into()));
            }
            PhaseSchedule { per_user: vec![p.clone(); k_users], combined: p.clone() }
        }
        None => PhaseSchedule::zeros(cfg),
    };
    let schedule = ScheduleMatrix::constant(k_users, cfg.n_slots, 0);
    let mut best: Option<RoundState> = None;
    for t in starts {
        let r = offline_round(cfg, opts, 0, t, phases.clone(), schedule.clone())?;
        if best.as_ref().is_none_or(|b| r.holdout.mean_rate > b.holdout.mean_rate) {
            best = Some(r);
        }
    }
    let mut state = best.expect("at least one start");
    let mut trace = vec![state.holdout.mean_rate];
    let mut trace_se = vec![state.holdout.std_error];
    let mut sca_traces: Vec<Vec<f64>> = state.sca_trace.take().into_iter().collect();
    let mut rounds = 1;
    for round in 1..cfg.pipeline.max_rounds.max(1) {
        let prev = state.holdout.mean_rate;
        let next = offline_round(cfg, opts, round, state.traj.clone(), state.phases.clone(), state.schedule.clone())?;
        rounds += 1;
        state = next;
        trace.push(state.holdout.mean_rate);
        trace_se.push(state.holdout.std_error);
        sca_traces.extend(state.sca_trace.take());
        if (state.holdout.mean_rate - prev).abs() <= cfg.pipeline.round_tol * prev.abs().max(1e-12) {
            break;
        }
    }
    Ok(OfflineSolution {
        trajectory: state.traj,
        phases: state.phases,
        schedule: state.schedule,
        objective_trace: trace,
        objective_se: trace_se,
        sca_traces,
        rounds,
    })
}

/// Paired evaluation of one offline solution on the evaluation stream.
#[derive(Clone, Debug)]
pub struct OnlineEvaluation {
    /// Online argmax scheduling with MRT.
    pub hybrid: EvalResult,
    /// Offline schedule with MRT on the same realizations.
    pub offline_only: EvalResult,
    /// Per-slot user picked online in the first realization.
    pub first_online_users: Vec<usize>,
}

fn eval_stream(cfg: &ScenarioConfig) -> ChannelStream {
    master(cfg).named("eval")
}

/// Online rates, offline-schedule rates and online picks of one realization.
type SlotRates = (Vec<f64>, Vec<f64>, Vec<usize>);

/// Draws `realizations` channel realizations along the offline trajectory and
/// records, per realization, the slot-averaged rates of online and offline
/// scheduling.
pub fn online_run(cfg: &ScenarioConfig, sol: &OfflineSolution, realizations: usize) -> Result<OnlineEvaluation> {
    if realizations == 0 {
        return Err(Error::Dimension("evaluation needs at least one realization".into()));
    }
    let stream = eval_stream(cfg);
    let sites = slot_sites(cfg, &sol.trajectory)?;
    let thetas: Vec<_> = sol.phases.combined.iter().map(|p| theta(p)).collect();
    let n_slots = cfg.n_slots;
    let per_real = par::map(realizations, |r| {
        let mut online = vec![0.0; n_slots];
        let mut offline = vec![0.0; n_slots];
        let mut users = vec![0; n_slots];
        for (n, site) in sites.iter().enumerate() {
            let s = site.sample(cfg, n, stream, r as u64);
            let norms: Vec<f64> = (0..cfg.num_users())
                .map(|k| norm_sqr(&effective_channel_unchecked(&s, &thetas[n], k)))
                .collect();
            let pick = crate::scheduling::online_schedule_norms(&norms, cfg);
            online[n] = pick.rate;
            users[n] = pick.user;
            offline[n] = sol.schedule.user(n).map_or(0.0, |k| bits(cfg.snr_scale() * norms[k]));
        }
        (online, offline, users)
    });
    let summarize = |pick: &dyn Fn(&SlotRates) -> &Vec<f64>| {
        let draws: Vec<f64> = per_real.iter().map(|x| pick(x).iter().sum::<f64>() / n_slots as f64).collect();
        let per_slot: Vec<f64> = (0..n_slots)
            .map(|n| per_real.iter().map(|x| pick(x)[n]).sum::<f64>() / realizations as f64)
            .collect();
        EvalResult::from_draws(draws, per_slot)
    };
    Ok(OnlineEvaluation {
        hybrid: summarize(&|x| &x.0),
        offline_only: summarize(&|x| &x.1),
        first_online_users: per_real[0].2.clone(),
    })
}

/// Per-realization genie: in every slot and for every user, alternate the
/// closed-form phases for the current beam with MRT for the current phases,
/// starting from the offline phases; then serve the best user. Each
/// alternation step cannot lower `||h_k||`, so every slot rate is at least
/// the hybrid rate of the same realization.
pub fn genie_run(cfg: &ScenarioConfig, sol: &OfflineSolution, realizations: usize) -> Result<EvalResult> {
    let stream = eval_stream(cfg);
    let sites = slot_sites(cfg, &sol.trajectory)?;
    let n_slots = cfg.n_slots;
    let iters = cfg.pipeline.genie_iters;
    let per_real = par::map(realizations, |r| {
        let mut rates = vec![0.0; n_slots];
        for (n, site) in sites.iter().enumerate() {
            let s = site.sample(cfg, n, stream, r as u64);
            let mut best_gain: f64 = 0.0;
            for k in 0..cfg.num_users() {
                best_gain = best_gain.max(genie_gain(&s, &sol.phases.combined[n], k, iters));
            }
            rates[n] = bits(cfg.snr_scale() * best_gain);
        }
        rates
    });
    let draws: Vec<f64> = per_real.iter().map(|x| x.iter().sum::<f64>() / n_slots as f64).collect();
    let per_slot = (0..n_slots)
        .map(|n| per_real.iter().map(|x| x[n]).sum::<f64>() / realizations as f64)
        .collect();
    Ok(EvalResult::from_draws(draws, per_slot))
}

/// Largest `||h_k||^2` reached by alternating beam and phase updates.
pub fn genie_gain(s: &ChannelSample, start: &[f64], k: usize, iters: usize) -> f64 {
    let n_t = s.n_t;
    let mut phi = start.to_vec();
    let mut h = effective_channel_unchecked(s, &theta(&phi), k);
    let mut best = norm_sqr(&h);
    for _ in 0..iters {
        if best == 0.0 {
            break;
        }
        // Unit MRT direction; for fixed w each path is rotated onto w^H h_d.
        let norm = best.sqrt();
        let w: Vec<Complex64> = h.iter().map(|x| x / norm).collect();
        let dot = |v: &mut dyn Iterator<Item = Complex64>| -> Complex64 { v.zip(&w).map(|(x, wi)| wi.conj() * x).sum() };
        let direct = dot(&mut s.h_d[k].iter().copied());
        let anchor = if direct.norm() > 0.0 { direct.arg() } else { 0.0 };
        for (m, p) in phi.iter_mut().enumerate() {
            let path = dot(&mut (0..n_t).map(|t| s.g[m * n_t + t].conj() * s.h_r[k][m]));
            if path.norm() > 0.0 {
                *p = anchor - path.arg();
            }
        }
        h = effective_channel_unchecked(s, &theta(&phi), k);
        let gain = norm_sqr(&h);
        if gain <= best * (1.0 + 1e-12) {
            best = best.max(gain);
            break;
        }
        best = gain;
    }
    best
}

/// Uniform phases in `[0, 2 pi)`, one vector per slot.
pub fn random_phases(cfg: &ScenarioConfig) -> Vec<Vec<f64>> {
    let stream = master(cfg).named("random_phase");
    (0..cfg.n_slots)
        .map(|n| {
            let mut rng = stream.rng(n, 0, 0);
            (0..cfg.num_elements()).map(|_| rng.random::<f64>() * TAU).collect()
        })
        .collect()
}

/// The deterministic-model design: no NLoS component, a single sample per
/// batch suffices.
fn dcm_config(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.nlos = false;
    c.batch_size = 1;
    c.pipeline.holdout_size = 1;
    c
}

/// Result of one scheme under one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct SchemeRun {
    pub scheme: SchemeId,
    pub eval: EvalResult,
    pub trajectory: Trajectory,
    pub schedule: ScheduleMatrix,
    pub offline_trace: Vec<f64>,
}

/// Runs several schemes on one configuration, sharing offline designs where
/// schemes coincide offline. Results follow the order of `schemes`.
pub fn run_schemes(cfg: &ScenarioConfig, schemes: &[SchemeId]) -> Result<Vec<SchemeRun>> {
    cfg.validate()?;
    let realizations = cfg.pipeline.eval_realizations.max(1);
    let mut offline: BTreeMap<SchemeId, OfflineSolution> = BTreeMap::new();
    let mut evals: BTreeMap<SchemeId, OnlineEvaluation> = BTreeMap::new();
    let base_key = |s: SchemeId| match s {
        SchemeId::Hybrid | SchemeId::OfflineOnly | SchemeId::FullIcsi => SchemeId::Hybrid,
        other => other,
    };
    let mut out = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let key = base_key(scheme);
        if let Entry::Vacant(slot) = offline.entry(key) {
            let sol = match key {
                SchemeId::Dcm => offline_optimize(&dcm_config(cfg), &OfflineOptions::default()),
                SchemeId::HeuristicTrajectory => offline_optimize(
                    cfg,
                    &OfflineOptions { fixed_trajectory: Some(Trajectory::heuristic(cfg)), fixed_phases: None },
                ),
                SchemeId::RandomPhase => offline_optimize(
                    cfg,
                    &OfflineOptions { fixed_trajectory: None, fixed_phases: Some(random_phases(cfg)) },
                ),
                _ => offline_optimize(cfg, &OfflineOptions::default()),
            }
            .map_err(|e| e.within(&format!("scheme {scheme}")))?;
            evals.insert(key, online_run(cfg, &sol, realizations)?);
            slot.insert(sol);
        }
        let sol = &offline[&key];
        let ev = &evals[&key];
        let eval = match scheme {
            SchemeId::OfflineOnly | SchemeId::Dcm => ev.offline_only.clone(),
            SchemeId::FullIcsi => genie_run(cfg, sol, realizations)?,
            _ => ev.hybrid.clone(),
        };
        out.push(SchemeRun {
            scheme,
            eval,
            trajectory: sol.trajectory.clone(),
            schedule: sol.schedule.clone(),
            offline_trace: sol.objective_trace.clone(),
        });
    }
    Ok(out)
}

pub fn run_scheme(scheme: SchemeId, cfg: &ScenarioConfig) -> Result<SchemeRun> {
    Ok(run_schemes(cfg, &[scheme])?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    #[serde(rename = "beta_db")]
    BetaDb,
    #[serde(rename = "T_seconds")]
    TSeconds,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::BetaDb => "beta_db",
            SweepParam::TSeconds => "T_seconds",
        }
    }

    /// The configuration of one sweep point.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::BetaDb => c.set_beta_db(value),
            SweepParam::TSeconds => c.set_horizon(value)?,
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta_db" => Ok(SweepParam::BetaDb),
            "T_seconds" | "T" => Ok(SweepParam::TSeconds),
            other => Err(Error::config("param", format!("unknown sweep parameter `{other}` (expected beta_db or T_seconds)"))),
        }
    }
}

/// One sweep point: either the runs of every requested scheme or the error
/// that prevented them.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub value: Option<f64>,
    pub runs: Vec<SchemeRun>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignResult {
    pub param: Option<SweepParam>,
    pub schemes: Vec<SchemeId>,
    pub cells: Vec<SweepCell>,
    pub seed: u64,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl CampaignResult {
    pub fn run(&self, value_index: usize, scheme: SchemeId) -> Option<&SchemeRun> {
        self.cells.get(value_index)?.runs.iter().find(|r| r.scheme == scheme)
    }
}

/// Wall-clock timer; reads zero on wasm32, which has no monotonic clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// A single configuration, no sweep.
pub fn simulate(cfg: &ScenarioConfig, schemes: &[SchemeId]) -> Result<CampaignResult> {
    let start = Stopwatch::start();
    let runs = run_schemes(cfg, schemes)?;
    Ok(CampaignResult {
        param: None,
        schemes: schemes.to_vec(),
        cells: vec![SweepCell { value: None, runs, error: None }],
        seed: cfg.seed,
        wall_clock_s: start.seconds(),
    })
}

/// Runs every scheme at every value. Infeasible points become error cells.
pub fn sweep(cfg: &ScenarioConfig, param: SweepParam, values: &[f64], schemes: &[SchemeId]) -> Result<CampaignResult> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    let start = Stopwatch::start();
    let mut cells = Vec::with_capacity(values.len());
    for &v in values {
        let cell = match param.apply(cfg, v).and_then(|c| run_schemes(&c, schemes)) {
            Ok(runs) => SweepCell { value: Some(v), runs, error: None },
            Err(e) if e.is_config() => SweepCell { value: Some(v), runs: Vec::new(), error: Some(e.to_string()) },
            Err(e) => return Err(e.within(&format!("{} = {v}", param.as_str()))),
        };
        cells.push(cell);
    }
    Ok(CampaignResult {
        param: Some(param),
        schemes: schemes.to_vec(),
        cells,
        seed: cfg.seed,
        wall_clock_s: start.seconds(),
    })
}

/// Sample-average objective of an offline solution on its own SCA stream,
/// for diagnostics.
pub fn offline_objective(cfg: &ScenarioConfig, sol: &OfflineSolution, draws: usize) -> Result<f64> {
    sample_average_objective(cfg, &sol.trajectory, &sol.schedule, &sol.phases.combined, master(cfg).named("diag"), draws)
}
