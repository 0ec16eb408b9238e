//! Stochastic successive convex approximation of the RIS phases.
//!
//! For a fixed slot and user the phases maximize the expected MRT rate. Each
//! iteration draws a channel batch, updates a gradient tracker `f`, minimizes
//! the quadratic surrogate `f^T (x - phi) + tau/2 ||x - phi||^2` in closed form
//! (`phi - f / tau`) and moves toward the minimizer with a diminishing step.
//! Rates and gradients are in nats here; [`batch_objective`] reports bits.

use std::f64::consts::{LN_2, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{ChannelSample, ChannelStream, SiteModel};
use crate::config::{BatchMode, PhaseInit, ScenarioConfig, SscaHyperParams};
use crate::error::{Error, Result};
use crate::geometry::los_components;
use crate::par;
use crate::rate::{effective_channel_unchecked, norm_sqr, theta};
use crate::scheduling::ScheduleMatrix;
use crate::trajectory::Trajectory;

/// Trailing window used by the stopping rule.
const WINDOW: usize = 10;

/// `ln(1 + s ||h_k||^2)` and its gradient with respect to the phases.
pub fn ln_rate_and_gradient(
    sample: &ChannelSample,
    phi: &[f64],
    k: usize,
    cfg: &ScenarioConfig,
) -> (f64, Vec<f64>) {
    let th = theta(phi);
    let h = effective_channel_unchecked(sample, &th, k);
    let s = cfg.snr_scale();
    let gain = norm_sqr(&h);
    let scale = 2.0 * s / (1.0 + s * gain);
    let n_t = sample.n_t;
    let grad = (0..sample.m)
        .map(|m| {
            let row = &sample.g[m * n_t..(m + 1) * n_t];
            let z: Complex64 = row.iter().zip(&h).map(|(g, ht)| (g * ht).conj()).sum();
            // d||h||^2 / d phi_m = 2 Re{ j theta_m h_r,m z_m }
            let w = th[m] * sample.h_r[k][m] * z;
            -scale * w.im
        })
        .collect();
    ((s * gain).ln_1p(), grad)
}

/// Gradient of the rate (nats) of user `k` with respect to its phases.
pub fn phase_gradient(sample: &ChannelSample, phi: &[f64], k: usize, cfg: &ScenarioConfig) -> Vec<f64> {
    ln_rate_and_gradient(sample, phi, k, cfg).1
}

/// Sample-average MRT rate in bits/s/Hz.
pub fn batch_objective(batch: &[ChannelSample], phi: &[f64], k: usize, cfg: &ScenarioConfig) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let th = theta(phi);
    let s = cfg.snr_scale();
    let total: f64 = batch
        .iter()
        .map(|x| (s * norm_sqr(&effective_channel_unchecked(x, &th, k))).ln_1p())
        .sum();
    total / (batch.len() as f64 * LN_2)
}

/// Batch means of the ln-rate and of its gradient.
fn batch_value_and_gradient(batch: &[ChannelSample], phi: &[f64], k: usize, cfg: &ScenarioConfig) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; phi.len()];
    for x in batch {
        let (v, g) = ln_rate_and_gradient(x, phi, k, cfg);
        value += v;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (value / n, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SscaState {
    pub phi: Vec<f64>,
    pub f_track: Vec<f64>,
    /// Iteration counter, starts at 1.
    pub l: usize,
    /// Batch objective (bits) seen at each step.
    pub obj_history: Vec<f64>,
}

impl SscaState {
    pub fn new(phi: Vec<f64>) -> Self {
        let m = phi.len();
        SscaState { phi, f_track: vec![0.0; m], l: 1, obj_history: Vec::new() }
    }

    pub fn zeta(&self, params: &SscaHyperParams) -> f64 {
        (self.l as f64).powf(-params.nu)
    }

    pub fn xi(&self, params: &SscaHyperParams) -> f64 {
        (self.l as f64).powf(-params.mu)
    }

    /// Closed-form minimizer of the surrogate, `phi - f / tau`.
    pub fn surrogate_minimizer(&self, params: &SscaHyperParams) -> Vec<f64> {
        self.phi.iter().zip(&self.f_track).map(|(p, f)| p - f / params.tau).collect()
    }

    /// Surrogate `f^T (x - phi) + tau/2 ||x - phi||^2`.
    pub fn surrogate_value(&self, x: &[f64], params: &SscaHyperParams) -> f64 {
        self.phi
            .iter()
            .zip(&self.f_track)
            .zip(x)
            .map(|((p, f), x)| f * (x - p) + 0.5 * params.tau * (x - p) * (x - p))
            .sum()
    }

    pub fn surrogate_gradient(&self, x: &[f64], params: &SscaHyperParams) -> Vec<f64> {
        self.phi.iter().zip(&self.f_track).zip(x).map(|((p, f), x)| f + params.tau * (x - p)).collect()
    }

    /// One recursion given the batch-mean rate gradient `grad` (ascent
    /// direction): `f <- (1 - zeta) f - zeta grad`, then
    /// `phi <- (1 - xi) phi + xi (phi - f / tau)`.
    pub fn update(&self, grad: &[f64], params: &SscaHyperParams) -> SscaState {
        let zeta = self.zeta(params);
        let xi = self.xi(params);
        let f_track: Vec<f64> = self.f_track.iter().zip(grad).map(|(f, g)| (1.0 - zeta) * f - zeta * g).collect();
        let next = SscaState { f_track, ..self.clone() };
        let hat = next.surrogate_minimizer(params);
        let phi = self
            .phi
            .iter()
            .zip(&hat)
            .map(|(p, h)| (1.0 - xi) * p + xi * h)
            .collect();
        SscaState { phi, l: self.l + 1, ..next }
    }
}

/// One SSCA step on `batch` for user `k`.
pub fn ssca_step(state: &SscaState, batch: &[ChannelSample], k: usize, cfg: &ScenarioConfig) -> SscaState {
    let (value, grad) = batch_value_and_gradient(batch, &state.phi, k, cfg);
    let mut next = state.update(&grad, &cfg.ssca);
    next.obj_history.push(value / LN_2);
    next
}

#[derive(Clone, Debug, Serialize)]
pub struct SscaRun {
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub obj_history: Vec<f64>,
    pub converged: bool,
    /// Infinity norm of the last batch gradient (nats per radian).
    pub final_gradient: f64,
}

/// Phases that co-phase the deterministic cascaded paths of user `k` at `q`
/// with each other and then rotate their sum onto the deterministic direct
/// path.
pub fn los_matched_phases(cfg: &ScenarioConfig, q: [f64; 2], k: usize) -> Result<Vec<f64>> {
    let los = los_components(q, cfg)?;
    let n_t = cfg.n_t;
    // Path m adds theta_m a_m with a_m = conj(G_m) h_r,m.
    let paths: Vec<Vec<Complex64>> = (0..cfg.num_elements())
        .map(|m| (0..n_t).map(|t| los.zbar[m * n_t + t].conj() * los.zbar_r[k][m]).collect())
        .collect();
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let reference = &paths[0];
    let mut phi: Vec<f64> = paths.iter().map(|a| inner(a, reference).arg()).collect();
    let sum: Vec<Complex64> = (0..n_t)
        .map(|t| paths.iter().zip(&phi).map(|(a, p)| Complex64::from_polar(1.0, *p) * a[t]).sum())
        .collect();
    let psi = -inner(&los.zbar_d[k], &sum).arg();
    for p in &mut phi {
        *p = (*p + psi).rem_euclid(TAU);
    }
    Ok(phi)
}

pub fn initial_phases(cfg: &ScenarioConfig, q: [f64; 2], k: usize) -> Result<Vec<f64>> {
    match cfg.ssca.init {
        PhaseInit::Zero => Ok(vec![0.0; cfg.num_elements()]),
        PhaseInit::LosMatched => los_matched_phases(cfg, q, k),
    }
}

/// Runs SSCA for user `k` in slot `slot` with the UAV at `q`.
///
/// Stops after `max_iters` iterations or when the mean batch objective of the
/// last window moves by less than `tol` relative to the window before.
pub fn optimize_user_slot(
    cfg: &ScenarioConfig,
    q: [f64; 2],
    slot: usize,
    k: usize,
    stream: ChannelStream,
    init: Vec<f64>,
) -> Result<SscaRun> {
    if init.len() != cfg.num_elements() {
        return Err(Error::Dimension(format!("{} initial phases for M = {}", init.len(), cfg.num_elements())));
    }
    let params = &cfg.ssca;
    let site = SiteModel::new(q, cfg)?;
    let size = cfg.batch_size.max(1);
    let draw = |l: usize| -> Vec<ChannelSample> {
        let first = match params.batch_mode {
            BatchMode::Fresh => ((l - 1) * size) as u64,
            BatchMode::Common => 0,
        };
        (0..size as u64).map(|i| site.sample_user(cfg, slot, stream, first + i, k)).collect()
    };
    let mut state = SscaState::new(init);
    let mut converged = false;
    let mut final_gradient = f64::INFINITY;
    while state.l <= params.max_iters {
        let batch = draw(state.l);
        let (value, grad) = batch_value_and_gradient(&batch, &state.phi, k, cfg);
        final_gradient = grad.iter().fold(0.0, |a, g| a.max(g.abs()));
        let mut next = state.update(&grad, params);
        next.obj_history.push(value / LN_2);
        state = next;
        let h = &state.obj_history;
        if h.len() >= 2 * WINDOW {
            let recent = h[h.len() - WINDOW..].iter().sum::<f64>() / WINDOW as f64;
            let before = h[h.len() - 2 * WINDOW..h.len() - WINDOW].iter().sum::<f64>() / WINDOW as f64;
            if (recent - before).abs() <= params.tol * before.abs().max(1e-12) {
                converged = true;
                break;
            }
        }
        if final_gradient == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(SscaRun { iterations: state.l - 1, phi: state.phi, obj_history: state.obj_history, converged, final_gradient })
}

/// Which users get their phases optimized in each slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTargets {
    /// Only the user scheduled in the slot.
    #[default]
    ScheduledOnly,
    /// Every user, so that a schedule can be chosen from per-user optima.
    AllUsers,
}

/// Per-user phases `phi_k[n]` and the per-slot combination `phi[n]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSchedule {
    /// `per_user[k][n]` has length M.
    pub per_user: Vec<Vec<Vec<f64>>>,
    pub combined: Vec<Vec<f64>>,
}

impl PhaseSchedule {
    pub fn zeros(cfg: &ScenarioConfig) -> Self {
        let m = cfg.num_elements();
        PhaseSchedule {
            per_user: vec![vec![vec![0.0; m]; cfg.n_slots]; cfg.num_users()],
            combined: vec![vec![0.0; m]; cfg.n_slots],
        }
    }

    /// `phi[n] = sum_k a_k[n] phi_k[n]`; idle slots keep their phases.
    pub fn recombine(&mut self, schedule: &ScheduleMatrix) {
        for (n, k) in schedule.slots().iter().enumerate() {
            if let Some(k) = k {
                self.combined[n] = self.per_user[*k][n].clone();
            }
        }
    }
}

/// Optimizes the phases of the targeted users in every slot on `traj`.
/// Idle slots and untargeted users keep the phases of `prev`. Runs start from
/// the LoS-matched phases at the current position when that initialization
/// is configured, and otherwise from `prev` when given.
pub fn optimize_phases(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
    schedule: &ScheduleMatrix,
    prev: Option<&PhaseSchedule>,
    stream: ChannelStream,
    targets: PhaseTargets,
) -> Result<PhaseSchedule> {
    let n_slots = cfg.n_slots;
    let k_users = cfg.num_users();
    let mut out = prev.cloned().unwrap_or_else(|| PhaseSchedule::zeros(cfg));
    let jobs: Vec<(usize, usize)> = (0..n_slots)
        .flat_map(|n| {
            let users: Vec<usize> = match targets {
                PhaseTargets::AllUsers => (0..k_users).collect(),
                PhaseTargets::ScheduledOnly => schedule.user(n).into_iter().collect(),
            };
            users.into_iter().map(move |k| (n, k))
        })
        .collect();
    let results = par::map(jobs.len(), |j| {
        let (n, k) = jobs[j];
        let q = traj.slot_position(n);
        let init = match (prev, cfg.ssca.init) {
            (Some(p), PhaseInit::Zero) => p.per_user[k][n].clone(),
            _ => initial_phases(cfg, q, k)?,
        };
        optimize_user_slot(cfg, q, n, k, stream, init).map(|r| r.phi)
    });
    for ((n, k), phi) in jobs.into_iter().zip(results) {
        out.per_user[k][n] = phi?;
    }
    out.recombine(schedule);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn random_sample(rng: &mut ChaCha8Rng, m: usize, n_t: usize) -> ChannelSample {
        ChannelSample {
            slot: 0,
            m,
            n_t,
            g: (0..m * n_t).map(|_| cn(rng)).collect(),
            h_r: vec![(0..m).map(|_| cn(rng)).collect()],
            h_d: vec![(0..n_t).map(|_| cn(rng)).collect()],
        }
    }

    fn unit_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::desk();
        cfg.p_max = 1.0;
        cfg.sigma2 = 1.0;
        cfg
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = unit_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let s = random_sample(&mut rng, 8, 3);
            let phi: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * TAU).collect();
            let g = phase_gradient(&s, &phi, 0, &cfg);
            let h = 1e-6;
            for m in 0..8 {
                let mut a = phi.clone();
                let mut b = phi.clone();
                a[m] += h;
                b[m] -= h;
                let fd = (ln_rate_and_gradient(&s, &a, 0, &cfg).0 - ln_rate_and_gradient(&s, &b, 0, &cfg).0) / (2.0 * h);
                let scale = g.iter().fold(0.0f64, |x, y| x.max(y.abs()));
                assert!((fd - g[m]).abs() <= 1e-5 * scale, "m={m}: {fd} vs {}", g[m]);
            }
        }
    }

    #[test]
    fn scalar_gradient_is_symbolic() {
        // log(1 + |e^{j phi} conj(g) r + h|^2), derivative
        // 2 Re{ conj(x) j e^{j phi} conj(g) r } / (1 + |x|^2).
        let cfg = unit_cfg();
        let (g, r, h) = (Complex64::new(0.3, 0.7), Complex64::new(-1.1, 0.2), Complex64::new(0.5, -0.4));
        let s = ChannelSample { slot: 0, m: 1, n_t: 1, g: vec![g], h_r: vec![vec![r]], h_d: vec![vec![h]] };
        for phi in [0.0, 0.7, 2.0, 5.5] {
            let e = Complex64::from_polar(1.0, phi);
            let x = e * g.conj() * r + h;
            let want = 2.0 * (x.conj() * Complex64::i() * e * g.conj() * r).re / (1.0 + x.norm_sqr());
            let got = phase_gradient(&s, &[phi], 0, &cfg)[0];
            assert!((got - want).abs() < 1e-14);
            let value = ln_rate_and_gradient(&s, &[phi], 0, &cfg).0;
            assert!((value - x.norm_sqr().ln_1p()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_cascade_has_zero_gradient() {
        let cfg = unit_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = random_sample(&mut rng, 4, 2);
        s.h_r[0] = vec![Complex64::new(0.0, 0.0); 4];
        assert!(phase_gradient(&s, &[0.1, 0.2, 0.3, 0.4], 0, &cfg).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn batch_objective_identities() {
        let mut cfg = unit_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch: Vec<ChannelSample> = (0..5).map(|_| random_sample(&mut rng, 3, 2)).collect();
        let phi = [0.4, 1.0, 2.0];
        let once = batch_objective(&batch, &phi, 0, &cfg);
        let doubled: Vec<ChannelSample> = batch.iter().chain(&batch).cloned().collect();
        assert!((batch_objective(&doubled, &phi, 0, &cfg) - once).abs() < 1e-14);
        cfg.p_max = 0.0;
        assert_eq!(batch_objective(&batch, &phi, 0, &cfg), 0.0);
    }

    #[test]
    fn recursion_closed_forms() {
        let params = SscaHyperParams { tau: 1.0, ..Default::default() };
        let mut st = SscaState::new(vec![0.0; 3]);
        st.f_track = vec![0.5; 3];
        assert_eq!(st.surrogate_minimizer(&params), vec![-0.5; 3]);
        // Surrogate vanishes at phi with gradient f.
        assert_eq!(st.surrogate_value(&st.phi, &params), 0.0);
        assert_eq!(st.surrogate_gradient(&st.phi.clone(), &params), st.f_track);

        let params = SscaHyperParams::default();
        let first = SscaState::new(vec![1.0, 2.0]);
        let grad = [0.3, -0.2];
        let next = first.update(&grad, &params);
        assert_eq!(next.f_track, vec![-0.3, 0.2]);
        assert!((next.phi[0] - (1.0 + 0.3 / params.tau)).abs() < 1e-15);
        assert!((next.phi[1] - (2.0 - 0.2 / params.tau)).abs() < 1e-15);
        assert_eq!(next.l, 2);

        let idle = SscaState::new(vec![0.25, 0.5]);
        assert_eq!(idle.surrogate_minimizer(&params), idle.phi);
    }

    #[test]
    fn step_sizes_follow_power_laws() {
        let params = SscaHyperParams::default();
        let mut st = SscaState::new(vec![0.0]);
        let mut last = (f64::INFINITY, f64::INFINITY);
        for l in 1..50 {
            st.l = l;
            let (z, x) = (st.zeta(&params), st.xi(&params));
            assert_eq!(z, (l as f64).powf(-params.nu));
            assert_eq!(x, (l as f64).powf(-params.mu));
            assert!(z < last.0 || l == 1);
            assert!(x < last.1 || l == 1);
            last = (z, x);
        }
    }

    #[test]
    fn recombine_follows_schedule() {
        let mut cfg = ScenarioConfig::desk();
        cfg.n_slots = 3;
        cfg.ris_dims = (1, 1);
        let mut ps = PhaseSchedule::zeros(&cfg);
        ps.per_user[0] = vec![vec![1.0], vec![1.0], vec![1.0]];
        ps.per_user[1] = vec![vec![2.0], vec![2.0], vec![2.0]];
        ps.combined[2] = vec![9.0];
        let sched = ScheduleMatrix::new(2, vec![Some(1), Some(0), None]).unwrap();
        ps.recombine(&sched);
        assert_eq!(ps.combined, vec![vec![2.0], vec![1.0], vec![9.0]]);
    }
}
