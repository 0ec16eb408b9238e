use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_uav::channel::{sample_channel, ChannelStream};
use ris_uav::geometry::distances;
use ris_uav::rate::{effective_channel, mrt_rate, norm_sqr, rate, theta, BeamVector};
use ris_uav::scheduling::{offline_schedule, ScheduleMatrix, ScheduleOptions};
use ris_uav::ssca::los_matched_phases;
use ris_uav::trajectory::{abc_coefficients, Trajectory};
use ris_uav::ScenarioConfig;

fn cfg4x4() -> ScenarioConfig {
    ScenarioConfig { ris_dims: (4, 4), ..ScenarioConfig::desk() }
}

fn position() -> impl Strategy<Value = [f64; 2]> {
    (-300.0..300.0f64, -60.0..200.0f64).prop_map(|(x, y)| [x, y])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mrt_beats_any_feasible_beam(q in position(), seed in 0u64..1000, k in 0usize..2) {
        let cfg = cfg4x4();
        let s = sample_channel(q, &cfg, 0, ChannelStream::new(seed), 0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let th = theta(&(0..16).map(|_| r.random_range(0.0..TAU)).collect::<Vec<_>>());
        let best = mrt_rate(&s, &th, k, &cfg);
        for _ in 0..20 {
            let w: Vec<Complex64> = (0..cfg.n_t).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
            let scale = (cfg.p_max / norm_sqr(&w)).sqrt();
            let w = BeamVector { w: w.iter().map(|z| z * scale).collect(), degenerate: false };
            prop_assert!(rate(&s, &th, &w, k, &cfg).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn coefficients_reconstruct_the_channel_norm(q in position(), seed in 0u64..1000, k in 0usize..2) {
        let cfg = cfg4x4();
        let s = sample_channel(q, &cfg, 0, ChannelStream::new(seed), 0).unwrap();
        let th = theta(&[0.3; 16]);
        let d = distances(q, &cfg).unwrap();
        let c = abc_coefficients(&s, &th, k, d.uav_user[k], d.uav_ris, &cfg).unwrap();
        let exact = norm_sqr(&effective_channel(&s, &th, k).unwrap());
        prop_assert!((c.gain(d.uav_user[k], d.uav_ris, &cfg) - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn los_matched_phases_beat_random_phases_without_fading(q in position(), seed in 0u64..1000, k in 0usize..2) {
        let mut cfg = cfg4x4();
        cfg.nlos = false;
        cfg.beta_ug = 1.0;
        let s = sample_channel(q, &cfg, 0, ChannelStream::new(seed), 0).unwrap();
        let matched = los_matched_phases(&cfg, q, k).unwrap();
        let best = norm_sqr(&effective_channel(&s, &theta(&matched), k).unwrap());
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let phi: Vec<f64> = (0..16).map(|_| r.random_range(0.0..TAU)).collect();
            prop_assert!(norm_sqr(&effective_channel(&s, &theta(&phi), k).unwrap()) <= best * (1.0 + 1e-9));
        }
    }

    #[test]
    fn offline_schedule_dominates_every_assignment(
        table in (1usize..5, 1usize..12).prop_flat_map(|(k, n)| proptest::collection::vec(proptest::collection::vec(0.0..10.0f64, n), k)),
        picks in proptest::collection::vec(0usize..4, 12),
    ) {
        let s = offline_schedule(&table, &ScheduleOptions::default()).unwrap();
        let n = table[0].len();
        let other = ScheduleMatrix::new(table.len(), (0..n).map(|i| Some(picks[i] % table.len())).collect()).unwrap();
        prop_assert!(s.objective(&table) >= other.objective(&table));
    }

    #[test]
    fn candidate_trajectories_respect_mobility(
        x0 in -400.0..-50.0f64, y0 in -50.0..150.0f64, x1 in 50.0..400.0f64, y1 in -50.0..150.0f64,
        n in 2usize..30, slack in 1.0..3.0f64,
    ) {
        let mut cfg = ScenarioConfig::desk();
        cfg.q0 = [x0, y0];
        cfg.qf = [x1, y1];
        cfg.n_slots = n;
        let span = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        cfg.delta_t = slack * span / (n as f64 * cfg.v_max);
        for t in ris_uav::pipeline::candidate_starts(&cfg) {
            prop_assert!(t.check_feasible(&cfg).is_ok());
        }
        prop_assert!(Trajectory::heuristic(&cfg).check_feasible(&cfg).is_ok());
    }
}
