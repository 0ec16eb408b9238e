use ris_uav::output::write_campaign;
use ris_uav::pipeline::{
    genie_run, offline_optimize, online_run, run_scheme, run_schemes, simulate, sweep, OfflineOptions, SchemeId,
    SweepParam,
};
use ris_uav::ScenarioConfig;

fn tiny() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.ris_dims = (2, 2);
    cfg.n_slots = 4;
    cfg.delta_t = 12.0;
    cfg.batch_size = 4;
    cfg.ssca.max_iters = 20;
    cfg.pipeline.max_rounds = 2;
    cfg.pipeline.holdout_size = 10;
    cfg.pipeline.eval_realizations = 30;
    cfg
}

#[test]
fn single_user_online_and_offline_coincide() {
    let mut cfg = tiny();
    cfg.user_pos = vec![[40.0, 60.0, 0.0]];
    cfg.n_slots = 2;
    cfg.delta_t = 24.0;
    let sol = offline_optimize(&cfg, &OfflineOptions::default()).unwrap();
    assert!(sol.schedule.slots().iter().all(|k| *k == Some(0)));
    let eval = online_run(&cfg, &sol, 50).unwrap();
    assert_eq!(eval.hybrid.draws, eval.offline_only.draws);
    assert!(eval.first_online_users.iter().all(|k| *k == 0));
}

#[test]
fn every_scheme_returns_a_feasible_design() {
    let cfg = tiny();
    let runs = run_schemes(&cfg, &SchemeId::ALL).unwrap();
    assert_eq!(runs.len(), SchemeId::ALL.len());
    for r in &runs {
        r.trajectory.check_feasible(&cfg).unwrap();
        assert_eq!(r.schedule.num_slots(), cfg.n_slots);
        assert_eq!(r.eval.n_samples, cfg.pipeline.eval_realizations);
        assert!(r.eval.mean_rate.is_finite() && r.eval.mean_rate > 0.0, "{}", r.scheme);
    }
    let by = |s: SchemeId| runs.iter().find(|r| r.scheme == s).unwrap();
    // Per realization, argmax scheduling never loses to the offline schedule
    // and the genie never loses to the hybrid scheme.
    let hybrid = &by(SchemeId::Hybrid).eval.draws;
    for (h, o) in hybrid.iter().zip(&by(SchemeId::OfflineOnly).eval.draws) {
        assert!(h >= o);
    }
    for (g, h) in by(SchemeId::FullIcsi).eval.draws.iter().zip(hybrid) {
        assert!(*g >= h - 1e-12);
    }
    assert_eq!(by(SchemeId::HeuristicTrajectory).trajectory, ris_uav::trajectory::Trajectory::heuristic(&cfg));
}

#[test]
fn genie_bound_holds_per_realization() {
    let cfg = tiny();
    let sol = offline_optimize(&cfg, &OfflineOptions::default()).unwrap();
    let hybrid = online_run(&cfg, &sol, 40).unwrap().hybrid;
    let genie = genie_run(&cfg, &sol, 40).unwrap();
    for (g, h) in genie.draws.iter().zip(&hybrid.draws) {
        assert!(*g >= h - 1e-12, "{g} < {h}");
    }
}

#[test]
fn sweep_points_match_single_runs() {
    let cfg = tiny();
    let c = sweep(&cfg, SweepParam::BetaDb, &[-5.0, 10.0], &[SchemeId::Hybrid]).unwrap();
    let mut at = cfg.clone();
    at.set_beta_db(10.0);
    let single = run_scheme(SchemeId::Hybrid, &at).unwrap();
    let swept = c.run(1, SchemeId::Hybrid).unwrap();
    assert_eq!(swept.eval.draws, single.eval.draws);
    assert_eq!(swept.trajectory, single.trajectory);
}

#[test]
fn infeasible_horizon_becomes_an_error_cell() {
    let cfg = tiny();
    let c = sweep(&cfg, SweepParam::TSeconds, &[12.0, 48.0], &[SchemeId::RandomPhase]).unwrap();
    assert!(c.cells[0].error.as_deref().unwrap().contains("infeasible"));
    assert!(c.cells[0].runs.is_empty());
    assert!(c.cells[1].error.is_none());
    assert_eq!(c.cells[1].runs.len(), 1);
}

#[test]
fn seeds_change_results_and_repeat_exactly() {
    let cfg = tiny();
    let a = run_scheme(SchemeId::Hybrid, &cfg).unwrap();
    let b = run_scheme(SchemeId::Hybrid, &cfg).unwrap();
    assert_eq!(a.eval.draws, b.eval.draws);
    let other = run_scheme(SchemeId::Hybrid, &ScenarioConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(a.eval.draws, other.eval.draws);
}

#[test]
fn campaign_artifacts_have_fixed_layout() {
    let cfg = tiny();
    let c = simulate(&cfg, &[SchemeId::Hybrid, SchemeId::FullIcsi]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_campaign(dir.path(), &cfg, &c).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(
        names,
        [
            "rates.csv",
            "trajectory_hybrid.csv",
            "schedule_hybrid.csv",
            "trajectory_full_icsi.csv",
            "schedule_full_icsi.csv",
            "manifest.json"
        ]
    );
    let rates = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let rows: Vec<&str> = rates.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("hybrid,,"));
    let traj = std::fs::read_to_string(dir.path().join("trajectory_hybrid.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("n,x_m,y_m"));
    assert_eq!(traj.lines().count(), cfg.n_slots + 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert!(manifest["notes"]["full_icsi"].as_str().unwrap().contains("lower bound"));
    let reloaded = ScenarioConfig::from_config_str(manifest["config_text"].as_str().unwrap(), ScenarioConfig::paper()).unwrap();
    assert_eq!(reloaded.to_config_string(), cfg.to_config_string());
}
