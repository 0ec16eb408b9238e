//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The demo scenario is the desk preset with a 12 x 12 RIS and lighter
//! iteration budgets so that every call returns within seconds in a browser.

use ris_uav::channel::{sample_batch, ChannelStream};
use ris_uav::pipeline::{offline_optimize, online_run, OfflineOptions};
use ris_uav::ssca::{batch_objective, los_matched_phases, optimize_user_slot};
use ris_uav::{Result, ScenarioConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Horizontal extent of the rate map, `[x_min, x_max, y_min, y_max]` in m.
pub const MAP_EXTENT: [f64; 4] = [-520.0, 520.0, -100.0, 220.0];

pub fn demo_config(beta_db: f64, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk();
    cfg.ris_dims = (12, 12);
    cfg.batch_size = 10;
    cfg.seed = seed;
    cfg.ssca.max_iters = 60;
    cfg.pipeline.max_rounds = 3;
    cfg.pipeline.holdout_size = 20;
    cfg.pipeline.eval_realizations = 100;
    cfg.set_beta_db(beta_db);
    cfg
}

/// Expected rate of `user` (bits/s/Hz) with the UAV hovering at each point of
/// an `nx` x `ny` grid over [`MAP_EXTENT`], row-major from the lowest y, with
/// phases matched to the deterministic paths at that point.
pub fn rate_map_values(beta_db: f64, user: usize, nx: usize, ny: usize, draws: usize) -> Result<Vec<f64>> {
    let cfg = demo_config(beta_db, 1);
    if user >= cfg.num_users() {
        return Err(ris_uav::Error::config("user", format!("user {user} does not exist")));
    }
    let [x0, x1, y0, y1] = MAP_EXTENT;
    let stream = ChannelStream::new(cfg.seed).named("map");
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = y0 + (y1 - y0) * (j as f64 + 0.5) / ny as f64;
        for i in 0..nx {
            let x = x0 + (x1 - x0) * (i as f64 + 0.5) / nx as f64;
            let phi = los_matched_phases(&cfg, [x, y], user)?;
            let batch = sample_batch([x, y], &cfg, 0, stream, 0, draws.max(1))?;
            out.push(batch_objective(&batch.samples, &phi, user, &cfg));
        }
    }
    Ok(out)
}

/// Runs the offline design and the online evaluation; returns JSON with the
/// trajectory, the offline schedule and the two mean rates.
pub fn optimize_json(beta_db: f64, seed: u64) -> Result<String> {
    let cfg = demo_config(beta_db, seed);
    let sol = offline_optimize(&cfg, &OfflineOptions::default())?;
    let eval = online_run(&cfg, &sol, cfg.pipeline.eval_realizations)?;
    Ok(json!({
        "points": sol.trajectory.points,
        "schedule": sol.schedule.slots(),
        "users": cfg.user_pos,
        "ris": cfg.ris_pos,
        "hybrid_rate": eval.hybrid.mean_rate,
        "offline_only_rate": eval.offline_only.mean_rate,
        "objective_trace": sol.objective_trace,
        "rounds": sol.rounds,
    })
    .to_string())
}

/// Batch objective after every SSCA iteration for `user` with the UAV at
/// `(x, y)`, started from zero phases with surrogate curvature `tau`.
pub fn ssca_history(beta_db: f64, x: f64, y: f64, user: usize, tau: f64, seed: u64) -> Result<Vec<f64>> {
    let mut cfg = demo_config(beta_db, seed);
    cfg.ssca.tau = tau;
    cfg.validate()?;
    let run = optimize_user_slot(&cfg, [x, y], 0, user, ChannelStream::new(seed).named("trace"), vec![0.0; cfg.num_elements()])?;
    Ok(run.obj_history)
}

fn js(e: ris_uav::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn map_extent() -> Vec<f64> {
    MAP_EXTENT.to_vec()
}

#[wasm_bindgen]
pub fn rate_map(beta_db: f64, user: usize, nx: usize, ny: usize) -> std::result::Result<Vec<f64>, JsError> {
    rate_map_values(beta_db, user, nx, ny, 8).map_err(js)
}

#[wasm_bindgen]
pub fn optimize_trajectory(beta_db: f64, seed: u32) -> std::result::Result<String, JsError> {
    optimize_json(beta_db, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn ssca_trace(beta_db: f64, x: f64, y: f64, user: usize, tau: f64, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    ssca_history(beta_db, x, y, user, tau, seed as u64).map_err(js)
}
