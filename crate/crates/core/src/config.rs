//! Scenario parameters and the flat key-value config format.
//!
//! The config file is a flat TOML document whose keys mirror the fields of
//! [`ScenarioConfig`]. Keys that are not present keep the value of the base
//! preset the file is applied on top of. Quantities usually quoted in dB may
//! be given with a `_db` (or `_dbm`) suffix instead and are converted to
//! linear values on load; giving both spellings of the same key is an error.
//!
//! [`ScenarioConfig::to_config_string`] writes the canonical form, which always
//! uses linear keys so that export, load and re-export are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};

/// Step-size and surrogate parameters of the stochastic phase optimizer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SscaHyperParams {
    /// Curvature of the quadratic surrogate.
    pub tau: f64,
    /// Tracker step exponent, `zeta_l = l^-nu`.
    pub nu: f64,
    /// Iterate step exponent, `xi_l = l^-mu`.
    pub mu: f64,
    pub max_iters: usize,
    /// Relative change of the windowed batch objective that stops the loop.
    pub tol: f64,
    pub batch_mode: BatchMode,
    pub init: PhaseInit,
}

/// How channel batches are drawn across SSCA iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// A new batch every iteration.
    Fresh,
    /// One batch reused by every iteration (common random numbers).
    Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    Zero,
    /// Phases that co-phase the deterministic cascaded paths with the
    /// deterministic direct path.
    LosMatched,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaHyperParams {
    pub max_outer_iters: usize,
    /// Relative stationarity residual accepted from the inner solver.
    pub kkt_tol: f64,
    /// Relative objective gain below which the outer loop stops.
    pub obj_tol: f64,
    /// Duality gap (m/t) at which the barrier continuation stops.
    pub gap_tol: f64,
    /// Factor applied to the barrier weight between centering stages.
    pub barrier_growth: f64,
    pub max_newton_iters: usize,
}

/// Parameters of the alternating loop and of Monte-Carlo evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineParams {
    pub max_rounds: usize,
    /// Relative change of the held-out objective that stops the loop.
    pub round_tol: f64,
    pub holdout_size: usize,
    pub eval_realizations: usize,
    /// Beam and phase alternations per slot and user in the genie scheme.
    pub genie_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    /// Ground user positions in meters (z = 0).
    pub user_pos: Vec<[f64; 3]>,
    pub ris_pos: [f64; 3],
    /// RIS elements along x and along z.
    pub ris_dims: (usize, usize),
    /// Element spacing in wavelengths, shared by the RIS and the UAV array.
    pub element_spacing: f64,
    pub n_t: usize,
    pub z_f: f64,
    pub q0: [f64; 2],
    pub qf: [f64; 2],
    pub n_slots: usize,
    pub delta_t: f64,
    pub v_max: f64,
    /// Path-loss exponents of the RIS-user, UAV-RIS and UAV-user links.
    pub alpha: f64,
    pub gamma: f64,
    pub kappa: f64,
    /// Path loss at 1 m (linear).
    pub rho: f64,
    pub beta_ur: f64,
    pub beta_rg: f64,
    pub beta_ug: f64,
    /// Noise power in watts.
    pub sigma2: f64,
    /// Transmit power budget in watts.
    pub p_max: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// When false every link is replaced by its mean (the deterministic model).
    pub nlos: bool,
    pub ssca: SscaHyperParams,
    pub sca: ScaHyperParams,
    pub pipeline: PipelineParams,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl Default for SscaHyperParams {
    fn default() -> Self {
        SscaHyperParams {
            tau: 5.0,
            nu: 0.8,
            mu: 0.9,
            max_iters: 300,
            tol: 1e-4,
            batch_mode: BatchMode::Fresh,
            init: PhaseInit::LosMatched,
        }
    }
}

impl Default for ScaHyperParams {
    fn default() -> Self {
        ScaHyperParams {
            max_outer_iters: 30,
            kkt_tol: 1e-6,
            obj_tol: 1e-5,
            gap_tol: 1e-9,
            barrier_growth: 10.0,
            max_newton_iters: 200,
        }
    }
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            max_rounds: 6,
            round_tol: 1e-3,
            holdout_size: 100,
            eval_realizations: 500,
            genie_iters: 20,
        }
    }
}

impl ScenarioConfig {
    /// The full-scale parameter set of the reference simulation.
    pub fn paper() -> Self {
        ScenarioConfig {
            user_pos: vec![
                [-120.0, 10.0, 0.0],
                [-80.0, 80.0, 0.0],
                [80.0, 80.0, 0.0],
                [120.0, 10.0, 0.0],
            ],
            ris_pos: [0.0, 0.0, 40.0],
            ris_dims: (20, 20),
            element_spacing: 0.5,
            n_t: 5,
            z_f: 80.0,
            q0: [-500.0, 20.0],
            qf: [500.0, 20.0],
            n_slots: 100,
            delta_t: 1.0,
            v_max: 25.0,
            alpha: 2.2,
            gamma: 2.4,
            kappa: 3.5,
            rho: db_to_linear(-25.0),
            beta_ur: db_to_linear(5.0),
            beta_rg: db_to_linear(5.0),
            beta_ug: 0.0,
            sigma2: db_to_linear(-80.0 - 30.0),
            p_max: 0.01,
            batch_size: 100,
            seed: 1,
            nlos: true,
            ssca: SscaHyperParams::default(),
            sca: ScaHyperParams::default(),
            pipeline: PipelineParams::default(),
        }
    }

    /// Laptop-scale variant: two users, 20 slots of 5 s, smaller SSCA batches.
    pub fn desk() -> Self {
        ScenarioConfig {
            user_pos: vec![[-80.0, 80.0, 0.0], [80.0, 80.0, 0.0]],
            ris_dims: (20, 20),
            n_t: 4,
            n_slots: 20,
            delta_t: 5.0,
            batch_size: 20,
            ssca: SscaHyperParams { max_iters: 100, ..SscaHyperParams::default() },
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (expected `paper` or `desk`)"),
            )),
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_pos.len()
    }

    pub fn num_elements(&self) -> usize {
        self.ris_dims.0 * self.ris_dims.1
    }

    /// Largest horizontal displacement within one slot.
    pub fn step_max(&self) -> f64 {
        self.v_max * self.delta_t
    }

    pub fn horizon(&self) -> f64 {
        self.n_slots as f64 * self.delta_t
    }

    /// Transmit SNR scale `P / sigma^2`.
    pub fn snr_scale(&self) -> f64 {
        self.p_max / self.sigma2
    }

    pub fn uav_position(&self, q: [f64; 2]) -> [f64; 3] {
        [q[0], q[1], self.z_f]
    }

    /// Sets the common Rician factor of the UAV-RIS and RIS-user links.
    pub fn set_beta_db(&mut self, beta_db: f64) {
        self.beta_ur = db_to_linear(beta_db);
        self.beta_rg = db_to_linear(beta_db);
    }

    /// Changes the horizon keeping the slot length, `N = round(T / delta_t)`.
    pub fn set_horizon(&mut self, seconds: f64) -> Result<()> {
        let slots = (seconds / self.delta_t).round();
        if !(slots >= 1.0) {
            return Err(Error::config(
                "T_seconds",
                format!("horizon {seconds} s is shorter than one slot"),
            ));
        }
        self.n_slots = slots as usize;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(key: &str, x: f64) -> Result<()> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {x}")))
            }
        }
        fn nonneg(key: &str, x: f64) -> Result<()> {
            if x >= 0.0 && !x.is_nan() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be nonnegative, got {x}")))
            }
        }
        if self.user_pos.is_empty() {
            return Err(Error::config("user_pos", "at least one user is required"));
        }
        if self.ris_dims.0 == 0 || self.ris_dims.1 == 0 {
            return Err(Error::config("ris_dims", "both dimensions must be at least 1"));
        }
        if self.n_t == 0 {
            return Err(Error::config("N_t", "must be at least 1"));
        }
        if self.n_slots == 0 {
            return Err(Error::config("N", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("I", "must be at least 1"));
        }
        positive("element_spacing", self.element_spacing)?;
        positive("z_F", self.z_f)?;
        positive("delta_t", self.delta_t)?;
        positive("v_max", self.v_max)?;
        positive("alpha", self.alpha)?;
        positive("gamma", self.gamma)?;
        positive("kappa", self.kappa)?;
        positive("rho", self.rho)?;
        positive("sigma2", self.sigma2)?;
        positive("P", self.p_max)?;
        nonneg("beta_UR", self.beta_ur)?;
        nonneg("beta_RG", self.beta_rg)?;
        nonneg("beta_UG", self.beta_ug)?;
        for (key, x) in [
            ("q0", self.q0[0]),
            ("q0", self.q0[1]),
            ("qF", self.qf[0]),
            ("qF", self.qf[1]),
            ("ris_pos", self.ris_pos[0]),
            ("ris_pos", self.ris_pos[1]),
            ("ris_pos", self.ris_pos[2]),
        ] {
            if !x.is_finite() {
                return Err(Error::config(key, "coordinates must be finite"));
            }
        }

        let s = &self.ssca;
        positive("ssca.tau", s.tau)?;
        if !(0.5..=1.0).contains(&s.nu) {
            return Err(Error::config("ssca.nu", format!("must lie in [0.5, 1], got {}", s.nu)));
        }
        if !(s.mu > s.nu && s.mu <= 1.0) {
            return Err(Error::config(
                "ssca.mu",
                format!("must satisfy nu < mu <= 1, got mu = {} with nu = {}", s.mu, s.nu),
            ));
        }
        if s.max_iters == 0 {
            return Err(Error::config("ssca.max_iters", "must be at least 1"));
        }
        positive("ssca.tol", s.tol)?;
        let c = &self.sca;
        positive("sca.kkt_tol", c.kkt_tol)?;
        positive("sca.obj_tol", c.obj_tol)?;
        positive("sca.gap_tol", c.gap_tol)?;
        if !(c.barrier_growth > 1.0) {
            return Err(Error::config("sca.barrier_growth", "must exceed 1"));
        }
        if c.max_outer_iters == 0 || c.max_newton_iters == 0 {
            return Err(Error::config("sca.max_outer_iters", "iteration caps must be at least 1"));
        }
        let p = &self.pipeline;
        if p.max_rounds == 0 {
            return Err(Error::config("pipeline.max_rounds", "must be at least 1"));
        }
        if p.holdout_size == 0 {
            return Err(Error::config("pipeline.holdout_size", "must be at least 1"));
        }
        if p.eval_realizations == 0 {
            return Err(Error::config("pipeline.eval_realizations", "must be at least 1"));
        }
        positive("pipeline.round_tol", p.round_tol)?;

        self.validate_geometry()?;
        self.validate_mission()
    }

    /// Pairwise distances must be positive and nothing may sit behind the
    /// RIS panel, whose normal is +y.
    fn validate_geometry(&self) -> Result<()> {
        let ris = self.ris_pos;
        for (k, u) in self.user_pos.iter().enumerate() {
            if !u.iter().all(|x| x.is_finite()) {
                return Err(Error::config("user_pos", format!("user {} has non-finite coordinates", k + 1)));
            }
            if u[1] <= ris[1] {
                return Err(Error::config(
                    "user_pos",
                    format!("user {} lies behind the RIS panel (y <= {})", k + 1, ris[1]),
                ));
            }
        }
        for (key, q) in [("q0", self.q0), ("qF", self.qf)] {
            if q[1] <= ris[1] {
                return Err(Error::config(key, format!("UAV endpoint lies behind the RIS panel (y <= {})", ris[1])));
            }
            if crate::geometry::dist3(self.uav_position(q), ris) <= 0.0 {
                return Err(Error::config(key, "UAV coincides with the RIS"));
            }
        }
        Ok(())
    }

    fn validate_mission(&self) -> Result<()> {
        let span = crate::geometry::dist2(self.q0, self.qf);
        let budget = self.n_slots as f64 * self.step_max();
        if span > budget * (1.0 + 1e-12) {
            return Err(Error::config(
                "N",
                format!(
                    "mission infeasible: |qF - q0| = {span:.3} m exceeds N * v_max * delta_t = {budget:.3} m"
                ),
            ));
        }
        Ok(())
    }

    pub fn load(path: &Path, base: ScenarioConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_config_str(&text, base)
    }

    /// Parses a config document on top of `base` and validates the result.
    pub fn from_config_str(text: &str, base: ScenarioConfig) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", format!("parse error: {e}")))?;
        let mut reader = Reader::flatten(table)?;
        let mut cfg = base;
        reader.apply(&mut cfg)?;
        reader.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical config document (linear units, fixed key order).
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "# RIS-aided UAV downlink scenario");
        let users: Vec<String> = self.user_pos.iter().map(|p| fmt_array(p)).collect();
        let _ = writeln!(w, "user_pos = [{}]", users.join(", "));
        let _ = writeln!(w, "ris_pos = {}", fmt_array(&self.ris_pos));
        let _ = writeln!(w, "ris_dims = [{}, {}]", self.ris_dims.0, self.ris_dims.1);
        let _ = writeln!(w, "element_spacing = {}", fmt_f64(self.element_spacing));
        let _ = writeln!(w, "N_t = {}", self.n_t);
        let _ = writeln!(w, "z_F = {}", fmt_f64(self.z_f));
        let _ = writeln!(w, "q0 = {}", fmt_array(&self.q0));
        let _ = writeln!(w, "qF = {}", fmt_array(&self.qf));
        let _ = writeln!(w, "N = {}", self.n_slots);
        let _ = writeln!(w, "delta_t = {}", fmt_f64(self.delta_t));
        let _ = writeln!(w, "v_max = {}", fmt_f64(self.v_max));
        let _ = writeln!(w, "alpha = {}", fmt_f64(self.alpha));
        let _ = writeln!(w, "gamma = {}", fmt_f64(self.gamma));
        let _ = writeln!(w, "kappa = {}", fmt_f64(self.kappa));
        let _ = writeln!(w, "rho = {} # {:.3} dB", fmt_f64(self.rho), linear_to_db(self.rho));
        for (key, b) in [("beta_UR", self.beta_ur), ("beta_RG", self.beta_rg), ("beta_UG", self.beta_ug)] {
            if b > 0.0 {
                let _ = writeln!(w, "{key} = {} # {:.3} dB", fmt_f64(b), linear_to_db(b));
            } else {
                let _ = writeln!(w, "{key} = {}", fmt_f64(b));
            }
        }
        let _ = writeln!(
            w,
            "sigma2 = {} # {:.3} dBm",
            fmt_f64(self.sigma2),
            linear_to_db(self.sigma2) + 30.0
        );
        let _ = writeln!(w, "P = {}", fmt_f64(self.p_max));
        let _ = writeln!(w, "I = {}", self.batch_size);
        let _ = writeln!(w, "seed = {}", self.seed);
        let _ = writeln!(w, "nlos = {}", self.nlos);
        let s = &self.ssca;
        let _ = writeln!(w, "ssca.tau = {}", fmt_f64(s.tau));
        let _ = writeln!(w, "ssca.nu = {}", fmt_f64(s.nu));
        let _ = writeln!(w, "ssca.mu = {}", fmt_f64(s.mu));
        let _ = writeln!(w, "ssca.max_iters = {}", s.max_iters);
        let _ = writeln!(w, "ssca.tol = {}", fmt_f64(s.tol));
        let _ = writeln!(w, "ssca.batch_mode = \"{}\"", s.batch_mode.as_str());
        let _ = writeln!(w, "ssca.init = \"{}\"", s.init.as_str());
        let c = &self.sca;
        let _ = writeln!(w, "sca.max_outer_iters = {}", c.max_outer_iters);
        let _ = writeln!(w, "sca.kkt_tol = {}", fmt_f64(c.kkt_tol));
        let _ = writeln!(w, "sca.obj_tol = {}", fmt_f64(c.obj_tol));
        let _ = writeln!(w, "sca.gap_tol = {}", fmt_f64(c.gap_tol));
        let _ = writeln!(w, "sca.barrier_growth = {}", fmt_f64(c.barrier_growth));
        let _ = writeln!(w, "sca.max_newton_iters = {}", c.max_newton_iters);
        let p = &self.pipeline;
        let _ = writeln!(w, "pipeline.max_rounds = {}", p.max_rounds);
        let _ = writeln!(w, "pipeline.round_tol = {}", fmt_f64(p.round_tol));
        let _ = writeln!(w, "pipeline.holdout_size = {}", p.holdout_size);
        let _ = writeln!(w, "pipeline.eval_realizations = {}", p.eval_realizations);
        let _ = writeln!(w, "pipeline.genie_iters = {}", p.genie_iters);
        out
    }
}

/// Float formatting that TOML reads back as a float with the same value.
fn fmt_f64(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn fmt_array(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", parts.join(", "))
}

impl BatchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BatchMode::Fresh => "fresh",
            BatchMode::Common => "common",
        }
    }
}

impl PhaseInit {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseInit::Zero => "zero",
            PhaseInit::LosMatched => "los_matched",
        }
    }
}

/// Consumes keys from a flattened table; whatever is left over is unknown.
struct Reader {
    entries: Vec<(String, Value)>,
}

impl Reader {
    fn flatten(table: Table) -> Result<Self> {
        let mut entries = Vec::new();
        for (key, value) in table {
            match value {
                Value::Table(sub) => {
                    for (inner, v) in sub {
                        if matches!(v, Value::Table(_)) {
                            return Err(Error::config(format!("{key}.{inner}"), "nesting deeper than one level"));
                        }
                        entries.push((format!("{key}.{inner}"), v));
                    }
                }
                v => entries.push((key, v)),
            }
        }
        Ok(Reader { entries })
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        let pos = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(pos).1)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| as_f64(key, &v)).transpose()
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(v) => Err(Error::config(key, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    fn linear_or_db(&mut self, key: &str, db_key: &str, offset_db: f64) -> Result<Option<f64>> {
        let lin = self.f64(key)?;
        let db = self.f64(db_key)?;
        match (lin, db) {
            (Some(_), Some(_)) => Err(Error::config(db_key, format!("conflicts with `{key}`; give only one"))),
            (Some(x), None) => Ok(Some(x)),
            (None, Some(d)) => Ok(Some(db_to_linear(d + offset_db))),
            (None, None) => Ok(None),
        }
    }

    fn apply(&mut self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(v) = self.take("user_pos") {
            let rows = as_array("user_pos", &v)?;
            let mut users = Vec::with_capacity(rows.len());
            for row in rows {
                users.push(as_point::<3>("user_pos", row)?);
            }
            cfg.user_pos = users;
        }
        if let Some(v) = self.take("ris_pos") {
            cfg.ris_pos = as_point::<3>("ris_pos", &v)?;
        }
        if let Some(v) = self.take("ris_dims") {
            let dims = as_array("ris_dims", &v)?;
            match dims {
                [Value::Integer(x), Value::Integer(z)] if *x >= 0 && *z >= 0 => {
                    cfg.ris_dims = (*x as usize, *z as usize)
                }
                _ => return Err(Error::config("ris_dims", "expected [M_x, M_z] nonnegative integers")),
            }
        }
        if let Some(x) = self.f64("element_spacing")? {
            cfg.element_spacing = x;
        }
        if let Some(x) = self.usize("N_t")? {
            cfg.n_t = x;
        }
        if let Some(x) = self.f64("z_F")? {
            cfg.z_f = x;
        }
        if let Some(v) = self.take("q0") {
            cfg.q0 = as_point::<2>("q0", &v)?;
        }
        if let Some(v) = self.take("qF") {
            cfg.qf = as_point::<2>("qF", &v)?;
        }
        if let Some(x) = self.usize("N")? {
            cfg.n_slots = x;
        }
        if let Some(x) = self.f64("delta_t")? {
            cfg.delta_t = x;
        }
        if let Some(x) = self.f64("v_max")? {
            cfg.v_max = x;
        }
        if let Some(x) = self.f64("alpha")? {
            cfg.alpha = x;
        }
        if let Some(x) = self.f64("gamma")? {
            cfg.gamma = x;
        }
        if let Some(x) = self.f64("kappa")? {
            cfg.kappa = x;
        }
        if let Some(x) = self.linear_or_db("rho", "rho_db", 0.0)? {
            cfg.rho = x;
        }
        if let Some(b) = self.f64("beta_db")? {
            if self.entries.iter().any(|(k, _)| k.starts_with("beta_UR") || k.starts_with("beta_RG")) {
                return Err(Error::config("beta_db", "conflicts with a per-link beta_UR/beta_RG key"));
            }
            cfg.set_beta_db(b);
        }
        if let Some(x) = self.linear_or_db("beta_UR", "beta_UR_db", 0.0)? {
            cfg.beta_ur = x;
        }
        if let Some(x) = self.linear_or_db("beta_RG", "beta_RG_db", 0.0)? {
            cfg.beta_rg = x;
        }
        if let Some(x) = self.linear_or_db("beta_UG", "beta_UG_db", 0.0)? {
            cfg.beta_ug = x;
        }
        if let Some(x) = self.linear_or_db("sigma2", "sigma2_dbm", -30.0)? {
            cfg.sigma2 = x;
        }
        if let Some(x) = self.f64("P")? {
            cfg.p_max = x;
        }
        if let Some(x) = self.usize("I")? {
            cfg.batch_size = x;
        }
        if let Some(x) = self.usize("seed")? {
            cfg.seed = x as u64;
        }
        if let Some(v) = self.take("nlos") {
            cfg.nlos = v
                .as_bool()
                .ok_or_else(|| Error::config("nlos", "expected true or false"))?;
        }

        let s = &mut cfg.ssca;
        if let Some(x) = self.f64("ssca.tau")? {
            s.tau = x;
        }
        if let Some(x) = self.f64("ssca.nu")? {
            s.nu = x;
        }
        if let Some(x) = self.f64("ssca.mu")? {
            s.mu = x;
        }
        if let Some(x) = self.usize("ssca.max_iters")? {
            s.max_iters = x;
        }
        if let Some(x) = self.f64("ssca.tol")? {
            s.tol = x;
        }
        if let Some(v) = self.take("ssca.batch_mode") {
            s.batch_mode = match v.as_str() {
                Some("fresh") => BatchMode::Fresh,
                Some("common") => BatchMode::Common,
                _ => return Err(Error::config("ssca.batch_mode", "expected \"fresh\" or \"common\"")),
            };
        }
        if let Some(v) = self.take("ssca.init") {
            s.init = match v.as_str() {
                Some("zero") => PhaseInit::Zero,
                Some("los_matched") => PhaseInit::LosMatched,
                _ => return Err(Error::config("ssca.init", "expected \"zero\" or \"los_matched\"")),
            };
        }

        let c = &mut cfg.sca;
        if let Some(x) = self.usize("sca.max_outer_iters")? {
            c.max_outer_iters = x;
        }
        if let Some(x) = self.f64("sca.kkt_tol")? {
            c.kkt_tol = x;
        }
        if let Some(x) = self.f64("sca.obj_tol")? {
            c.obj_tol = x;
        }
        if let Some(x) = self.f64("sca.gap_tol")? {
            c.gap_tol = x;
        }
        if let Some(x) = self.f64("sca.barrier_growth")? {
            c.barrier_growth = x;
        }
        if let Some(x) = self.usize("sca.max_newton_iters")? {
            c.max_newton_iters = x;
        }

        let p = &mut cfg.pipeline;
        if let Some(x) = self.usize("pipeline.max_rounds")? {
            p.max_rounds = x;
        }
        if let Some(x) = self.f64("pipeline.round_tol")? {
            p.round_tol = x;
        }
        if let Some(x) = self.usize("pipeline.holdout_size")? {
            p.holdout_size = x;
        }
        if let Some(x) = self.usize("pipeline.eval_realizations")? {
            p.eval_realizations = x;
        }
        if let Some(x) = self.usize("pipeline.genie_iters")? {
            p.genie_iters = x;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        match self.entries.first() {
            Some((key, _)) => Err(Error::config(key.clone(), "unknown key")),
            None => Ok(()),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(key, format!("expected a number, got {other}"))),
    }
}

fn as_array<'a>(key: &str, v: &'a Value) -> Result<&'a [Value]> {
    v.as_array()
        .map(|a| a.as_slice())
        .ok_or_else(|| Error::config(key, "expected an array"))
}

fn as_point<const D: usize>(key: &str, v: &Value) -> Result<[f64; D]> {
    let xs = as_array(key, v)?;
    if xs.len() != D {
        return Err(Error::config(key, format!("expected {D} coordinates, got {}", xs.len())));
    }
    let mut out = [0.0; D];
    for (o, x) in out.iter_mut().zip(xs) {
        *o = as_f64(key, x)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_defaults() {
        let c = ScenarioConfig::paper();
        assert_eq!(c.num_users(), 4);
        assert_eq!(c.num_elements(), 400);
        assert_eq!(c.n_t, 5);
        assert_eq!(c.batch_size, 100);
        assert!((c.sigma2 - 1e-11).abs() < 1e-24);
        assert!((c.rho - 10f64.powf(-2.5)).abs() < 1e-15);
        assert_eq!(c.step_max(), 25.0);
        assert_eq!(c.beta_ug, 0.0);
        c.validate().unwrap();
        ScenarioConfig::desk().validate().unwrap();
    }

    #[test]
    fn export_load_reexport_is_identical() {
        for base in [ScenarioConfig::paper(), ScenarioConfig::desk()] {
            let text = base.to_config_string();
            let loaded = ScenarioConfig::from_config_str(&text, ScenarioConfig::desk()).unwrap();
            assert_eq!(loaded, base);
            assert_eq!(loaded.to_config_string(), text);
        }
    }

    #[test]
    fn db_keys_convert() {
        let cfg = ScenarioConfig::from_config_str(
            "sigma2_dbm = -80\nrho_db = -25\nbeta_db = 10\n",
            ScenarioConfig::paper(),
        )
        .unwrap();
        assert!((cfg.sigma2 - 1e-11).abs() < 1e-22);
        assert!((cfg.beta_ur - 10.0).abs() < 1e-12);
        assert!((cfg.beta_rg - 10.0).abs() < 1e-12);
        assert_eq!(cfg.beta_ug, 0.0);
    }

    #[test]
    fn negative_power_names_key() {
        let err = ScenarioConfig::from_config_str("P = -1.0", ScenarioConfig::paper()).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "P"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_conflicting_keys_rejected() {
        let err = ScenarioConfig::from_config_str("bogus = 1", ScenarioConfig::paper()).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = ScenarioConfig::from_config_str("rho = 0.1\nrho_db = -10", ScenarioConfig::paper()).unwrap_err();
        assert!(err.to_string().contains("rho_db"));
        let err = ScenarioConfig::from_config_str("ssca.bogus = 1", ScenarioConfig::paper()).unwrap_err();
        assert!(err.to_string().contains("ssca.bogus"));
    }

    #[test]
    fn infeasible_mission_rejected() {
        let err = ScenarioConfig::from_config_str("N = 39", ScenarioConfig::paper()).unwrap_err();
        assert!(err.to_string().contains("infeasible"));
        // 40 slots of 25 m cover exactly the 1000 m span.
        ScenarioConfig::from_config_str("N = 40", ScenarioConfig::paper()).unwrap();
    }

    #[test]
    fn step_size_exponents_checked() {
        let err = ScenarioConfig::from_config_str("ssca.mu = 0.7", ScenarioConfig::paper()).unwrap_err();
        assert!(err.to_string().contains("ssca.mu"));
        let err = ScenarioConfig::from_config_str("ssca.nu = 0.4", ScenarioConfig::paper()).unwrap_err();
        assert!(err.to_string().contains("ssca.nu"));
    }

    #[test]
    fn users_behind_panel_rejected() {
        let err = ScenarioConfig::from_config_str("user_pos = [[0.0, -5.0, 0.0]]", ScenarioConfig::paper())
            .unwrap_err();
        assert!(err.to_string().contains("behind"));
    }
}
