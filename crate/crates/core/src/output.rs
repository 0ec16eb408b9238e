//! CSV and manifest artifacts of a campaign.
//!
//! * `rates.csv`: `scheme,sweep_value,mean_rate,std_err,n_samples`; the sweep
//!   value is empty for a single simulation, the numeric columns are empty for
//!   sweep points that could not be run.
//! * `trajectory_<scheme>[_<param>_<value>].csv`: `n,x_m,y_m`.
//! * `schedule_<scheme>[_<param>_<value>].csv`: `n,user` (offline schedule,
//!   empty user for an idle slot).
//! * `manifest.json`: configuration echo, seed, version and the file list.
//!
//! Nothing time-dependent is written, so identical runs give identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::pipeline::{CampaignResult, SchemeId, FULL_ICSI_NOTE};
use crate::scheduling::ScheduleMatrix;

fn value_tag(campaign: &CampaignResult, value: Option<f64>) -> String {
    match (campaign.param, value) {
        (Some(p), Some(v)) => format!("_{}_{}", p.as_str(), v),
        _ => String::new(),
    }
}

pub fn write_rates_csv<W: Write>(campaign: &CampaignResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "scheme,sweep_value,mean_rate,std_err,n_samples")?;
    for &scheme in &campaign.schemes {
        for cell in &campaign.cells {
            let value = cell.value.map(|v| v.to_string()).unwrap_or_default();
            match cell.runs.iter().find(|r| r.scheme == scheme) {
                Some(r) => writeln!(
                    out,
                    "{scheme},{value},{},{},{}",
                    r.eval.mean_rate, r.eval.std_error, r.eval.n_samples
                )?,
                None => writeln!(out, "{scheme},{value},,,")?,
            }
        }
    }
    Ok(())
}

pub fn write_schedule_csv<W: Write>(schedule: &ScheduleMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,user")?;
    for (n, k) in schedule.slots().iter().enumerate() {
        match k {
            Some(k) => writeln!(out, "{n},{k}")?,
            None => writeln!(out, "{n},")?,
        }
    }
    Ok(())
}

/// Writes every artifact into `dir` (created if missing) and returns the
/// written paths in order.
pub fn write_campaign(dir: &Path, cfg: &ScenarioConfig, campaign: &CampaignResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(&name);
        fs::write(&path, bytes)?;
        files.push(name);
        Ok(())
    };

    let mut buf = Vec::new();
    write_rates_csv(campaign, &mut buf)?;
    emit("rates.csv".into(), buf)?;
    for cell in &campaign.cells {
        let tag = value_tag(campaign, cell.value);
        for run in &cell.runs {
            let mut buf = Vec::new();
            run.trajectory.write_csv(&mut buf)?;
            emit(format!("trajectory_{}{tag}.csv", run.scheme), buf)?;
            let mut buf = Vec::new();
            write_schedule_csv(&run.schedule, &mut buf)?;
            emit(format!("schedule_{}{tag}.csv", run.scheme), buf)?;
        }
    }

    let cells: Vec<_> = campaign
        .cells
        .iter()
        .map(|c| {
            json!({
                "value": c.value,
                "error": c.error,
                "offline_rounds": c.runs.iter().map(|r| (r.scheme.as_str(), r.offline_trace.len())).collect::<std::collections::BTreeMap<_, _>>(),
            })
        })
        .collect();
    let mut notes = serde_json::Map::new();
    if campaign.schemes.contains(&SchemeId::FullIcsi) {
        notes.insert("full_icsi".into(), FULL_ICSI_NOTE.into());
    }
    let mut all_files = files.clone();
    all_files.push("manifest.json".into());
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": campaign.seed,
        "param": campaign.param.map(|p| p.as_str()),
        "schemes": campaign.schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        "cells": cells,
        "config": cfg,
        "config_text": cfg.to_config_string(),
        "files": all_files,
        "notes": notes,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| crate::error::Error::Numeric(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(all_files.into_iter().map(|f| dir.join(f)).collect())
}
