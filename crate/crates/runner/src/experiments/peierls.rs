use std::path::Path;

use dnls_core::io::{track_csv, write_trajectory};
use dnls_core::modulation::track_lenient;
use dnls_core::waves::psi_projected;
use serde::{Deserialize, Serialize};

use super::{evolve_budgeted, flow_name, initial_field, points, sweep, write_json, write_text, Experiment, Outcome};
use crate::config::{ExperimentConfig, InitialData};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeierlsRecord {
    pub xi: [f64; 2],
    pub h: f64,
    pub t_final: f64,
    pub t_reached: f64,
    pub truncated: bool,
    pub lost_at: Option<(usize, f64)>,
    pub x0_dot_min: f64,
    pub x0_dot_max: f64,
    /// Mean of `ẋ0` over the last quarter of the tracked frames.
    pub x0_dot_late: f64,
}

/// Velocity series of a sampled soliton at coarse steps, tracked against the projected
/// continuous soliton. Nothing is gated.
#[derive(Default)]
pub struct Peierls;

impl Experiment for Peierls {
    fn name(&self) -> &'static str {
        "peierls"
    }

    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            experiment: "peierls".into(),
            xi: vec![[1.0, 0.5]],
            h: vec![1.0, 0.1],
            min_length: 80.0,
            initial: InitialData::Psi,
            save_interval: Some(0.5),
            budget_s: Some(120.0),
            ..Default::default()
        };
        cfg.evolution.t_final = 200.0;
        cfg
    }

    fn run(&self, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
        let pts = points(cfg)?;
        let records = sweep(&pts, |p| {
            let f0 = initial_field(cfg, p, None)?;
            let reference = psi_projected(&p.params, p.grid)?;
            let mut e = cfg.evolution_for(p.grid.h);
            e.flow = flow_name(cfg);
            let (traj, truncated) = evolve_budgeted(&f0, &e, cfg.budget_s)?;
            let track = track_lenient(&traj, &reference)?;
            let label = p.label();
            write_trajectory(&out.join(&label), &traj, cfg.snapshots)?;
            write_text(out, format!("{label}/track.csv"), &track_csv(&track))?;
            let v: Vec<f64> = track.rates.iter().map(|r| r.1).collect();
            let late = &v[v.len() - (v.len() / 4).max(1)..];
            Ok(PeierlsRecord {
                xi: p.xi(),
                h: p.grid.h,
                t_final: e.t_final,
                t_reached: *traj.times.last().expect("nonempty"),
                truncated,
                lost_at: track.lost_at,
                x0_dot_min: v.iter().copied().fold(f64::INFINITY, f64::min),
                x0_dot_max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                x0_dot_late: late.iter().sum::<f64>() / late.len() as f64,
            })
        })?;
        let mut files = Vec::new();
        for p in &pts {
            files.push(format!("{}/trajectory.csv", p.label()));
            files.push(format!("{}/track.csv", p.label()));
        }
        files.push(write_json(out, "index.json", &records)?);
        Ok(Outcome { summary: serde_json::to_value(&records)?, files, checks: Vec::new() })
    }
}
