use std::fmt::Write as _;
use std::path::Path;

use dnls_core::io::write_trajectory;
use dnls_core::lattice::{norm, NormKind};
use dnls_core::perturb::PerturbationSpec;
use serde::{Deserialize, Serialize};

use super::{evolve_budgeted, flow_name, initial_field, points, solve_point, sweep, write_json, write_text, Experiment, Outcome, Point};
use crate::config::{ExperimentConfig, InitialData};
use crate::error::Result;
use crate::fit::loglog_fit;
use crate::manifest::Check;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub n: u32,
    /// Slope of `log sup_{s≤t}‖u(s)‖_{Ḣⁿ}` against `log t`.
    pub exponent: f64,
    /// `(n - 1)/2`
    pub reference: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub xi: [f64; 2],
    pub h: f64,
    pub t_reached: f64,
    pub truncated: bool,
    /// `‖u(0)‖_{Ḣ¹} + ‖u(0)‖³_{L²}`
    pub m_u0: f64,
    pub fits: Vec<GrowthFit>,
}

pub struct GrowthRun {
    pub point: Point,
    pub record: GrowthRecord,
    pub times: Vec<f64>,
    /// Running suprema, one column per order.
    pub sup: Vec<(u32, Vec<f64>)>,
}

/// Running supremum of each recorded `Ḣⁿ` norm and its log-log slope for `t ≥ fit_from`.
pub fn run_point(cfg: &ExperimentConfig, p: &Point, out: Option<&Path>) -> Result<GrowthRun> {
    let sol = match cfg.initial {
        InitialData::Eta => Some(solve_point(cfg, p)?),
        InitialData::Psi => None,
    };
    let f0 = initial_field(cfg, p, sol.as_ref())?;
    let mut e = cfg.evolution_for(p.grid.h);
    e.flow = flow_name(cfg);
    let (traj, truncated) = evolve_budgeted(&f0, &e, cfg.budget_s)?;
    if let Some(dir) = out {
        write_trajectory(&dir.join(p.label()), &traj, cfg.snapshots)?;
    }
    let mut sup = Vec::new();
    let mut fits = Vec::new();
    for &n in &cfg.sobolev_orders {
        let mut running = 0.0_f64;
        let col: Vec<f64> = traj
            .reports
            .iter()
            .map(|r| {
                let v = r.sobolev.iter().find(|(k, _)| *k == n).map(|(_, v)| *v).unwrap_or(f64::NAN);
                running = running.max(v);
                running
            })
            .collect();
        let (ts, ys): (Vec<f64>, Vec<f64>) =
            traj.times.iter().zip(&col).filter(|(t, _)| **t >= cfg.gates.fit_from).map(|(t, y)| (*t, *y)).unzip();
        let fit = loglog_fit(&ts, &ys);
        fits.push(GrowthFit {
            n,
            exponent: fit.map_or(f64::NAN, |f| f.slope),
            reference: 0.5 * (n as f64 - 1.0),
            r2: fit.map_or(f64::NAN, |f| f.r2),
        });
        sup.push((n, col));
    }
    let m_u0 = norm(&f0, NormKind::HomogeneousSobolev(1)) + norm(&f0, NormKind::L2).powi(3);
    let record = GrowthRecord { xi: p.xi(), h: p.grid.h, t_reached: *traj.times.last().expect("nonempty"), truncated, m_u0, fits };
    Ok(GrowthRun { point: *p, record, times: traj.times, sup })
}

pub fn growth_csv(run: &GrowthRun) -> String {
    let mut s = String::from("t");
    for (n, _) in &run.sup {
        let _ = write!(s, ",sup_Hn_{n}");
    }
    s.push('\n');
    for (i, t) in run.times.iter().enumerate() {
        let _ = write!(s, "{t:.16e}");
        for (_, col) in &run.sup {
            let _ = write!(s, ",{:.16e}", col[i]);
        }
        s.push('\n');
    }
    s
}

#[derive(Default)]
pub struct SobolevGrowth;

impl Experiment for SobolevGrowth {
    fn name(&self) -> &'static str {
        "sobolev-growth"
    }

    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            experiment: "sobolev-growth".into(),
            save_interval: Some(0.5),
            perturbation: PerturbationSpec::default(),
            sobolev_orders: vec![1, 2, 3],
            ..Default::default()
        };
        cfg.evolution.t_final = 500.0;
        cfg
    }

    fn run(&self, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
        let pts = points(cfg)?;
        let runs = sweep(&pts, |p| run_point(cfg, p, Some(out)))?;
        let mut files = Vec::new();
        let mut checks = Vec::new();
        for run in &runs {
            let label = run.point.label();
            files.push(format!("{label}/trajectory.csv"));
            files.push(write_text(out, format!("{label}/growth.csv"), &growth_csv(run))?);
            for f in &run.record.fits {
                checks.push(Check::at_most(format!("{label} exponent n={}", f.n), f.exponent, f.reference + cfg.gates.growth_margin));
            }
        }
        let records: Vec<&GrowthRecord> = runs.iter().map(|r| &r.record).collect();
        files.push(write_json(out, "fit.json", &records)?);
        Ok(Outcome { summary: serde_json::to_value(&records)?, files, checks })
    }
}
