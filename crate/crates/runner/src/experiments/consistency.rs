use std::fmt::Write as _;
use std::path::Path;

use dnls_core::solver::consistency_error;
use serde::{Deserialize, Serialize};

use super::{points, solve_point, sweep, write_json, write_text, Experiment, Outcome};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::fit::loglog_fit;
use crate::manifest::Check;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub h: f64,
    pub n: usize,
    /// `‖η - ψ‖_{H¹(hZ)}`
    pub error: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySeries {
    pub xi: [f64; 2],
    /// Nominal consistency order of the dispersion: 2 for the Laplacian, `2n` for a stencil.
    pub order: u32,
    pub rows: Vec<ConsistencyRow>,
    /// Slope of `log error` against `log h`; absent for a single step.
    pub slope: Option<f64>,
    /// Errors decrease with `h`.
    pub monotone: bool,
}

/// Admissible slope window for a nominal order.
pub fn slope_window(cfg: &ExperimentConfig, order: u32) -> [f64; 2] {
    cfg.gates.slope_window.unwrap_or_else(|| {
        let tol = if order <= 2 { 0.3 } else { 0.4 };
        [order as f64 - tol, order as f64 + tol]
    })
}

pub fn nominal_order(cfg: &ExperimentConfig) -> u32 {
    2 * cfg.stencil_order.unwrap_or(1) as u32
}

/// Solve every point and group the errors by speed pair, sorted by decreasing `h`.
pub fn consistency(cfg: &ExperimentConfig) -> Result<Vec<ConsistencySeries>> {
    let pts = points(cfg)?;
    let rows = sweep(&pts, |p| {
        let sol = solve_point(cfg, p)?;
        Ok((p.xi(), ConsistencyRow { h: p.grid.h, n: p.grid.n, error: consistency_error(&sol), residual: sol.residual_norm }))
    })?;
    let order = nominal_order(cfg);
    let mut out: Vec<ConsistencySeries> = Vec::new();
    for (xi, row) in rows {
        match out.iter_mut().find(|s| s.xi == xi) {
            Some(s) => s.rows.push(row),
            None => out.push(ConsistencySeries { xi, order, rows: vec![row], slope: None, monotone: true }),
        }
    }
    for s in &mut out {
        s.rows.sort_by(|a, b| b.h.total_cmp(&a.h));
        let hs: Vec<f64> = s.rows.iter().map(|r| r.h).collect();
        let es: Vec<f64> = s.rows.iter().map(|r| r.error).collect();
        s.slope = loglog_fit(&hs, &es).map(|f| f.slope);
        s.monotone = es.windows(2).all(|w| w[1] < w[0]);
    }
    Ok(out)
}

#[derive(Default)]
pub struct Consistency;

impl Experiment for Consistency {
    fn name(&self) -> &'static str {
        "consistency"
    }

    fn defaults(&self) -> ExperimentConfig {
        ExperimentConfig {
            experiment: "consistency".into(),
            xi: vec![[1.0, 0.0], [1.2, 0.6]],
            h: vec![0.4, 0.2, 0.1],
            ..Default::default()
        }
    }

    fn run(&self, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
        let series = consistency(cfg)?;
        let mut csv = String::from("xi1,xi2,h,order,error\n");
        let mut checks = Vec::new();
        for s in &series {
            for r in &s.rows {
                let _ = writeln!(csv, "{},{},{},{},{:.16e}", s.xi[0], s.xi[1], r.h, s.order, r.error);
            }
            let tag = format!("xi={},{}", s.xi[0], s.xi[1]);
            if let Some(slope) = s.slope {
                let [lo, hi] = slope_window(cfg, s.order);
                checks.push(Check::within(format!("{tag} slope"), slope, lo, hi));
                checks.push(Check::flag(format!("{tag} monotone"), s.monotone));
            }
        }
        let files = vec![write_text(out, "consistency.csv", &csv)?, write_json(out, "fit.json", &series)?];
        Ok(Outcome { summary: serde_json::to_value(&series)?, files, checks })
    }
}
