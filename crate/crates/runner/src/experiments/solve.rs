use std::path::Path;

use dnls_core::io::write_solution;
use dnls_core::solver::{coercivity_spectrum, consistency_error, CoercivityReport, GevreyFit, SolitonSolution, EIGEN_LIMIT};
use serde::{Deserialize, Serialize};

use super::{points, solve_point, sweep, write_json, Experiment, Outcome, Point};
use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::manifest::Check;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub xi: [f64; 2],
    pub h: f64,
    pub n: usize,
    pub length: f64,
    /// `m_ξ L`
    pub ml: f64,
    pub residual: f64,
    pub newton_iters: usize,
    pub mass: f64,
    pub alpha: Option<f64>,
    /// `⟨Hη, η⟩ / ‖η‖²_{H¹}`, negative along the wave itself.
    pub eta_rayleigh: Option<f64>,
    /// Lowest eigenvalue of the unprojected Hessian.
    pub unprojected_min: Option<f64>,
    pub gevrey: GevreyFit,
    /// `‖η - ψ‖_{H¹(hZ)}`
    pub consistency_error: f64,
    pub file_stem: String,
}

pub fn record(p: &Point, sol: &SolitonSolution, coercivity: Option<&CoercivityReport>) -> SolveRecord {
    SolveRecord {
        xi: p.xi(),
        h: p.grid.h,
        n: p.grid.n,
        length: p.grid.length(),
        ml: p.params.m() * p.grid.length(),
        residual: sol.residual_norm,
        newton_iters: sol.newton_iters,
        mass: sol.mass(),
        alpha: coercivity.map(|c| c.alpha).or(sol.coercivity_alpha),
        eta_rayleigh: coercivity.map(|c| c.eta_rayleigh),
        unprojected_min: coercivity.and_then(|c| c.unprojected_head.first().copied()),
        gevrey: sol.gevrey,
        consistency_error: consistency_error(sol),
        file_stem: format!("{}/solution", p.label()),
    }
}

/// Solve every sweep point; with `solver.coercivity` set, also take the Hessian spectrum.
pub fn solve_all(cfg: &ExperimentConfig) -> Result<Vec<(Point, SolitonSolution, Option<CoercivityReport>)>> {
    let pts = points(cfg)?;
    if cfg.solver.coercivity {
        if let Some(p) = pts.iter().find(|p| p.grid.n > EIGEN_LIMIT) {
            return Err(RunError::Config(format!(
                "coercivity needs at most {EIGEN_LIMIT} points, h = {} gives {}; lower the period",
                p.grid.h, p.grid.n
            )));
        }
    }
    let mut plain = cfg.clone();
    plain.solver.coercivity = false;
    sweep(&pts, |p| {
        let sol = solve_point(&plain, p)?;
        let rep = if cfg.solver.coercivity { Some(coercivity_spectrum(&sol)?) } else { None };
        Ok((*p, sol, rep))
    })
}

#[derive(Default)]
pub struct Solve;

impl Experiment for Solve {
    fn name(&self) -> &'static str {
        "solve"
    }

    fn defaults(&self) -> ExperimentConfig {
        ExperimentConfig { experiment: "solve".into(), ..Default::default() }
    }

    fn run(&self, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
        let solved = solve_all(cfg)?;
        let mut files = Vec::new();
        let mut records = Vec::new();
        let mut checks = Vec::new();
        for (p, sol, rep) in &solved {
            write_solution(&out.join(p.label()), "solution", sol)?;
            files.push(format!("{}/solution.json", p.label()));
            files.push(format!("{}/solution.csv", p.label()));
            let r = record(p, sol, rep.as_ref());
            checks.push(Check::below(format!("{} residual", p.label()), r.residual, cfg.solver.tol));
            if let Some(a) = r.alpha {
                checks.push(Check::below(format!("{} -alpha", p.label()), -a, 0.0));
            }
            if let Some(q) = r.eta_rayleigh {
                checks.push(Check::below(format!("{} eta rayleigh", p.label()), q, 0.0));
            }
            records.push(r);
        }
        files.push(write_json(out, "index.json", &records)?);
        Ok(Outcome { summary: serde_json::to_value(&records)?, files, checks })
    }
}
