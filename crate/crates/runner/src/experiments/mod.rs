//! Experiment recipes, selected by name through a [`Registry`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use dnls_core::dynamics::{evolve, EvolutionConfig, Trajectory};
use dnls_core::perturb::smooth_perturbation;
use dnls_core::registry::{no_args, Registry};
use dnls_core::solver::{solve_wave, solve_wave_dst, SolitonSolution};
use dnls_core::spectral::to_grid;
use dnls_core::waves::psi_eval;
use dnls_core::{lattice, GridField, GridSpec, WaveParams};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitialData};
use crate::error::{Result, RunError};
use crate::manifest::{Check, Manifest};

pub mod consistency;
pub mod growth;
pub mod peierls;
pub mod solve;
pub mod stability;
pub mod stencil_info;

/// What a run hands back to the driver.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub summary: serde_json::Value,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;

    /// Configuration used when no file or flag says otherwise.
    fn defaults(&self) -> ExperimentConfig;

    /// Run with a validated config, writing files under `out`.
    fn run(&self, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome>;
}

fn entry<E: Experiment + Default + 'static>(r: &mut Registry<dyn Experiment>, name: &'static str) {
    r.register(name, move |a| {
        no_args(name, a)?;
        Ok(Box::new(E::default()))
    });
}

pub fn registry() -> Registry<dyn Experiment> {
    let mut r: Registry<dyn Experiment> = Registry::new("experiment");
    entry::<solve::Solve>(&mut r, "solve");
    entry::<consistency::Consistency>(&mut r, "consistency");
    entry::<stability::Stability>(&mut r, "stability");
    entry::<growth::SobolevGrowth>(&mut r, "sobolev-growth");
    entry::<peierls::Peierls>(&mut r, "peierls");
    entry::<stencil_info::StencilInfo>(&mut r, "stencil-info");
    r
}

/// Defaults of the named experiment.
pub fn defaults(name: &str) -> Result<ExperimentConfig> {
    Ok(registry().create(name)?.defaults())
}

/// Run `cfg` end to end: output directory, worker pool, manifest, gate.
///
/// The manifest is written even when the run fails. With `cfg.gate` set, failed checks
/// turn into [`RunError::Gate`].
pub fn execute(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let experiment = registry().create(&cfg.experiment)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut manifest = Manifest::new(cfg);
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Config(e.to_string()))?;
    let result = pool.install(|| experiment.run(cfg, &cfg.out));
    manifest.wall_clock_s = start.elapsed().as_secs_f64();
    match result {
        Ok(outcome) => {
            manifest.summary = outcome.summary;
            manifest.outputs = outcome.files;
            manifest.checks = outcome.checks;
            let failed: Vec<String> = manifest.failed_checks().iter().map(|c| format!("{} = {:e} not in {}", c.name, c.value, c.bound)).collect();
            manifest.status = if failed.is_empty() { "ok".into() } else { "gate_failed".into() };
            manifest.write(&cfg.out)?;
            if cfg.gate && !failed.is_empty() {
                return Err(RunError::Gate(failed.join("; ")));
            }
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = format!("error: {e}");
            manifest.write(&cfg.out)?;
            Err(e)
        }
    }
}

/// One sweep point.
#[derive(Clone, Copy, Debug)]
pub struct Point {
    pub index: usize,
    pub params: WaveParams,
    pub grid: GridSpec,
}

impl Point {
    /// Directory name for per-point files.
    pub fn label(&self) -> String {
        format!("xi={},{}_h={}", self.params.xi1(), self.params.xi2(), self.grid.h)
    }

    pub fn xi(&self) -> [f64; 2] {
        [self.params.xi1(), self.params.xi2()]
    }
}

/// All `(ξ, h)` pairs, `ξ` outermost.
pub fn points(cfg: &ExperimentConfig) -> Result<Vec<Point>> {
    let params = cfg.params()?;
    let grids = cfg.grids()?;
    let mut out = Vec::new();
    for p in &params {
        for g in &grids {
            out.push(Point { index: out.len(), params: *p, grid: *g });
        }
    }
    Ok(out)
}

/// Evaluate `f` on every point in the current pool; results keep the point order.
pub fn sweep<T: Send>(pts: &[Point], f: impl Fn(&Point) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    pts.par_iter().map(f).collect()
}

/// The wave for `p`, with the configured stencil if any.
pub fn solve_point(cfg: &ExperimentConfig, p: &Point) -> Result<SolitonSolution> {
    let sol = match cfg.stencil_order {
        Some(n) => solve_wave_dst(&lattice::dst_coefficients(n)?, &p.params, p.grid, &cfg.solver)?,
        None => solve_wave(&p.params, p.grid, &cfg.solver)?,
    };
    Ok(sol)
}

/// Flow name for evolutions: `dnls` becomes `dst:<n>` when a stencil is configured.
pub fn flow_name(cfg: &ExperimentConfig) -> String {
    match (cfg.evolution.flow.as_str(), cfg.stencil_order) {
        ("dnls", Some(n)) => format!("dst:{n}"),
        (f, _) => f.to_string(),
    }
}

/// `ψ` sampled on the lattice.
pub fn sample_psi(p: &WaveParams, grid: GridSpec) -> GridField {
    GridField::from_fn(grid, |x| psi_eval(p, x))
}

/// Initial field of an evolution: `η` or sampled `ψ`, plus the seeded perturbation.
pub fn initial_field(cfg: &ExperimentConfig, p: &Point, sol: Option<&SolitonSolution>) -> Result<GridField> {
    let base = match (cfg.initial, sol) {
        (InitialData::Eta, Some(s)) => to_grid(&s.field),
        (InitialData::Eta, None) => return Err(RunError::Config("initial data `eta` needs a solved wave".into())),
        (InitialData::Psi, _) => sample_psi(&p.params, p.grid),
    };
    if cfg.perturbation.size == 0.0 {
        return Ok(base);
    }
    let noise = smooth_perturbation(p.grid, cfg.seed, &cfg.perturbation)?;
    Ok(base.add(&noise)?)
}

/// Evolve, stopping early once `budget_s` seconds of wall clock are spent.
///
/// Without a budget this is [`evolve`]. With one, the run proceeds in segments of
/// ten saves; the flag is true if the final time was not reached.
pub fn evolve_budgeted(f0: &GridField, e: &EvolutionConfig, budget_s: Option<f64>) -> Result<(Trajectory, bool)> {
    let Some(budget) = budget_s else {
        return Ok((evolve(f0, e)?, false));
    };
    let start = Instant::now();
    let dt = e.resolved_dt(f0.h());
    let seg_steps = e.save_every.max(1) * 10;
    let seg_time = seg_steps as f64 * dt;
    let mut seg = e.clone();
    seg.dt = Some(dt);
    let mut all: Option<Trajectory> = None;
    let mut t0 = 0.0;
    let mut f = f0.clone();
    loop {
        let remaining = e.t_final - t0;
        seg.t_final = if remaining > seg_time * (1.0 + 1e-9) { seg_time } else { remaining.max(0.0) };
        let piece = match evolve(&f, &seg) {
            Ok(t) => t,
            Err(dnls_core::Error::NonFinite { time, partial }) => {
                let merged = append(all, *partial, t0);
                return Err(dnls_core::Error::NonFinite { time: t0 + time, partial: Box::new(merged) }.into());
            }
            Err(e) => return Err(e.into()),
        };
        f = piece.last().expect("evolve saves the final frame").clone();
        let merged = append(all, piece, t0);
        t0 = *merged.times.last().expect("nonempty");
        all = Some(merged);
        if seg.t_final == remaining.max(0.0) {
            return Ok((all.expect("at least one segment"), false));
        }
        if start.elapsed().as_secs_f64() > budget {
            return Ok((all.expect("at least one segment"), true));
        }
    }
}

fn append(acc: Option<Trajectory>, piece: Trajectory, t0: f64) -> Trajectory {
    match acc {
        None => piece,
        Some(mut a) => {
            a.times.extend(piece.times.iter().skip(1).map(|t| t + t0));
            a.frames.extend(piece.frames.into_iter().skip(1));
            a.reports.extend(piece.reports.into_iter().skip(1));
            a.steps += piece.steps;
            a.wall_clock_s += piece.wall_clock_s;
            a
        }
    }
}

/// Write `text` to `out/rel`, creating parent directories, and return `rel`.
pub fn write_text(out: &Path, rel: impl Into<PathBuf>, text: &str) -> Result<String> {
    let rel = rel.into();
    let path = out.join(&rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(rel.to_string_lossy().into_owned())
}

/// `write_text` for pretty JSON.
pub fn write_json<T: serde::Serialize>(out: &Path, rel: impl Into<PathBuf>, value: &T) -> Result<String> {
    write_text(out, rel, &serde_json::to_string_pretty(value)?)
}
