use std::fmt::Write as _;
use std::path::Path;

use dnls_core::dynamics::{conservation_report, ConservationReport, Trajectory};
use dnls_core::io::{track_csv, write_trajectory};
use dnls_core::lattice::wrap_position;
use dnls_core::modulation::{envelope_check, track_lenient, EnvelopeMode, ModulationTrack};
use dnls_core::perturb::PerturbationSpec;
use dnls_core::waves::psi_eval;
use dnls_core::GridField;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{evolve_budgeted, flow_name, initial_field, points, solve_point, sweep, write_json, write_text, Experiment, Outcome, Point};
use crate::config::{ExperimentConfig, InitialData};
use crate::error::{Result, RunError};
use crate::manifest::Check;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub mode: EnvelopeMode,
    pub kappa: f64,
    pub ell: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub xi: [f64; 2],
    pub h: f64,
    pub n: usize,
    pub length: f64,
    pub flow: String,
    pub scheme: String,
    pub dt: f64,
    pub t_final: f64,
    /// Last saved time; below `t_final` when the budget ran out.
    pub t_reached: f64,
    pub steps: usize,
    pub truncated: bool,
    pub initial: InitialData,
    pub delta0: f64,
    pub max_delta: f64,
    /// `sup_t sup_g |u_g - e^{iγ}ψ(g - x0)|`
    pub max_profile_deviation: f64,
    /// `sup_t |γ̇ - ξ₁| + |ẋ0 - ξ₂|`
    pub max_rate_deviation: f64,
    pub lost_at: Option<(usize, f64)>,
    /// `max_t ‖A⁻¹‖ / ‖A⁻¹‖` at `t = 0`.
    pub a_inv_growth: f64,
    pub conservation: ConservationReport,
    pub envelopes: Vec<EnvelopeSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub deviation: f64,
    pub rate_deviation: f64,
}

pub struct StabilityRun {
    pub point: Point,
    pub record: StabilityRecord,
    pub trajectory: Trajectory,
    pub track: ModulationTrack,
    pub profile: Vec<ProfileRow>,
}

/// `sup_g |f_g - e^{iγ}ψ(g - x0)|` with `g - x0` taken modulo the period.
pub fn profile_deviation(f: &GridField, p: &dnls_core::WaveParams, gamma: f64, x0: f64) -> f64 {
    let l = f.length();
    let phase = Complex64::from_polar(1.0, gamma);
    (0..f.n_points()).map(|j| (f.values()[j] - phase * psi_eval(p, wrap_position(f.position(j) - x0, l))).norm()).fold(0.0, f64::max)
}

/// Evolve the configured initial field at one point and track it against the discrete wave.
///
/// A blow-up writes nothing here; the caller gets [`dnls_core::Error::NonFinite`] with
/// the partial trajectory.
pub fn run_point(cfg: &ExperimentConfig, p: &Point) -> Result<StabilityRun> {
    let sol = solve_point(cfg, p)?;
    let f0 = initial_field(cfg, p, Some(&sol))?;
    let mut e = cfg.evolution_for(p.grid.h);
    e.flow = flow_name(cfg);
    let (traj, truncated) = evolve_budgeted(&f0, &e, cfg.budget_s)?;
    let track = track_lenient(&traj, &sol.field)?;
    let profile: Vec<ProfileRow> = (0..track.times.len())
        .map(|i| {
            let s = track.states[i];
            let (gd, xd) = track.rates[i];
            ProfileRow {
                t: track.times[i],
                deviation: profile_deviation(&traj.frames[i], &p.params, s.gamma, s.x0),
                rate_deviation: (gd - p.params.xi1()).abs() + (xd - p.params.xi2()).abs(),
            }
        })
        .collect();
    let mut envelopes = Vec::new();
    let mut modes = vec![EnvelopeMode::Gronwall];
    modes.extend(cfg.sobolev_orders.iter().map(|&n| EnvelopeMode::Sobolev(n)));
    for mode in modes {
        let r = envelope_check(&track, &traj, p.grid.h, &p.params, sol.gevrey.eps, mode)?;
        envelopes.push(EnvelopeSummary { mode, kappa: r.kappa, ell: r.ell, max_ratio: r.max_ratio });
    }
    let a0 = track.a_inv_norm[0];
    let record = StabilityRecord {
        xi: p.xi(),
        h: p.grid.h,
        n: p.grid.n,
        length: p.grid.length(),
        flow: traj.flow.clone(),
        scheme: traj.scheme.clone(),
        dt: traj.dt,
        t_final: e.t_final,
        t_reached: *traj.times.last().expect("nonempty"),
        steps: traj.steps,
        truncated,
        initial: cfg.initial,
        delta0: track.delta[0],
        max_delta: track.delta.iter().copied().fold(0.0, f64::max),
        max_profile_deviation: profile.iter().map(|r| r.deviation).fold(0.0, f64::max),
        max_rate_deviation: profile.iter().map(|r| r.rate_deviation).fold(0.0, f64::max),
        lost_at: track.lost_at,
        a_inv_growth: track.a_inv_norm.iter().copied().fold(0.0, f64::max) / a0,
        conservation: conservation_report(&traj),
        envelopes,
    };
    Ok(StabilityRun { point: *p, record, trajectory: traj, track, profile })
}

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut s = String::from("t,deviation,rate_deviation\n");
    for r in rows {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r.t, r.deviation, r.rate_deviation);
    }
    s
}

/// Per-point files: trajectory, track, profile deviation and the record.
pub fn write_run(out: &Path, run: &StabilityRun, snapshots: bool) -> Result<Vec<String>> {
    let label = run.point.label();
    write_trajectory(&out.join(&label), &run.trajectory, snapshots)?;
    Ok(vec![
        format!("{label}/trajectory.csv"),
        write_text(out, format!("{label}/track.csv"), &track_csv(&run.track))?,
        write_text(out, format!("{label}/profile.csv"), &profile_csv(&run.profile))?,
        write_json(out, format!("{label}/envelope.json"), &run.record)?,
    ])
}

/// Ratio of successive values of `get` between consecutive steps (coarse over fine), per speed pair.
pub fn refinement_ratios(records: &[StabilityRecord], get: impl Fn(&StabilityRecord) -> f64) -> Vec<([f64; 2], f64, f64, f64)> {
    let mut out = Vec::new();
    let mut sorted: Vec<&StabilityRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.xi.partial_cmp(&b.xi).unwrap_or(std::cmp::Ordering::Equal).then(b.h.total_cmp(&a.h)));
    for w in sorted.windows(2) {
        if w[0].xi == w[1].xi {
            out.push((w[0].xi, w[0].h, w[1].h, get(w[0]) / get(w[1])));
        }
    }
    out
}

#[derive(Default)]
pub struct Stability;

impl Experiment for Stability {
    fn name(&self) -> &'static str {
        "stability"
    }

    fn defaults(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            experiment: "stability".into(),
            save_interval: Some(0.5),
            perturbation: PerturbationSpec::default(),
            sobolev_orders: vec![1, 2],
            ..Default::default()
        };
        cfg.evolution.t_final = 200.0;
        cfg
    }

    fn run(&self, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
        let pts = points(cfg)?;
        let runs = sweep(&pts, |p| match run_point(cfg, p) {
            Err(RunError::Core(dnls_core::Error::NonFinite { time, partial })) => {
                write_trajectory(&out.join(p.label()), &partial, cfg.snapshots)?;
                Err(dnls_core::Error::NonFinite { time, partial }.into())
            }
            other => other,
        })?;
        let mut files = Vec::new();
        let mut checks = Vec::new();
        for run in &runs {
            files.extend(write_run(out, run, cfg.snapshots)?);
            let tag = run.point.label();
            let r = &run.record;
            checks.push(Check::below(format!("{tag} max delta"), r.max_delta, cfg.gates.delta_max));
            checks.push(Check::flag(format!("{tag} orbit kept"), r.lost_at.is_none() && !r.truncated));
            checks.push(Check::below(format!("{tag} A inverse growth"), r.a_inv_growth, 2.0));
        }
        let records: Vec<StabilityRecord> = runs.into_iter().map(|r| r.record).collect();
        let summary = serde_json::json!({
            "points": records,
            "profile_deviation_ratios": refinement_ratios(&records, |r| r.max_profile_deviation),
            "rate_deviation_ratios": refinement_ratios(&records, |r| r.max_rate_deviation),
        });
        files.push(write_json(out, "index.json", &summary)?);
        Ok(Outcome { summary, files, checks })
    }
}
