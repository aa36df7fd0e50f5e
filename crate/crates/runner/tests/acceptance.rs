//! End-to-end acceptance run: nine criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p dnls-runner --test acceptance -- --nocapture` to see the lines.

use std::path::Path;
use std::time::{Duration, Instant};

use dnls_core::lattice::{norm, NormKind};
use dnls_core::oracles;
use dnls_core::perturb::smooth_perturbation;
use dnls_core::solver::{solve_wave, SolverOptions};
use dnls_core::{GridSpec, WaveParams};
use dnls_runner::experiments::consistency::ConsistencySeries;
use dnls_runner::experiments::growth::GrowthRecord;
use dnls_runner::experiments::solve::SolveRecord;
use dnls_runner::experiments::stability::StabilityRecord;
use dnls_runner::experiments::{defaults, execute};
use dnls_runner::{ExperimentConfig, InitialData};
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};
use serde::de::DeserializeOwned;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn run<T: DeserializeOwned>(cfg: &ExperimentConfig) -> T {
    let m = execute(cfg).unwrap_or_else(|e| panic!("{} failed: {e}", cfg.experiment));
    serde_json::from_value(m.summary).expect("summary shape")
}

fn config(name: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = defaults(name).unwrap();
    cfg.out = out.join(name);
    cfg
}

fn in_window(x: f64, [lo, hi]: [f64; 2]) -> bool {
    lo <= x && x <= hi
}

fn rel_spread(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn slopes(cfg: &ExperimentConfig, window: [f64; 2]) -> Outcome {
    let series: Vec<ConsistencySeries> = run(cfg);
    let sweep_ok = series.len() == 2 && series.iter().all(|s| s.rows.iter().map(|r| r.h).eq([0.4, 0.2, 0.1]));
    let ok = sweep_ok && series.iter().all(|s| s.slope.is_some_and(|v| in_window(v, window)));
    let text: Vec<String> = series.iter().map(|s| format!("ξ=({},{}) slope {:.3}", s.xi[0], s.xi[1], s.slope.unwrap_or(f64::NAN))).collect();
    outcome(ok, format!("{} in [{}, {}]", text.join(", "), window[0], window[1]))
}

fn consistency_order(out: &Path) -> Outcome {
    let mut cfg = config("consistency", out);
    cfg.xi = vec![[1.0, 0.0], [1.2, 0.6]];
    cfg.h = vec![0.4, 0.2, 0.1];
    slopes(&cfg, [1.7, 2.3])
}

fn dst_order(out: &Path) -> Outcome {
    let mut cfg = config("consistency", out);
    cfg.out = out.join("consistency-dst");
    cfg.xi = vec![[1.0, 0.0], [1.2, 0.6]];
    cfg.h = vec![0.4, 0.2, 0.1];
    cfg.stencil_order = Some(2);
    slopes(&cfg, [3.6, 4.4])
}

fn dealiased_travel(out: &Path) -> Outcome {
    let mut cfg = config("stability", out);
    cfg.out = out.join("dealiased-travel");
    cfg.xi = vec![[1.2, 0.6]];
    cfg.h = vec![0.1];
    cfg.evolution.flow = "dealiased".into();
    cfg.evolution.scheme = "rk4".into();
    cfg.evolution.dt = Some(1e-3);
    cfg.evolution.t_final = 10.0;
    cfg.save_interval = Some(0.1);
    cfg.perturbation.size = 0.0;
    let summary: serde_json::Value = run(&cfg);
    let r: StabilityRecord = serde_json::from_value(summary["points"][0].clone()).unwrap();
    let ok = r.max_delta < 1e-6 && r.lost_at.is_none() && (r.t_reached - 10.0).abs() < 1e-9;
    outcome(ok, format!("sup δ = {:.2e} < 1e-6 over t ≤ {}, dt = {}", r.max_delta, r.t_reached, r.dt))
}

fn standing_stability(out: &Path) -> Outcome {
    let mut cfg = config("stability", out);
    cfg.out = out.join("standing-stability");
    cfg.xi = vec![[1.0, 0.0]];
    cfg.h = vec![0.1];
    cfg.evolution.t_final = 200.0;
    cfg.save_interval = Some(0.1);
    cfg.perturbation.size = 1e-3;
    cfg.seed = 2024;
    let grid = cfg.grids().unwrap()[0];
    let size = norm(&smooth_perturbation(grid, cfg.seed, &cfg.perturbation).unwrap(), NormKind::H1);
    let summary: serde_json::Value = run(&cfg);
    let r: StabilityRecord = serde_json::from_value(summary["points"][0].clone()).unwrap();
    let ok = (size - 1e-3).abs() < 1e-12 && r.max_delta < 1e-2 && r.lost_at.is_none() && (r.t_reached - 200.0).abs() < 1e-9;
    outcome(ok, format!("perturbation H¹ {size:.3e}, δ(0) = {:.2e}, sup δ = {:.2e} < 1e-2 over t ≤ {}", r.delta0, r.max_delta, r.t_reached))
}

fn quasi_travel_run(out: &Path, tag: &str, dt: Option<f64>) -> Vec<StabilityRecord> {
    let mut cfg = config("stability", out);
    cfg.out = out.join(tag);
    cfg.xi = vec![[1.0, 0.5]];
    cfg.h = vec![0.2, 0.1];
    cfg.initial = InitialData::Psi;
    cfg.t_final_over_h = Some(10.0);
    cfg.perturbation.size = 0.0;
    cfg.evolution.dt = dt;
    let summary: serde_json::Value = run(&cfg);
    serde_json::from_value(summary["points"].clone()).unwrap()
}

fn quasi_travel(out: &Path) -> Outcome {
    let recs = quasi_travel_run(out, "quasi-travel", None);
    // integrator error of the default step, bounded by a run with dt ≤ default/2
    let fine = quasi_travel_run(out, "quasi-travel-fine-dt", Some(0.0025));
    let integrator = recs
        .iter()
        .zip(&fine)
        .flat_map(|(a, b)| [rel_spread(a.max_profile_deviation, b.max_profile_deviation), rel_spread(a.max_rate_deviation, b.max_rate_deviation)])
        .fold(0.0, f64::max);
    let (c, f) = (&recs[0], &recs[1]);
    let profile = c.max_profile_deviation / f.max_profile_deviation;
    let rates = c.max_rate_deviation / f.max_rate_deviation;
    let complete = recs.iter().all(|r| r.lost_at.is_none() && (r.t_reached - 10.0 / r.h).abs() < 1e-9);
    let ok = complete && in_window(profile, [3.0, 5.0]) && in_window(rates, [2.0, 8.0]) && integrator < 0.1;
    outcome(
        ok,
        format!(
            "profile deviation {:.2e} → {:.2e}, ratio {profile:.2} in [3, 5]; rate deviation ratio {rates:.2} in [2, 8]; dt sensitivity {integrator:.1e} < 0.1",
            c.max_profile_deviation, f.max_profile_deviation
        ),
    )
}

fn spectra(out: &Path) -> Vec<SolveRecord> {
    let mut cfg = config("solve", out);
    cfg.xi = vec![[1.0, 0.0], [1.2, 0.6]];
    cfg.h = vec![0.2, 0.1];
    cfg.min_length = 51.2;
    cfg.solver.coercivity = true;
    run(&cfg)
}

fn coercivity(recs: &[SolveRecord]) -> Outcome {
    let mut ok = true;
    let mut text = Vec::new();
    for pair in recs.chunks(2) {
        let (a, b) = (pair[0].alpha.unwrap_or(f64::NAN), pair[1].alpha.unwrap_or(f64::NAN));
        let spread = rel_spread(a, b);
        let negative = pair.iter().all(|r| r.eta_rayleigh.is_some_and(|q| q < 0.0) && r.unprojected_min.is_some_and(|q| q < 0.0));
        ok &= a > 0.0 && b > 0.0 && spread < 0.2 && negative;
        text.push(format!(
            "ξ=({},{}) α {a:.4}, {b:.4} (spread {:.1}%), ⟨Hη,η⟩/‖η‖² {:.3}",
            pair[0].xi[0],
            pair[0].xi[1],
            100.0 * spread,
            pair[1].eta_rayleigh.unwrap_or(f64::NAN)
        ));
    }
    outcome(ok, text.join("; "))
}

fn gevrey(recs: &[SolveRecord]) -> Outcome {
    let mut ok = true;
    let mut text = Vec::new();
    for pair in recs.chunks(2) {
        let (a, b) = (&pair[0].gevrey, &pair[1].gevrey);
        let spread = rel_spread(a.eps, b.eps);
        ok &= a.r2 > 0.99 && b.r2 > 0.99 && spread < 0.15;
        text.push(format!(
            "ξ=({},{}) ε {:.3}, {:.3} (spread {:.1}%), R² {:.4}, {:.4}",
            pair[0].xi[0],
            pair[0].xi[1],
            a.eps,
            b.eps,
            100.0 * spread,
            a.r2,
            b.r2
        ));
    }
    outcome(ok, text.join("; "))
}

/// Largest value of `check` over `cases` seeds drawn by a fixed-seed proptest runner; fails past `tol`.
fn property(name: &str, cases: u32, tol: f64, check: impl Fn(u64) -> f64) -> (bool, String) {
    let config = Config { cases, rng_seed: RngSeed::Fixed(0x5eed), failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new(config);
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&proptest::num::u64::ANY, |seed| {
        let e = check(seed);
        worst.set(worst.get().max(e));
        if e < tol {
            Ok(())
        } else {
            Err(TestCaseError::fail(format!("seed {seed}: {e:e}")))
        }
    });
    (result.is_ok(), format!("{name} {:.1e} < {tol:.0e}", worst.get()))
}

fn property_suites() -> Outcome {
    let wave = |h: f64| {
        let p = WaveParams::new(1.0, 0.5).unwrap();
        solve_wave(&p, GridSpec::with_min_length(h, 60.0).unwrap(), &SolverOptions::default()).unwrap().field
    };
    let waves = [wave(0.4), wave(0.2), wave(0.1)];
    let results = [
        property("gradient-vs-FD", 64, 1e-7, oracles::gradient_fd_error),
        property("Hessian symmetry", 64, 1e-11, oracles::hessian_asymmetry),
        property("Parseval", 64, 1e-12, oracles::parseval_error),
        property("H_grid = H_deal - E1", 64, 1e-10, oracles::aliasing_identity_error),
        property("fold-vs-sample", 64, 1e-10, oracles::fold_sample_error),
        property("mass over 1e4 steps", 8, 1e-11, |s| oracles::strang_mass_drift(s, 10_000)),
        property("projection round trip", 64, 1e-9, |s| oracles::projection_round_trip_error(&waves[(s % 3) as usize], s)),
        property("convolution n=64", 8, 1e-11, |s| oracles::convolution_error(s, 64)),
    ];
    let ok = results.iter().all(|r| r.0);
    outcome(ok, results.iter().map(|r| r.1.as_str()).collect::<Vec<_>>().join(", "))
}

fn sobolev_growth(out: &Path) -> Outcome {
    let mut cfg = config("sobolev-growth", out);
    cfg.xi = vec![[1.0, 0.0]];
    cfg.h = vec![0.1];
    cfg.evolution.t_final = 500.0;
    cfg.perturbation.size = 1e-3;
    cfg.seed = 2024;
    let recs: Vec<GrowthRecord> = run(&cfg);
    let r = &recs[0];
    let mut ok = (r.t_reached - 500.0).abs() < 1e-9;
    let mut text = Vec::new();
    for n in [2, 3] {
        match r.fits.iter().find(|f| f.n == n) {
            Some(f) => {
                let bound = (n as f64 - 1.0) / 2.0 + 0.3;
                ok &= f.exponent <= bound;
                text.push(format!("n={n} exponent {:.2e} ≤ {bound}", f.exponent));
            }
            None => {
                ok = false;
                text.push(format!("n={n} missing"));
            }
        }
    }
    outcome(ok, format!("{} to t = {}", text.join(", "), r.t_reached))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    // criteria 6 and 7 read the same solves
    let solved = std::cell::OnceCell::new();
    let spectra_of = || solved.get_or_init(|| spectra(out)).as_slice();
    let criteria: Vec<(&str, Option<Duration>, Box<dyn FnMut() -> Outcome + '_>)> = vec![
        ("1 consistency order", Some(Duration::from_secs(60)), Box::new(|| consistency_order(out))),
        ("2 DST order", Some(Duration::from_secs(120)), Box::new(|| dst_order(out))),
        ("3 exact travel, dealiased flow", None, Box::new(|| dealiased_travel(out))),
        ("4 standing-wave stability", Some(Duration::from_secs(300)), Box::new(|| standing_stability(out))),
        ("5 quasi-traveling wave", None, Box::new(|| quasi_travel(out))),
        ("6 coercivity uniformity", None, Box::new(|| coercivity(spectra_of()))),
        ("7 Gevrey decay", None, Box::new(|| gevrey(spectra_of()))),
        ("8 property suites", Some(Duration::from_secs(180)), Box::new(property_suites)),
        ("9 Sobolev growth", None, Box::new(|| sobolev_growth(out))),
    ];
    let mut failed = Vec::new();
    for (name, limit, mut f) in criteria {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took < l);
        let pass = o.passed && in_time;
        let budget = limit.map(|l| format!(" < {}s", l.as_secs())).unwrap_or_default();
        println!("{} {name}: {} ({:.1}s{budget})", if pass { "PASS" } else { "FAIL" }, o.detail, took.as_secs_f64());
        if !pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
