//! Time integration of the lattice flows with conservation monitoring.
//!
//! Every flow has the form `∂_t u = i(D u + N(u))` where `D` is a second-difference
//! operator (symbol `-s(ω)`) and `N` a cubic nonlinearity. With this sign the
//! traveling waves `e^{iξ₁t} η(x - ξ₂t)` built by [`crate::solver`] are exact solutions
//! of the dealiased flow.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{propagate, Dispersion, Laplacian, Stencil};
use crate::error::{Error, Result};
use crate::functionals::{energy_report, EnergyReport};
use crate::lattice::GridField;
use crate::registry::{no_args, parse_order, Registry};
use crate::spectral::{dealiased_cubic, grid_cubic, to_grid, to_spectral};

pub trait Flow: Send + Sync {
    /// Registry spec that recreates this flow.
    fn name(&self) -> String;

    fn dispersion(&self) -> &dyn Dispersion;

    /// The cubic term `N(u)` on the lattice.
    fn nonlinear(&self, f: &GridField) -> GridField;

    /// True when `N(u) = |u|²u` site by site, so `∂_t u = iN(u)` is solved exactly by a phase rotation.
    fn pointwise(&self) -> bool;

    /// `i(D f + N(f))`
    fn rhs(&self, f: &GridField) -> GridField {
        let lin = self.dispersion().apply(f).expect("flow dispersion fits its grid");
        let non = self.nonlinear(f);
        let values = lin.values().iter().zip(non.values()).map(|(a, b)| (a + b) * Complex64::new(0.0, 1.0)).collect();
        GridField::new(f.h(), values).expect("same grid")
    }
}

/// The lattice equation with the three-point Laplacian and the pointwise cubic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dnls;

impl Flow for Dnls {
    fn name(&self) -> String {
        "dnls".into()
    }
    fn dispersion(&self) -> &dyn Dispersion {
        &Laplacian
    }
    fn nonlinear(&self, f: &GridField) -> GridField {
        grid_cubic(f)
    }
    fn pointwise(&self) -> bool {
        true
    }
}

/// Hamiltonian flow of the dealiased energy: the cubic is replaced by `P(|u|²u)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dealiased;

impl Flow for Dealiased {
    fn name(&self) -> String {
        "dealiased".into()
    }
    fn dispersion(&self) -> &dyn Dispersion {
        &Laplacian
    }
    fn nonlinear(&self, f: &GridField) -> GridField {
        to_grid(&dealiased_cubic(&to_spectral(f)))
    }
    fn pointwise(&self) -> bool {
        false
    }
}

/// Self-trapping lattice with a wide stencil and the pointwise cubic.
#[derive(Clone, Debug)]
pub struct Dst {
    stencil: Stencil,
}

impl Dst {
    pub fn new(stencil: Stencil) -> Self {
        Self { stencil }
    }
}

impl Flow for Dst {
    fn name(&self) -> String {
        self.stencil.name()
    }
    fn dispersion(&self) -> &dyn Dispersion {
        &self.stencil
    }
    fn nonlinear(&self, f: &GridField) -> GridField {
        grid_cubic(f)
    }
    fn pointwise(&self) -> bool {
        true
    }
}

/// Built-in flows: `dnls`, `dealiased`, `dst:<n>`.
pub fn flow_registry() -> Registry<dyn Flow> {
    let mut r: Registry<dyn Flow> = Registry::new("flow");
    r.register("dnls", |a| {
        no_args("dnls", a)?;
        Ok(Box::new(Dnls))
    });
    r.register("dealiased", |a| {
        no_args("dealiased", a)?;
        Ok(Box::new(Dealiased))
    });
    r.register("dst", |a| Ok(Box::new(Dst::new(Stencil::dst(parse_order("dst", a)?)?))));
    r
}

pub trait Integrator: Send + Sync {
    fn name(&self) -> String;
    fn step(&self, flow: &dyn Flow, f: &GridField, dt: f64) -> GridField;
}

/// Kinetic half step, exact nonlinear step, kinetic half step.
#[derive(Clone, Copy, Debug, Default)]
pub struct Strang;

impl Integrator for Strang {
    fn name(&self) -> String {
        "strang".into()
    }

    fn step(&self, flow: &dyn Flow, f: &GridField, dt: f64) -> GridField {
        step_strang(flow, f, dt)
    }
}

/// Fourth-order Runge–Kutta in the interaction picture: the linear part is
/// integrated exactly and RK4 runs on `v = e^{-tD}u`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rk4;

impl Integrator for Rk4 {
    fn name(&self) -> String {
        "rk4".into()
    }

    fn step(&self, flow: &dyn Flow, f: &GridField, dt: f64) -> GridField {
        let d = flow.dispersion();
        let n_dt = |g: &GridField| scaled(&flow.nonlinear(g), Complex64::new(0.0, dt));
        let e = |g: &GridField| propagate(d, g, 0.5 * dt);
        let a = n_dt(f);
        let b = n_dt(&e(&axpy(f, 0.5, &a)));
        let ev = e(f);
        let c = n_dt(&axpy(&ev, 0.5, &b));
        let eev = e(&ev);
        let ec = e(&c);
        let dd = n_dt(&axpy(&eev, 1.0, &ec));
        let ea = e(&e(&a));
        let ebc = e(&axpy(&b, 1.0, &c));
        let values = (0..f.n_points())
            .map(|j| eev.values()[j] + (ea.values()[j] + 2.0 * ebc.values()[j] + dd.values()[j]) / 6.0)
            .collect();
        GridField::new(f.h(), values).expect("same grid")
    }
}

fn scaled(f: &GridField, c: Complex64) -> GridField {
    f.scale(c)
}

fn axpy(x: &GridField, s: f64, y: &GridField) -> GridField {
    let values = x.values().iter().zip(y.values()).map(|(a, b)| a + b * s).collect();
    GridField::new(x.h(), values).expect("same grid")
}

/// Built-in integrators: `strang`, `rk4`.
pub fn integrator_registry() -> Registry<dyn Integrator> {
    let mut r: Registry<dyn Integrator> = Registry::new("integrator");
    r.register("strang", |a| {
        no_args("strang", a)?;
        Ok(Box::new(Strang))
    });
    r.register("rk4", |a| {
        no_args("rk4", a)?;
        Ok(Box::new(Rk4))
    });
    r
}

/// One Strang step. The nonlinear substep is the exact rotation `u e^{i|u|²dt}` for
/// pointwise flows and a single RK4 step otherwise.
pub fn step_strang(flow: &dyn Flow, f: &GridField, dt: f64) -> GridField {
    let d = flow.dispersion();
    let half = propagate(d, f, 0.5 * dt);
    let mid = if flow.pointwise() {
        let values = half.values().iter().map(|v| v * Complex64::from_polar(1.0, v.norm_sqr() * dt)).collect();
        GridField::new(f.h(), values).expect("same grid")
    } else {
        rk4_nonlinear(flow, &half, dt)
    };
    propagate(d, &mid, 0.5 * dt)
}

fn rk4_nonlinear(flow: &dyn Flow, f: &GridField, dt: f64) -> GridField {
    let k = |g: &GridField| scaled(&flow.nonlinear(g), Complex64::new(0.0, 1.0));
    let k1 = k(f);
    let k2 = k(&axpy(f, 0.5 * dt, &k1));
    let k3 = k(&axpy(f, 0.5 * dt, &k2));
    let k4 = k(&axpy(f, dt, &k3));
    let values = (0..f.n_points())
        .map(|j| f.values()[j] + (k1.values()[j] + 2.0 * k2.values()[j] + 2.0 * k3.values()[j] + k4.values()[j]) * (dt / 6.0))
        .collect();
    GridField::new(f.h(), values).expect("same grid")
}

/// Right-hand side of a named flow.
pub fn rhs(f: &GridField, flow: &dyn Flow) -> GridField {
    flow.rhs(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    /// Time step; `None` selects `min(0.01, h²/2)`.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub flow: String,
    pub scheme: String,
    /// Save a frame every this many steps.
    pub save_every: usize,
    /// Orders `n` of the `Ḣⁿ` norms recorded at each save.
    pub sobolev_orders: Vec<u32>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { dt: None, t_final: 1.0, flow: "dnls".into(), scheme: "strang".into(), save_every: 100, sobolev_orders: vec![1] }
    }
}

impl EvolutionConfig {
    pub fn resolved_dt(&self, h: f64) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(h))
    }
}

pub fn default_dt(h: f64) -> f64 {
    0.01_f64.min(0.5 * h * h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub frames: Vec<GridField>,
    pub reports: Vec<EnergyReport>,
    pub steps: usize,
    pub dt: f64,
    pub flow: String,
    pub scheme: String,
    pub wall_clock_s: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&GridField> {
        self.frames.last()
    }
}

/// Integrate `f0` with a fixed step, saving a frame and an [`EnergyReport`] every
/// `save_every` steps and at the end. The last step is shortened to land on `t_final`.
pub fn evolve(f0: &GridField, cfg: &EvolutionConfig) -> Result<Trajectory> {
    let flow = flow_registry().create(&cfg.flow)?;
    let integrator = integrator_registry().create(&cfg.scheme)?;
    evolve_with(f0, cfg, flow.as_ref(), integrator.as_ref())
}

pub fn evolve_with(f0: &GridField, cfg: &EvolutionConfig, flow: &dyn Flow, integrator: &dyn Integrator) -> Result<Trajectory> {
    let dt = cfg.resolved_dt(f0.h());
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(cfg.t_final >= 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::Config(format!("t_final must be nonnegative, got {}", cfg.t_final)));
    }
    if cfg.save_every == 0 {
        return Err(Error::Config("save_every must be at least 1".into()));
    }
    if let Some(s) = flow.dispersion().stencil() {
        if f0.n_points() <= 2 * s.half_width() {
            return Err(Error::StencilTooWide { half_width: s.half_width(), n_points: f0.n_points() });
        }
    }
    let start = Instant::now();
    let n_steps = ((cfg.t_final / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut traj = Trajectory {
        times: vec![0.0],
        frames: vec![f0.clone()],
        reports: vec![energy_report(f0, &cfg.sobolev_orders)],
        steps: 0,
        dt,
        flow: flow.name(),
        scheme: integrator.name(),
        wall_clock_s: 0.0,
    };
    let mut f = f0.clone();
    let mut t = 0.0;
    for step in 1..=n_steps {
        let this_dt = if step == n_steps { cfg.t_final - (n_steps - 1) as f64 * dt } else { dt };
        f = integrator.step(flow, &f, this_dt);
        t = if step == n_steps { cfg.t_final } else { step as f64 * dt };
        traj.steps = step;
        if !f.is_finite() {
            traj.wall_clock_s = start.elapsed().as_secs_f64();
            return Err(Error::NonFinite { time: t, partial: Box::new(traj) });
        }
        if step % cfg.save_every == 0 || step == n_steps {
            traj.times.push(t);
            traj.reports.push(energy_report(&f, &cfg.sobolev_orders));
            traj.frames.push(f.clone());
        }
    }
    let _ = t;
    traj.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub momentum_drift: f64,
}

/// Largest drift of mass, lattice energy and momentum from their initial values, relative
/// to the initial value (or to the initial mass when the quantity starts at zero).
pub fn conservation_report(traj: &Trajectory) -> ConservationReport {
    let first = &traj.reports[0];
    let scale = |x0: f64| if x0.abs() > 1e-12 * first.mass.max(1e-300) { x0.abs() } else { first.mass.max(1e-300) };
    let drift = |get: &dyn Fn(&EnergyReport) -> f64| {
        let x0 = get(first);
        let s = scale(x0);
        traj.reports.iter().map(|r| (get(r) - x0).abs() / s).fold(0.0, f64::max)
    };
    ConservationReport {
        mass_drift: drift(&|r| r.mass),
        energy_drift: drift(&|r| r.hamiltonian_grid),
        momentum_drift: drift(&|r| r.momentum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{mass_grid, momentum};
    use crate::lattice::GridSpec;
    use crate::solver::{solve_wave, SolverOptions};
    use crate::spectral::shift;
    use crate::waves::WaveParams;

    fn pulse(grid: GridSpec) -> GridField {
        GridField::from_fn(grid, |x| Complex64::from_polar(1.2 / (0.9 * x).cosh(), 0.4 * x))
    }

    fn cfg(flow: &str, scheme: &str, dt: f64, t: f64) -> EvolutionConfig {
        EvolutionConfig { dt: Some(dt), t_final: t, flow: flow.into(), scheme: scheme.into(), save_every: 1_000_000, sobolev_orders: vec![] }
    }

    #[test]
    fn constant_field_rotates() {
        let grid = GridSpec::new(0.2, 32).unwrap();
        let c = Complex64::new(0.6, 0.3);
        let f = GridField::from_fn(grid, |_| c);
        let r = rhs(&f, &Dnls);
        assert!(r.values().iter().all(|v| (v - Complex64::new(0.0, c.norm_sqr()) * c).norm() < 1e-13));
        let traj = evolve(&f, &cfg("dnls", "strang", 0.01, 1.0)).unwrap();
        let want = c * Complex64::from_polar(1.0, c.norm_sqr());
        assert!(traj.last().unwrap().values().iter().all(|v| (v - want).norm() < 1e-12));
    }

    #[test]
    fn zero_dt_and_zero_field() {
        let grid = GridSpec::new(0.2, 32).unwrap();
        let f = pulse(grid);
        assert!(Strang.step(&Dnls, &f, 0.0).sub(&f).unwrap().max_abs() < 1e-15);
        let z = GridField::zeros(grid);
        let traj = evolve(&z, &cfg("dnls", "strang", 0.01, 0.5)).unwrap();
        assert_eq!(traj.last().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rhs_preserves_symmetric_class() {
        let grid = GridSpec::new(0.25, 64).unwrap();
        let f = GridField::from_fn(grid, |x| Complex64::new((-x * x / 4.0).exp(), 0.0));
        for flow in [&Dnls as &dyn Flow, &Dealiased] {
            let r = to_spectral(&rhs(&f, flow));
            // i × (real-coefficient field) has purely imaginary coefficients
            assert!(r.coeffs().iter().all(|c| c.re.abs() < 1e-12));
        }
    }

    #[test]
    fn dealiased_rhs_of_traveling_wave() {
        let p = WaveParams::new(1.2, 0.6).unwrap();
        let g = GridSpec::with_min_length(0.2, 80.0).unwrap();
        let sol = solve_wave(&p, g, &SolverOptions::default()).unwrap();
        let eta = to_grid(&sol.field);
        // ∂_t u = iξ₁ η - ξ₂ ∂_x η at t = 0
        let want = sol.field.scale(Complex64::new(0.0, p.xi1())).axpy(-p.xi2(), &sol.field.derivative()).unwrap();
        let got = to_spectral(&rhs(&eta, &Dealiased));
        assert!(got.sub(&want).unwrap().max_abs() < 1e-9 * want.max_abs());
    }

    #[test]
    fn strang_mass_conservation_long_run() {
        let grid = GridSpec::new(0.25, 128).unwrap();
        let f = pulse(grid);
        let mut c = cfg("dnls", "strang", 0.005, 50.0);
        c.save_every = 1000;
        let traj = evolve(&f, &c).unwrap();
        assert_eq!(traj.steps, 10_000);
        let rep = conservation_report(&traj);
        assert!(rep.mass_drift < 1e-11, "{rep:?}");
    }

    fn global_error(flow: &str, scheme: &str, dt: f64) -> f64 {
        let grid = GridSpec::new(0.25, 128).unwrap();
        let f = pulse(grid);
        let reference = evolve(&f, &cfg(flow, scheme, dt / 8.0, 1.0)).unwrap();
        let coarse = evolve(&f, &cfg(flow, scheme, dt, 1.0)).unwrap();
        coarse.last().unwrap().sub(reference.last().unwrap()).unwrap().max_abs()
    }

    #[test]
    fn strang_is_second_order() {
        for flow in ["dnls", "dealiased"] {
            let e1 = global_error(flow, "strang", 0.02);
            let e2 = global_error(flow, "strang", 0.01);
            let slope = (e1 / e2).log2();
            assert!((1.8..2.2).contains(&slope), "{flow}: slope {slope}");
        }
    }

    #[test]
    fn interaction_picture_rk4_is_fourth_order() {
        let e1 = global_error("dnls", "rk4", 0.04);
        let e2 = global_error("dnls", "rk4", 0.02);
        let slope = (e1 / e2).log2();
        assert!((3.6..4.4).contains(&slope), "slope {slope}");
    }

    #[test]
    fn energy_drift_is_second_order_in_dt() {
        let grid = GridSpec::new(0.25, 128).unwrap();
        let f = pulse(grid);
        let drift = |dt: f64| {
            let mut c = cfg("dnls", "strang", dt, 2.0);
            c.save_every = 10;
            conservation_report(&evolve(&f, &c).unwrap()).energy_drift
        };
        let ratio = drift(0.02) / drift(0.01);
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gauge_and_lattice_translation_equivariance() {
        let grid = GridSpec::new(0.25, 64).unwrap();
        let f = pulse(grid);
        let c = cfg("dnls", "strang", 0.01, 1.0);
        let base = evolve(&f, &c).unwrap().last().unwrap().clone();
        let phase = Complex64::from_polar(1.0, 0.9);
        let gauged = evolve(&f.scale(phase), &c).unwrap().last().unwrap().clone();
        assert!(gauged.sub(&base.scale(phase)).unwrap().max_abs() < 1e-12);
        let rotated = evolve(&f.rotate(1), &c).unwrap().last().unwrap().clone();
        assert!(rotated.sub(&base.rotate(1)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn parity_is_preserved() {
        let grid = GridSpec::new(0.25, 64).unwrap();
        let f = GridField::from_fn(grid, |x| Complex64::new(1.1, 0.4) / x.cosh() + 0.2 * (-x * x).exp());
        // the dealiased flow keeps the unpaired mode -n/2, which has no mirror image
        for flow in ["dnls", "dst:2"] {
            let out = evolve(&f, &cfg(flow, "strang", 0.01, 1.0)).unwrap();
            let u = to_spectral(out.last().unwrap());
            let odd = (1..32).map(|k| (u.mode_coeff(k) - u.mode_coeff(-k)).norm()).fold(0.0, f64::max);
            assert!(odd < 1e-10 * u.max_abs(), "{flow}: {odd}");
        }
    }

    #[test]
    fn dealiased_flow_transports_traveling_wave() {
        let p = WaveParams::new(1.2, 0.6).unwrap();
        let g = GridSpec::with_min_length(0.2, 80.0).unwrap();
        let sol = solve_wave(&p, g, &SolverOptions::default()).unwrap();
        let t = 1.0;
        let out = evolve(&to_grid(&sol.field), &cfg("dealiased", "rk4", 1e-3, t)).unwrap();
        let exact = to_grid(&shift(&sol.field, p.xi2() * t).scale(Complex64::from_polar(1.0, p.xi1() * t)));
        let err = out.last().unwrap().sub(&exact).unwrap().max_abs();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn momentum_drift_identity() {
        // d/dt ⟨i∂u, u⟩ = (2π/h) ∫ sin(2πx/h)|u|⁴ along the lattice flow
        let grid = GridSpec::new(0.5, 128).unwrap();
        // off-lattice centres so that |u|⁴ has no parity about a site
        let f = GridField::from_fn(grid, |x| {
            Complex64::from_polar(1.5 / (1.2 * (x - 0.17)).cosh(), 0.7 * x) + 0.6 / (0.9 * (x + 3.1)).cosh()
        });
        let dt = 1e-4;
        let step = |g: &GridField, s: f64| Rk4.step(&Dnls, g, s);
        let plus = step(&f, dt);
        let minus = step(&f, -dt);
        let fd = (momentum(&to_spectral(&plus)) - momentum(&to_spectral(&minus))) / (2.0 * dt);
        let rate = crate::functionals::momentum_drift_rate(&f);
        assert!(rate.abs() > 1e-6, "rate {rate}");
        assert!((fd - rate).abs() <= 1e-3 * rate.abs(), "{fd} vs {rate}");
        let _ = mass_grid(&f);
    }

    #[test]
    fn blow_up_is_reported_with_partial_trajectory() {
        let grid = GridSpec::new(0.5, 32).unwrap();
        let f = GridField::from_fn(grid, |x| Complex64::new(if x == 0.0 { 1e80 } else { 0.0 }, 0.0));
        let mut c = cfg("dealiased", "rk4", 0.1, 5.0);
        c.save_every = 1;
        match evolve(&f, &c) {
            Err(Error::NonFinite { partial, .. }) => assert!(!partial.is_empty()),
            other => panic!("expected NonFinite, got {:?}", other.map(|t| t.steps)),
        }
    }

    #[test]
    fn config_errors() {
        let grid = GridSpec::new(0.2, 32).unwrap();
        let f = pulse(grid);
        assert!(evolve(&f, &cfg("nope", "strang", 0.01, 1.0)).is_err());
        assert!(evolve(&f, &cfg("dnls", "euler", 0.01, 1.0)).is_err());
        assert!(evolve(&f, &cfg("dnls", "strang", -0.01, 1.0)).is_err());
        let narrow = GridField::from_fn(GridSpec::new(0.2, 8).unwrap(), |_| Complex64::new(1.0, 0.0));
        assert!(matches!(evolve(&narrow, &cfg("dst:4", "strang", 0.01, 0.1)), Err(Error::StencilTooWide { .. })));
        assert!((EvolutionConfig::default().resolved_dt(0.1) - 0.005).abs() < 1e-15);
        assert_eq!(EvolutionConfig::default().resolved_dt(0.4), 0.01);
    }

    #[test]
    fn save_points_and_final_step() {
        let grid = GridSpec::new(0.2, 32).unwrap();
        let f = pulse(grid);
        let mut c = cfg("dnls", "strang", 0.03, 1.0);
        c.save_every = 10;
        let traj = evolve(&f, &c).unwrap();
        assert_eq!(traj.steps, 34);
        assert_eq!(traj.times.len(), 5);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.frames[0], f);
        let _ = mass_grid(&f);
    }
}
