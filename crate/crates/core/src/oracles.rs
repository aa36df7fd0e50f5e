//! Seeded reference checks of the numerical identities the library relies on.
//!
//! Each check draws its own random input from a seed and returns the measured error,
//! so test harnesses can drive it with any seed source and compare against a tolerance.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dispersion::Laplacian;
use crate::dynamics::{conservation_report, evolve, EvolutionConfig};
use crate::fft;
use crate::functionals::{aliasing_energies, hamiltonian_dealiased, hamiltonian_grid, hessian_apply, kinetic_energy, lagrangian, lagrangian_gradient, quartic_integral};
use crate::lattice::{norm, GridField, GridSpec, NormKind};
use crate::modulation::{locate, project_orbit, transform, ModulationState};
use crate::spectral::{dealiased_cubic, fold_aliases, inner, to_grid, to_spectral, SpectralField};
use crate::waves::WaveParams;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random spectrum decaying like `e^{-decay|ω|}`, scaled so grid values are `O(1)`.
fn smooth_field(rng: &mut impl Rng, grid: GridSpec, decay: f64) -> SpectralField {
    let l = grid.length();
    SpectralField::from_fn(grid, |w| unit(rng) * (-decay * w.abs()).exp() * l.sqrt())
}

fn random_grid_field(rng: &mut impl Rng, grid: GridSpec, amp: f64) -> GridField {
    GridField::new(grid.h, (0..grid.n).map(|_| unit(rng) * amp).collect()).expect("valid step")
}

fn random_params(rng: &mut impl Rng) -> WaveParams {
    let xi2 = rng.random_range(-1.0..1.0);
    WaveParams::new(0.25 * xi2 * xi2 + rng.random_range(0.2..2.0), xi2).expect("ξ₁ above the bound")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Relative gap between `⟨∇L, v⟩` and a centered difference of `L` along `v`.
pub fn gradient_fd_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = [32, 64, 128][rng.random_range(0..3)];
    let grid = GridSpec::new(rng.random_range(0.15..0.4), n).expect("valid grid");
    let p = random_params(&mut rng);
    let u = smooth_field(&mut rng, grid, 0.5).scale(Complex64::new(0.2, 0.0));
    let v = smooth_field(&mut rng, grid, 0.5);
    let eps = 1e-5;
    let plus = lagrangian(&p, &u.axpy(eps, &v).expect("same grid"));
    let minus = lagrangian(&p, &u.axpy(-eps, &v).expect("same grid"));
    rel(inner(&lagrangian_gradient(&p, &u), &v), (plus - minus) / (2.0 * eps))
}

/// `|⟨Hv, w⟩ - ⟨Hw, v⟩|` relative to the larger of the two.
pub fn hessian_asymmetry(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = [32, 64, 128][rng.random_range(0..3)];
    let grid = GridSpec::new(rng.random_range(0.15..0.4), n).expect("valid grid");
    let p = random_params(&mut rng);
    let u = smooth_field(&mut rng, grid, 0.5).scale(Complex64::new(0.2, 0.0));
    let v = smooth_field(&mut rng, grid, 0.5);
    let w = smooth_field(&mut rng, grid, 0.5);
    let a = inner(&hessian_apply(&p, &u, &v), &w);
    let b = inner(&hessian_apply(&p, &u, &w), &v);
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Relative gap between `h Σ|f|²` and `(1/L) Σ|f̂|²`, and of the round trip, whichever is larger.
pub fn parseval_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = 1usize << rng.random_range(3..10);
    let grid = GridSpec::new(rng.random_range(0.05..1.0), n).expect("valid grid");
    let f = random_grid_field(&mut rng, grid, 1.0);
    let u = to_spectral(&f);
    let l2 = norm(&f, NormKind::L2).powi(2);
    let back = to_grid(&u).sub(&f).expect("same grid").max_abs() / f.max_abs();
    rel(u.l2_norm_sq(), l2).max(back)
}

/// Gap in `H_grid = H_dealiased - E1`, relative to kinetic plus quartic energy.
pub fn aliasing_identity_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = 1usize << rng.random_range(3..9);
    let grid = GridSpec::new(rng.random_range(0.1..1.0), n).expect("valid grid");
    let amp = rng.random_range(0.1..2.0);
    let f = random_grid_field(&mut rng, grid, amp);
    let u = to_spectral(&f);
    let lhs = hamiltonian_grid(&f);
    let rhs = hamiltonian_dealiased(&u) - aliasing_energies(&f).e1;
    (lhs - rhs).abs() / (kinetic_energy(&Laplacian, &u) + quartic_integral(&u))
}

/// Sampling a band-limited fine field on every `m`-th site against folding its spectrum.
pub fn fold_sample_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let m = [2, 4, 8][rng.random_range(0..3)];
    let n = 1usize << rng.random_range(4..8);
    let h = rng.random_range(0.1..0.8);
    let decay = rng.random_range(0.0..0.3);
    let fine = smooth_field(&mut rng, GridSpec::new(h / m as f64, n * m).expect("valid grid"), decay);
    let values = to_grid(&fine);
    let coarse: Vec<Complex64> = (0..n).map(|j| values.values()[m * j]).collect();
    let sampled = to_spectral(&GridField::new(h, coarse).expect("valid step"));
    let folded = fold_aliases(&fine, m).expect("divisible");
    sampled.sub(&folded).expect("same grid").max_abs() / folded.max_abs()
}

/// Largest phase or position error when projecting `T_{γ,x0}η` back onto the orbit of `η`.
pub fn projection_round_trip_error(eta: &SpectralField, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let half = 0.25 * eta.length();
    let s = ModulationState::new(rng.random_range(-PI..PI), rng.random_range(-half..half));
    let u = transform(eta, s);
    match project_orbit(&u, eta, locate(&u, eta)) {
        Ok(got) => {
            let dg = (got.gamma - s.gamma + PI).rem_euclid(2.0 * PI) - PI;
            dg.abs().max((got.x0 - s.x0).abs())
        }
        Err(_) => f64::INFINITY,
    }
}

/// The cubic `|u|²u` by direct triple sum over band modes, for checking [`dealiased_cubic`].
pub fn brute_force_cubic(u: &SpectralField) -> SpectralField {
    let n = u.n_points() as i64;
    let l = u.length();
    let mut out = SpectralField::zeros(u.grid());
    for k in -n / 2..n / 2 {
        let mut acc = Complex64::default();
        for a in -n / 2..n / 2 {
            for b in -n / 2..n / 2 {
                // modes a - b + c = k
                let c = k - a + b;
                if c < -n / 2 || c >= n / 2 {
                    continue;
                }
                acc += u.mode_coeff(a) * u.mode_coeff(b).conj() * u.mode_coeff(c);
            }
        }
        out.coeffs_mut()[fft::slot(k, n as usize)] = acc / (l * l);
    }
    out
}

/// [`dealiased_cubic`] against [`brute_force_cubic`] on `n` points, relative to the largest coefficient.
pub fn convolution_error(seed: u64, n: usize) -> f64 {
    let mut rng = rng(seed);
    let grid = GridSpec::new(rng.random_range(0.1..1.0), n).expect("valid grid");
    let decay = rng.random_range(0.0..0.3);
    let u = smooth_field(&mut rng, grid, decay);
    let slow = brute_force_cubic(&u);
    dealiased_cubic(&u).sub(&slow).expect("same grid").max_abs() / slow.max_abs()
}

/// Largest relative mass drift of a random moving pulse over `steps` Strang steps of the lattice flow.
pub fn strang_mass_drift(seed: u64, steps: usize) -> f64 {
    let mut rng = rng(seed);
    let grid = GridSpec::new(0.25, 128).expect("valid grid");
    let (a, w, k) = (rng.random_range(0.5..1.5), rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0));
    let x0 = rng.random_range(-5.0..5.0);
    let f = GridField::from_fn(grid, |x| Complex64::from_polar(a / (w * (x - x0)).cosh(), k * x));
    let dt = 0.005;
    let cfg = EvolutionConfig {
        dt: Some(dt),
        t_final: dt * steps as f64,
        flow: "dnls".into(),
        scheme: "strang".into(),
        save_every: (steps / 10).max(1),
        sobolev_orders: vec![],
    };
    match evolve(&f, &cfg) {
        Ok(traj) => conservation_report(&traj).mass_drift,
        Err(_) => f64::INFINITY,
    }
}
