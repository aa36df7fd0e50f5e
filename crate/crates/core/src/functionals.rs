//! Energies and variational calculus for the lattice and dealiased problems.
//!
//! Inner products are the real `L²` pairing `⟨a, b⟩ = Re ∫ a b̄` (see [`spectral::inner`]).
//! Gradients are Riesz representatives in the band-limited space for that pairing.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{Dispersion, Laplacian};
use crate::lattice::{norm, GridField, NormKind};
use crate::spectral::{self, cubic_padding, exp_mode_coefficient_spectral, fine_transform, interpolant_values, to_spectral, SpectralField};
use crate::waves::WaveParams;
use crate::fft;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub mass: f64,
    pub hamiltonian_grid: f64,
    pub hamiltonian_dealiased: f64,
    pub momentum: f64,
    pub e1: f64,
    pub e3: Complex64,
    /// `(n, ‖u‖_{Ḣⁿ(hZ)})`
    pub sobolev: Vec<(u32, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AliasingEnergies {
    /// `½ ∫ cos(2πx/h) |u|⁴`
    pub e1: f64,
    /// `∫ e^{2iπx/h} |u|⁴`
    pub e3: Complex64,
}

/// `h Σ|f_g|²`
pub fn mass_grid(f: &GridField) -> f64 {
    f.h() * f.values().iter().map(|v| v.norm_sqr()).sum::<f64>()
}

pub fn mass(u: &SpectralField) -> f64 {
    u.l2_norm_sq()
}

/// `(h/2) Σ|(f_{g+h} - f_g)/h|² - (h/4) Σ|f_g|⁴`
pub fn hamiltonian_grid(f: &GridField) -> f64 {
    let n = f.n_points();
    let h = f.h();
    let v = f.values();
    let kinetic: f64 = (0..n).map(|j| (v[(j + 1) % n] - v[j]).norm_sqr()).sum::<f64>() / (2.0 * h);
    let quartic: f64 = v.iter().map(|x| x.norm_sqr() * x.norm_sqr()).sum::<f64>() * h / 4.0;
    kinetic - quartic
}

/// `(1/2L) Σ s(ω_k)|û_k|²`
pub fn kinetic_energy(d: &dyn Dispersion, u: &SpectralField) -> f64 {
    let h = u.h();
    u.coeffs().iter().enumerate().map(|(i, c)| d.multiplier(u.omega(i), h) * c.norm_sqr()).sum::<f64>() / (2.0 * u.length())
}

/// `∫|u|⁴` over one period, exact for the band-limited interpolant.
pub fn quartic_integral(u: &SpectralField) -> f64 {
    let m = cubic_padding(u.n_points());
    let vals = interpolant_values(u, m);
    vals.iter().map(|v| v.norm_sqr() * v.norm_sqr()).sum::<f64>() * u.length() / m as f64
}

pub fn hamiltonian_dealiased(u: &SpectralField) -> f64 {
    hamiltonian_dealiased_with(&Laplacian, u)
}

pub fn hamiltonian_dealiased_with(d: &dyn Dispersion, u: &SpectralField) -> f64 {
    kinetic_energy(d, u) - 0.25 * quartic_integral(u)
}

/// `⟨i∂_x u, u⟩ = -(1/L) Σ ω_k |û_k|²`; a plane wave `e^{iωx}` carries `-ω` times its mass.
pub fn momentum(u: &SpectralField) -> f64 {
    -u.coeffs().iter().enumerate().map(|(i, c)| u.omega(i) * c.norm_sqr()).sum::<f64>() / u.length()
}

pub fn lagrangian(p: &WaveParams, u: &SpectralField) -> f64 {
    lagrangian_with(&Laplacian, p, u)
}

/// `H(u) + (ξ₁/2)‖u‖² + (ξ₂/2)⟨i∂_x u, u⟩`
pub fn lagrangian_with(d: &dyn Dispersion, p: &WaveParams, u: &SpectralField) -> f64 {
    hamiltonian_dealiased_with(d, u) + 0.5 * p.xi1() * mass(u) + 0.5 * p.xi2() * momentum(u)
}

/// Linear part of the gradient: `s(ω) + ξ₁ - ξ₂ ω`.
pub fn linear_multiplier(d: &dyn Dispersion, p: &WaveParams, omega: f64, h: f64) -> f64 {
    d.multiplier(omega, h) + p.xi1() - p.xi2() * omega
}

pub fn lagrangian_gradient(p: &WaveParams, u: &SpectralField) -> SpectralField {
    lagrangian_gradient_with(&Laplacian, p, u)
}

/// `[s(ω) + ξ₁ - ξ₂ω] û - P(|u|²u)^`
pub fn lagrangian_gradient_with(d: &dyn Dispersion, p: &WaveParams, u: &SpectralField) -> SpectralField {
    let cubic = spectral::dealiased_cubic(u);
    let h = u.h();
    let mut out = u.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        let w = 2.0 * PI * fft::mode(i, u.n_points()) as f64 / u.length();
        *c = *c * linear_multiplier(d, p, w, h) - cubic.coeffs()[i];
    }
    out
}

pub fn hessian_apply(p: &WaveParams, u: &SpectralField, v: &SpectralField) -> SpectralField {
    hessian_apply_with(&Laplacian, p, u, v)
}

/// `[s(ω) + ξ₁ - ξ₂ω] v̂ - P(2|u|²v + u²v̄)^`
pub fn hessian_apply_with(d: &dyn Dispersion, p: &WaveParams, u: &SpectralField, v: &SpectralField) -> SpectralField {
    let n = u.n_points();
    let m = cubic_padding(n);
    let uu = interpolant_values(u, m);
    let vv = interpolant_values(v, m);
    let prod: Vec<Complex64> = uu.iter().zip(&vv).map(|(a, b)| 2.0 * a.norm_sqr() * b + a * a * b.conj()).collect();
    let lin = fft::truncate(&fine_transform(prod, u.length()), n);
    let h = u.h();
    let mut out = v.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        let w = 2.0 * PI * fft::mode(i, n) as f64 / u.length();
        *c = *c * linear_multiplier(d, p, w, h) - lin[i];
    }
    out
}

pub fn aliasing_energies(f: &GridField) -> AliasingEnergies {
    aliasing_energies_spectral(&to_spectral(f))
}

pub fn aliasing_energies_spectral(u: &SpectralField) -> AliasingEnergies {
    let e3 = exp_mode_coefficient_spectral(u);
    AliasingEnergies { e1: 0.5 * e3.re, e3 }
}

/// `(2π/h) ∫ sin(2πx/h)|u|⁴`: the rate of change of the momentum under the lattice flow.
pub fn momentum_drift_rate(f: &GridField) -> f64 {
    2.0 * PI / f.h() * aliasing_energies(f).e3.im
}

pub fn energy_report(f: &GridField, sobolev_orders: &[u32]) -> EnergyReport {
    let u = to_spectral(f);
    let alias = aliasing_energies_spectral(&u);
    EnergyReport {
        mass: mass_grid(f),
        hamiltonian_grid: hamiltonian_grid(f),
        hamiltonian_dealiased: hamiltonian_dealiased(&u),
        momentum: momentum(&u),
        e1: alias.e1,
        e3: alias.e3,
        sobolev: sobolev_orders.iter().map(|&n| (n, norm(f, NormKind::HomogeneousSobolev(n)))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{registry, Stencil};
    use crate::lattice::GridSpec;
    use crate::spectral::{inner, shift, to_grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth random field with spectrum decaying like `e^{-|ω|/2}` and unit-ish amplitude.
    fn smooth_field(rng: &mut impl Rng, grid: GridSpec) -> SpectralField {
        let l = grid.length();
        SpectralField::from_fn(grid, |w| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * (-0.5 * w.abs()).exp() * l.sqrt()
        })
    }

    fn params(rng: &mut impl Rng) -> WaveParams {
        let xi2 = rng.random_range(-1.0..1.0);
        WaveParams::new(0.25 * xi2 * xi2 + rng.random_range(0.2..2.0), xi2).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn basic_values() {
        let grid = GridSpec::new(0.25, 32).unwrap();
        let z = GridField::zeros(grid);
        assert_eq!(hamiltonian_grid(&z), 0.0);
        assert_eq!(hamiltonian_dealiased(&SpectralField::zeros(grid)), 0.0);
        let c = Complex64::new(0.6, 0.8);
        let f = GridField::from_fn(grid, |_| c * 1.5);
        assert!(rel(hamiltonian_grid(&f), -grid.length() / 4.0 * 1.5f64.powi(4)) < 1e-14);
        let p = WaveParams::new(1.0, 0.5).unwrap();
        assert_eq!(lagrangian(&p, &SpectralField::zeros(grid)), 0.0);
        assert_eq!(lagrangian_gradient(&p, &SpectralField::zeros(grid)).max_abs(), 0.0);
    }

    #[test]
    fn plane_wave_energies() {
        let grid = GridSpec::new(0.25, 64).unwrap();
        let l = grid.length();
        let c = Complex64::new(0.3, -0.7);
        let k = 5;
        let mut u = SpectralField::zeros(grid);
        u.coeffs_mut()[k] = c * l;
        let w = u.omega(k);
        let s = crate::lattice::laplacian_multiplier(w, grid.h);
        assert!(rel(kinetic_energy(&Laplacian, &u), 0.5 * l * c.norm_sqr() * s) < 1e-13);
        assert!(rel(quartic_integral(&u), l * c.norm_sqr().powi(2)) < 1e-13);
        assert!(rel(momentum(&u), -w * mass(&u)) < 1e-13);
        // momentum of e^{iωx} equals ⟨i∂u, u⟩ with ∂ taken spectrally
        assert!(rel(inner(&u.derivative().times_i(), &u), momentum(&u)) < 1e-13);
    }

    #[test]
    fn real_field_has_no_momentum() {
        let grid = GridSpec::new(0.2, 64).unwrap();
        let f = GridField::from_fn(grid, |x| Complex64::new((-x * x).exp() * (1.0 + 0.3 * x), 0.0));
        let u = to_spectral(&f);
        assert!(momentum(&u).abs() < 1e-14);
        let p = WaveParams::new(1.3, 0.4).unwrap();
        let expect = hamiltonian_dealiased(&u) + 0.5 * 1.3 * mass(&u);
        assert!(rel(lagrangian(&p, &u), expect) < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [32, 64, 128] {
            for _ in 0..20 {
                let grid = GridSpec::new(0.25, n).unwrap();
                let p = params(&mut rng);
                let u = smooth_field(&mut rng, grid).scale(Complex64::new(0.2, 0.0));
                let v = smooth_field(&mut rng, grid);
                let eps = 1e-5;
                let fd = (lagrangian(&p, &u.axpy(eps, &v).unwrap()) - lagrangian(&p, &u.axpy(-eps, &v).unwrap())) / (2.0 * eps);
                let g = inner(&lagrangian_gradient(&p, &u), &v);
                assert!(rel(g, fd) < 1e-7, "n={n}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn gradient_with_stencil_dispersion() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let d = Stencil::dst(2).unwrap();
        let grid = GridSpec::new(0.3, 64).unwrap();
        let p = params(&mut rng);
        let u = smooth_field(&mut rng, grid).scale(Complex64::new(0.2, 0.0));
        let v = smooth_field(&mut rng, grid);
        let eps = 1e-5;
        let fd = (lagrangian_with(&d, &p, &u.axpy(eps, &v).unwrap()) - lagrangian_with(&d, &p, &u.axpy(-eps, &v).unwrap())) / (2.0 * eps);
        assert!(rel(inner(&lagrangian_gradient_with(&d, &p, &u), &v), fd) < 1e-7);
    }

    #[test]
    fn hessian_matches_gradient_differences_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [32, 64] {
            let grid = GridSpec::new(0.25, n).unwrap();
            for _ in 0..5 {
                let p = params(&mut rng);
                let u = smooth_field(&mut rng, grid).scale(Complex64::new(0.2, 0.0));
                let v = smooth_field(&mut rng, grid);
                let w = smooth_field(&mut rng, grid);
                let eps = 1e-5;
                let fd = lagrangian_gradient(&p, &u.axpy(eps, &v).unwrap())
                    .sub(&lagrangian_gradient(&p, &u.axpy(-eps, &v).unwrap()))
                    .unwrap()
                    .scale(Complex64::new(0.5 / eps, 0.0));
                let hv = hessian_apply(&p, &u, &v);
                assert!(hv.sub(&fd).unwrap().max_abs() <= 1e-6 * hv.max_abs());
                let hw = hessian_apply(&p, &u, &w);
                let (a, b) = (inner(&hv, &w), inner(&hw, &v));
                assert!((a - b).abs() <= 1e-11 * a.abs().max(b.abs()), "{a} {b}");
            }
        }
    }

    #[test]
    fn hessian_at_zero_is_the_multiplier() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let grid = GridSpec::new(0.2, 32).unwrap();
        let p = WaveParams::new(1.0, 0.3).unwrap();
        let v = smooth_field(&mut rng, grid);
        let hv = hessian_apply(&p, &SpectralField::zeros(grid), &v);
        for i in 0..32 {
            let m = linear_multiplier(&Laplacian, &p, v.omega(i), grid.h);
            assert!((hv.coeffs()[i] - v.coeffs()[i] * m).norm() < 1e-12 * v.max_abs());
        }
    }

    #[test]
    fn shift_and_gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let grid = GridSpec::new(0.2, 64).unwrap();
        let u = smooth_field(&mut rng, grid);
        let moved = shift(&u, 0.731).scale(Complex64::from_polar(1.0, 2.1));
        assert!(rel(mass(&moved), mass(&u)) < 1e-13);
        assert!(rel(momentum(&moved), momentum(&u)) < 1e-13);
        assert!(rel(hamiltonian_dealiased(&moved), hamiltonian_dealiased(&u)) < 1e-12);
    }

    #[test]
    fn alias_energies_of_low_spectrum_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let grid = GridSpec::new(0.25, 64).unwrap();
        let u = smooth_field(&mut rng, grid).map(|w, c| if w.abs() < PI / 0.5 { c } else { Complex64::default() });
        let a = aliasing_energies(&to_grid(&u));
        assert!(a.e3.norm() < 1e-12 * quartic_integral(&u));
        assert_eq!(a.e1, 0.5 * a.e3.re);
    }

    #[test]
    fn alias_bound_holds_for_rough_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..20 {
            let grid = GridSpec::new(0.3, 64).unwrap();
            let u = SpectralField::from_fn(grid, |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let e3 = aliasing_energies_spectral(&u).e3.norm();
            assert!(e3 <= spectral::alias_bound(&u), "{e3} > {}", spectral::alias_bound(&u));
        }
    }

    #[test]
    fn energy_report_fields() {
        let grid = GridSpec::new(0.2, 64).unwrap();
        let f = GridField::from_fn(grid, |x| Complex64::from_polar(1.0 / (x).cosh(), 0.3 * x));
        let r = energy_report(&f, &[1, 2]);
        assert!(r.mass > 0.0);
        assert_eq!(r.sobolev.len(), 2);
        assert!(rel(r.hamiltonian_grid, r.hamiltonian_dealiased - r.e1) < 1e-10);
        let json = serde_json::to_string(&r).unwrap();
        let back: EnergyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn dispersion_registry_drives_lagrangian() {
        let grid = GridSpec::new(0.2, 64).unwrap();
        let p = WaveParams::new(1.0, 0.0).unwrap();
        let f = to_spectral(&GridField::from_fn(grid, |x| Complex64::new(1.0 / x.cosh(), 0.0)));
        let a = lagrangian_with(registry().create("laplacian").unwrap().as_ref(), &p, &f);
        let b = lagrangian_with(registry().create("dst:1").unwrap().as_ref(), &p, &f);
        assert!(rel(a, b) < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn grid_hamiltonian_is_dealiased_minus_e1(seed in any::<u64>(), logn in 3usize..8, h in 0.1f64..1.0, amp in 0.1f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = GridSpec::new(h, 1 << logn).unwrap();
            let f = GridField::new(h, (0..grid.n).map(|_| Complex64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp))).collect()).unwrap();
            let u = to_spectral(&f);
            let lhs = hamiltonian_grid(&f);
            let rhs = hamiltonian_dealiased(&u) - aliasing_energies(&f).e1;
            let scale = kinetic_energy(&Laplacian, &u) + quartic_integral(&u);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }

        #[test]
        fn e1_is_real_part_of_e3_over_two(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let _grid = GridSpec::new(0.3, 32).unwrap();
            let f = GridField::new(0.3, (0..32).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap();
            let a = aliasing_energies(&f);
            prop_assert_eq!(a.e1, 0.5 * a.e3.re);
            // hΣ|f|⁴ = ∫|u|⁴ + 2 Re E3
            let lattice: f64 = f.values().iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() * 0.3;
            let u = to_spectral(&f);
            prop_assert!((lattice - quartic_integral(&u) - 2.0 * a.e3.re).abs() <= 1e-10 * lattice);
        }
    }
}
