//! Second-derivative operators on the lattice, as pluggable strategies.
//!
//! Each operator is diagonal in Fourier space with a nonnegative multiplier `s(ω)`:
//! it acts as `-s(ω)` on `e^{iωx}`, so `s(ω) = ω²` is the continuum limit.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{apply_stencil, discrete_laplacian, dst_coefficients, laplacian_multiplier, stencil_symbol_analysis, GridField, StencilSpec};
use crate::registry::{no_args, parse_order, Registry};
use crate::spectral::{to_grid, to_spectral};

pub trait Dispersion: Send + Sync {
    /// Registry spec that recreates this operator.
    fn name(&self) -> String;

    /// `s(ω) ≥ 0` such that the operator maps `e^{iωx}` to `-s(ω) e^{iωx}`.
    fn multiplier(&self, omega: f64, h: f64) -> f64;

    /// Apply the operator on the lattice. The default goes through Fourier space.
    fn apply(&self, f: &GridField) -> Result<GridField> {
        let mut u = to_spectral(f);
        let h = f.h();
        let omegas = u.omegas();
        for (c, w) in u.coeffs_mut().iter_mut().zip(omegas) {
            *c *= -self.multiplier(w, h);
        }
        Ok(to_grid(&u))
    }

    /// Stencil behind this operator, if it is a finite-difference one.
    fn stencil(&self) -> Option<&StencilSpec> {
        None
    }
}

/// Three-point Laplacian `Δ_h`, `s(ω) = (4/h²) sin²(ωh/2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Laplacian;

impl Dispersion for Laplacian {
    fn name(&self) -> String {
        "laplacian".into()
    }

    fn multiplier(&self, omega: f64, h: f64) -> f64 {
        laplacian_multiplier(omega, h)
    }

    fn apply(&self, f: &GridField) -> Result<GridField> {
        Ok(discrete_laplacian(f))
    }
}

/// A symmetric stencil `(1/h²) Σ a_k f_{g-kh}`.
#[derive(Clone, Debug)]
pub struct Stencil {
    spec: StencilSpec,
    label: String,
}

impl Stencil {
    /// Wrap a stencil; it must be stable (positive stability constant).
    pub fn new(spec: StencilSpec, label: impl Into<String>) -> Result<Self> {
        let analysis = stencil_symbol_analysis(&spec);
        if !analysis.stable {
            return Err(Error::UnstableStencil { alpha: analysis.stability_alpha });
        }
        Ok(Self { spec, label: label.into() })
    }

    /// The order-`2n` centred stencil.
    pub fn dst(order: usize) -> Result<Self> {
        Self::new(dst_coefficients(order)?, format!("dst:{order}"))
    }
}

impl Dispersion for Stencil {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn multiplier(&self, omega: f64, h: f64) -> f64 {
        -self.spec.symbol(omega * h) / (h * h)
    }

    fn apply(&self, f: &GridField) -> Result<GridField> {
        apply_stencil(f, &self.spec)
    }

    fn stencil(&self) -> Option<&StencilSpec> {
        Some(&self.spec)
    }
}

/// Exact `∂²_x` on the band, `s(ω) = ω²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpectralExact;

impl Dispersion for SpectralExact {
    fn name(&self) -> String {
        "spectral".into()
    }

    fn multiplier(&self, omega: f64, _h: f64) -> f64 {
        omega * omega
    }
}

/// Built-in operators: `laplacian`, `dst:<n>`, `spectral`.
pub fn registry() -> Registry<dyn Dispersion> {
    let mut r: Registry<dyn Dispersion> = Registry::new("dispersion");
    r.register("laplacian", |a| {
        no_args("laplacian", a)?;
        Ok(Box::new(Laplacian))
    });
    r.register("dst", |a| Ok(Box::new(Stencil::dst(parse_order("dst", a)?)?)));
    r.register("spectral", |a| {
        no_args("spectral", a)?;
        Ok(Box::new(SpectralExact))
    });
    r
}

/// Apply `e^{-i s(ω) t}` to a lattice field.
pub(crate) fn propagate(d: &dyn Dispersion, f: &GridField, t: f64) -> GridField {
    let mut u = to_spectral(f);
    let h = f.h();
    let omegas = u.omegas();
    for (c, w) in u.coeffs_mut().iter_mut().zip(omegas) {
        *c *= Complex64::from_polar(1.0, -d.multiplier(w, h) * t);
    }
    to_grid(&u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GridSpec;
    use rand::{Rng, SeedableRng};

    fn random_field(seed: u64) -> GridField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(0.3, 64).unwrap();
        GridField::new(grid.h, (0..grid.n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap()
    }

    #[test]
    fn direct_and_spectral_application_agree() {
        let f = random_field(1);
        let r = registry();
        for name in ["laplacian", "dst:1", "dst:2", "dst:3"] {
            let d = r.create(name).unwrap();
            let direct = d.apply(&f).unwrap();
            let mut u = to_spectral(&f);
            let omegas = u.omegas();
            for (c, w) in u.coeffs_mut().iter_mut().zip(omegas) {
                *c *= -d.multiplier(w, f.h());
            }
            let spectral = to_grid(&u);
            let err = direct.sub(&spectral).unwrap().max_abs() / direct.max_abs();
            assert!(err < 1e-12, "{name}: {err}");
            assert_eq!(d.name(), name);
        }
    }

    #[test]
    fn multipliers_approach_omega_squared() {
        let r = registry();
        let (w, h) = (1.0, 0.05);
        for name in ["laplacian", "dst:2", "dst:4", "spectral"] {
            let d = r.create(name).unwrap();
            assert!((d.multiplier(w, h) - 1.0).abs() < 1e-3, "{name}");
            assert!(d.multiplier(0.0, h).abs() < 1e-15);
        }
    }

    #[test]
    fn registry_errors() {
        let r = registry();
        assert!(r.create("dst").is_err());
        assert!(r.create("laplacian:2").is_err());
        assert!(matches!(r.create("wave"), Err(Error::UnknownStrategy { .. })));
        let anti = StencilSpec::new(vec![2.0, -1.0]).unwrap();
        assert!(matches!(Stencil::new(anti, "anti"), Err(Error::UnstableStencil { .. })));
    }

    #[test]
    fn propagation_is_unitary() {
        let f = random_field(2);
        let g = propagate(&Laplacian, &f, 0.37);
        let l2 = |f: &GridField| f.values().iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert!((l2(&g) - l2(&f)).abs() < 1e-12 * l2(&f));
        let back = propagate(&Laplacian, &g, -0.37);
        assert!(back.sub(&f).unwrap().max_abs() < 1e-13);
    }
}
