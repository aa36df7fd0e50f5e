//! Band-limited fields on the torus: transforms, sub-grid advection, alias folding
//! and dealiased polynomial nonlinearities.
//!
//! Convention ("forward-h"): for a lattice field `f` of step `h` and period `L`,
//!
//! ```text
//! û_k = h Σ_j f_j e^{-iω_k x_j},     f_j = (1/L) Σ_k û_k e^{iω_k x_j},     ω_k = 2πk/L,
//! ```
//!
//! so `û_k` approximates the continuous transform `∫ u e^{-iωx} dx` and
//! `h Σ|f_j|² = (1/L) Σ|û_k|²`. Modes run over `k ∈ [-n/2, n/2)` in FFT order.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::lattice::{laplacian_multiplier, GridField, GridSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    h: f64,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(h: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        GridSpec::new(h, coeffs.len())?;
        Ok(Self { h, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { h: grid.h, coeffs: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    /// Coefficients `g(ω_k)` for every mode of the grid.
    pub fn from_fn(grid: GridSpec, mut g: impl FnMut(f64) -> Complex64) -> Self {
        let length = grid.length();
        let coeffs = (0..grid.n).map(|i| g(2.0 * PI * fft::mode(i, grid.n) as f64 / length)).collect();
        Self { h: grid.h, coeffs }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_points(&self) -> usize {
        self.coeffs.len()
    }

    pub fn length(&self) -> f64 {
        self.h * self.coeffs.len() as f64
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { h: self.h, n: self.coeffs.len() }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Frequency of storage slot `i`.
    pub fn omega(&self, i: usize) -> f64 {
        2.0 * PI * fft::mode(i, self.coeffs.len()) as f64 / self.length()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.coeffs.len()).map(|i| self.omega(i)).collect()
    }

    /// Coefficient of mode `k`, zero outside the band.
    pub fn mode_coeff(&self, k: i64) -> Complex64 {
        let n = self.coeffs.len() as i64;
        if k < -n / 2 || k >= n / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[fft::slot(k, self.coeffs.len())]
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64, Complex64) -> Complex64) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| f(self.omega(i), *c)).collect();
        Self { h: self.h, coeffs }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { h: self.h, coeffs: self.coeffs.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { h: self.h, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { h: self.h, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() })
    }

    /// `a + s·b`
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { h: self.h, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b * s).collect() })
    }

    /// `∂_x u`: multiply mode ω by `iω`.
    pub fn derivative(&self) -> Self {
        self.map(|w, c| c * Complex64::new(0.0, w))
    }

    /// `i u`
    pub fn times_i(&self) -> Self {
        self.scale(Complex64::new(0.0, 1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part of the coefficients; zero in the symmetric class `ū(-x) = u(x)`.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Drop imaginary parts of the coefficients (projection on the symmetric class).
    pub fn real_part(&self) -> Self {
        Self { h: self.h, coeffs: self.coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `‖u‖²_{L²} = (1/L) Σ|û_k|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.length()
    }

    pub(crate) fn check_compatible(&self, other: &SpectralField) -> Result<()> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::SizeMismatch { expected: self.coeffs.len(), actual: other.coeffs.len() });
        }
        if (self.h - other.h).abs() > 1e-14 * self.h {
            return Err(Error::StepMismatch(self.h, other.h));
        }
        Ok(())
    }
}

/// Real inner product `⟨a, b⟩ = Re ∫ a b̄ = (1/L) Re Σ â_k conj(b̂_k)`.
pub fn inner(a: &SpectralField, b: &SpectralField) -> f64 {
    debug_assert_eq!(a.n_points(), b.n_points());
    a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x * y.conj()).re).sum::<f64>() / a.length()
}

pub fn to_spectral(f: &GridField) -> SpectralField {
    let mut buf = f.values().to_vec();
    fft::forward(&mut buf);
    let h = f.h();
    buf.iter_mut().for_each(|c| *c *= h);
    SpectralField { h, coeffs: buf }
}

pub fn to_grid(u: &SpectralField) -> GridField {
    let mut buf = u.coeffs.clone();
    fft::inverse(&mut buf);
    let inv_l = 1.0 / u.length();
    buf.iter_mut().for_each(|c| *c *= inv_l);
    GridField::new(u.h, buf).expect("spectral field carries a valid grid")
}

/// Values of the band-limited interpolant on the `m`-point refinement of the same period.
pub(crate) fn interpolant_values(u: &SpectralField, m: usize) -> Vec<Complex64> {
    let mut buf = fft::pad(&u.coeffs, m);
    fft::inverse(&mut buf);
    let inv_l = 1.0 / u.length();
    buf.iter_mut().for_each(|c| *c *= inv_l);
    buf
}

/// Forward transform of samples on the `m`-point refinement, in the module convention.
pub(crate) fn fine_transform(values: Vec<Complex64>, length: f64) -> Vec<Complex64> {
    let m = values.len();
    let mut buf = values;
    fft::forward(&mut buf);
    let hf = length / m as f64;
    buf.iter_mut().for_each(|c| *c *= hf);
    buf
}

/// Padded size for cubic products: power of two `≥ 3n`.
pub(crate) fn cubic_padding(n: usize) -> usize {
    fft::next_pow2_at_least(3 * n)
}

/// Exact advection of the band-limited interpolant: `u(· - x0)`.
pub fn shift(u: &SpectralField, x0: f64) -> SpectralField {
    u.map(|w, c| c * Complex64::from_polar(1.0, -w * x0))
}

/// Sum the coefficients of a field of step `h/m` over frequencies congruent modulo `2π/h`.
///
/// The result lives on the grid of step `h` with the same period. Only divisibility of the
/// point counts is required.
pub fn fold_aliases(fine: &SpectralField, m: usize) -> Result<SpectralField> {
    let nf = fine.n_points();
    if m < 1 || nf % m != 0 || nf / m < 8 {
        return Err(Error::ResolutionMismatch { fine: nf, coarse: if m == 0 { 0 } else { nf / m } });
    }
    let n = nf / m;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in fine.coeffs.iter().enumerate() {
        coeffs[fft::slot(fft::mode(i, nf), n)] += c;
    }
    Ok(SpectralField { h: fine.h * m as f64, coeffs })
}

/// `P(|u|²u)`: the cubic of the interpolant, computed alias-free and truncated to the band.
pub fn dealiased_cubic(u: &SpectralField) -> SpectralField {
    let n = u.n_points();
    let m = cubic_padding(n);
    let mut vals = interpolant_values(u, m);
    vals.iter_mut().for_each(|v| *v *= v.norm_sqr());
    let full = fine_transform(vals, u.length());
    SpectralField { h: u.h, coeffs: fft::truncate(&full, n) }
}

/// Pointwise lattice cubic `|f_g|² f_g`.
pub fn grid_cubic(f: &GridField) -> GridField {
    let values = f.values().iter().map(|v| v * v.norm_sqr()).collect();
    GridField::new(f.h(), values).expect("same grid")
}

/// `E₃ = ∫ e^{2iπx/h} |u|⁴ dx` for the interpolant `u` of `f`, exact up to roundoff.
pub fn exp_mode_coefficient(f: &GridField) -> Complex64 {
    exp_mode_coefficient_spectral(&to_spectral(f))
}

pub fn exp_mode_coefficient_spectral(u: &SpectralField) -> Complex64 {
    let n = u.n_points();
    // |u|⁴ has modes up to ±2n; with 8n points the target mode -n is alias-free.
    let m = fft::next_pow2_at_least(5 * n);
    let vals = interpolant_values(u, m);
    let mut quartic: Vec<Complex64> = vals.iter().map(|v| Complex64::new(v.norm_sqr() * v.norm_sqr(), 0.0)).collect();
    fft::forward(&mut quartic);
    // ∫ e^{+iωx}q = q̂(-ω) with ω = 2π/h, i.e. mode k = -n.
    quartic[fft::slot(-(n as i64), m)] * (u.length() / m as f64)
}

/// L² norm of the part of `u` with `|ω| ≥ cutoff`.
pub fn highfreq_mass(u: &SpectralField, cutoff: f64) -> f64 {
    let tol = 1e-12 * cutoff;
    let sum: f64 = u
        .coeffs
        .iter()
        .enumerate()
        .filter(|(i, _)| u.omega(*i).abs() >= cutoff - tol)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    (sum / u.length()).sqrt()
}

/// Upper bound for `|E₃(u)|` from the high-frequency content of `u`.
///
/// Any four band modes summing to `-n` include at least two with `|ω| ≥ π/(3h)`, so
/// `|E₃| ≤ 6 ‖u_high‖²_{L²} (Σ_k|û_k|)² / L²`.
pub fn alias_bound(u: &SpectralField) -> f64 {
    let high = highfreq_mass(u, PI / (3.0 * u.h));
    let l1: f64 = u.coeffs.iter().map(|c| c.norm()).sum();
    let length = u.length();
    6.0 * high * high * l1 * l1 / (length * length)
}

/// Continuous `H^n(ℝ)` norm of the interpolant: weight `1 + ω² + … + ω^{2n}`.
pub fn continuous_sobolev_norm(u: &SpectralField, n: u32) -> f64 {
    weighted_norm(u, |w| (0..=n).map(|j| w.powi(2 * j as i32)).sum())
}

/// Continuous homogeneous `Ḣ^n(ℝ)` norm: weight `ω^{2n}`.
pub fn continuous_homogeneous_norm(u: &SpectralField, n: u32) -> f64 {
    weighted_norm(u, |w| w.powi(2 * n as i32))
}

/// Discrete `H¹(hZ)` norm computed from coefficients: weight `1 + (4/h²)sin²(ωh/2)`.
pub fn discrete_h1_norm(u: &SpectralField) -> f64 {
    let h = u.h;
    weighted_norm(u, |w| 1.0 + laplacian_multiplier(w, h))
}

pub(crate) fn weighted_norm(u: &SpectralField, weight: impl Fn(f64) -> f64) -> f64 {
    let sum: f64 = u.coeffs.iter().enumerate().map(|(i, c)| weight(u.omega(i)) * c.norm_sqr()).sum();
    (sum / u.length()).sqrt()
}
