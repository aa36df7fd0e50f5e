//! Closed-form solitons of the continuous cubic NLS and their band-limited projections.
//!
//! `ψ_ξ(x) = e^{ixξ₂/2} √2 m / cosh(m x)` with `m = √(ξ₁ - (ξ₂/2)²)`; under the spectral
//! convention of [`crate::spectral`] its transform is `√2 π sech(π(ω - ξ₂/2)/(2m))`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::lattice::GridSpec;
use crate::spectral::SpectralField;

/// Smallest `m·L` accepted for a period-`L` torus standing in for the line.
pub const MIN_ML: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    xi1: f64,
    xi2: f64,
}

impl WaveParams {
    pub fn new(xi1: f64, xi2: f64) -> Result<Self> {
        let bound = 0.25 * xi2 * xi2;
        if !(xi1.is_finite() && xi2.is_finite()) || xi1 <= bound {
            return Err(Error::InvalidParams { xi1, bound });
        }
        Ok(Self { xi1, xi2 })
    }

    pub fn xi1(&self) -> f64 {
        self.xi1
    }

    pub fn xi2(&self) -> f64 {
        self.xi2
    }

    pub fn m(&self) -> f64 {
        (self.xi1 - 0.25 * self.xi2 * self.xi2).sqrt()
    }

    pub fn with_xi1(&self, xi1: f64) -> Result<Self> {
        Self::new(xi1, self.xi2)
    }

    /// Parse `"xi1,xi2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("expected `xi1,xi2`, got `{s}`")));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|e| Error::Parse(format!("`{p}`: {e}")));
        Self::new(num(parts[0])?, num(parts[1])?)
    }
}

pub fn psi_eval(p: &WaveParams, x: f64) -> Complex64 {
    let m = p.m();
    Complex64::from_polar(SQRT_2 * m / (m * x).cosh(), 0.5 * p.xi2 * x)
}

pub fn psi_hat(p: &WaveParams, omega: f64) -> Complex64 {
    let z = PI * (omega - 0.5 * p.xi2) / (2.0 * p.m());
    Complex64::new(SQRT_2 * PI / z.cosh(), 0.0)
}

pub fn check_domain(p: &WaveParams, grid: GridSpec) -> Result<()> {
    let ml = p.m() * grid.length();
    if ml < MIN_ML {
        return Err(Error::DomainTooSmall { ml, required: MIN_ML });
    }
    Ok(())
}

/// `ψ^h`: the transform of `ψ_ξ` restricted to the band of `grid`.
pub fn psi_projected(p: &WaveParams, grid: GridSpec) -> Result<SpectralField> {
    check_domain(p, grid)?;
    Ok(SpectralField::from_fn(grid, |w| psi_hat(p, w)))
}

/// `‖ψ_ξ‖²_{L²(ℝ)} = 4 m`.
pub fn psi_mass(p: &WaveParams) -> f64 {
    4.0 * p.m()
}

/// Directional derivative `d_ξ ψ^h (ζ)` of the projected spectrum.
pub fn dpsi_dxi(p: &WaveParams, grid: GridSpec, direction: (f64, f64)) -> SpectralField {
    let m = p.m();
    let (z1, z2) = direction;
    let dm = z1 / (2.0 * m) - p.xi2 * z2 / (4.0 * m);
    SpectralField::from_fn(grid, |w| {
        let z = PI * (w - 0.5 * p.xi2) / (2.0 * m);
        let dz = -z / m * dm - PI / (4.0 * m) * z2;
        let sech = 1.0 / z.cosh();
        Complex64::new(-SQRT_2 * PI * sech * z.tanh() * dz, 0.0)
    })
}

/// Multiply by `e^{ivx/2}`: translate the spectrum by `v/2`.
///
/// `v/2` must be a multiple of `2π/L`. Coefficients below `1e-14` of the peak that would
/// leave the band are dropped; larger ones raise [`Error::BandOverflow`].
pub fn galilean_boost(u: &SpectralField, v: f64) -> Result<SpectralField> {
    let length = u.length();
    let steps = 0.5 * v * length / (2.0 * PI);
    let shift = steps.round();
    if (steps - shift).abs() > 1e-9 * steps.abs().max(1.0) {
        return Err(Error::BoostNotCommensurate { v, length });
    }
    let shift = shift as i64;
    let n = u.n_points();
    let half = n as i64 / 2;
    let floor = 1e-14 * u.max_abs();
    let mut out = SpectralField::zeros(u.grid());
    for (i, c) in u.coeffs().iter().enumerate() {
        let k = fft::mode(i, n) + shift;
        if k < -half || k >= half {
            if c.norm() > floor {
                return Err(Error::BandOverflow { v });
            }
            continue;
        }
        out.coeffs_mut()[fft::slot(k, n)] = *c;
    }
    Ok(out)
}
