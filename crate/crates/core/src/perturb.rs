//! Seeded smooth random perturbations.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{norm, GridField, GridSpec, NormKind};
use crate::spectral::{to_grid, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationSpec {
    /// Discrete `H¹` norm of the result.
    pub size: f64,
    /// Spectral width: coefficients carry the weight `e^{-(ω/bandwidth)²}`.
    pub bandwidth: f64,
    /// Physical width of the Gaussian window `e^{-x²/(2 width²)}`.
    pub width: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self { size: 1e-3, bandwidth: 2.0, width: 4.0 }
    }
}

/// Complex Gaussian coefficients, filtered and windowed, rescaled to `spec.size` in `H¹(hZ)`.
///
/// The stream of random numbers depends only on `seed` and `grid.n`.
pub fn smooth_perturbation(grid: GridSpec, seed: u64, spec: &PerturbationSpec) -> Result<GridField> {
    if !(spec.size >= 0.0 && spec.bandwidth > 0.0 && spec.width > 0.0) {
        return Err(Error::Config(format!("invalid perturbation {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.length();
    let raw = SpectralField::from_fn(grid, |w| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) * (-(w / spec.bandwidth).powi(2)).exp() * l.sqrt()
    });
    let mut f = to_grid(&raw);
    let window: Vec<f64> = (0..grid.n).map(|j| (-0.5 * (f.position(j) / spec.width).powi(2)).exp()).collect();
    for (v, w) in f.values_mut().iter_mut().zip(window) {
        *v *= w;
    }
    let n1 = norm(&f, NormKind::H1);
    if n1 == 0.0 {
        return Ok(f);
    }
    Ok(f.scale(Complex64::new(spec.size / n1, 0.0)))
}
