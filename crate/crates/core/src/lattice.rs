//! Periodic lattice fields, finite-difference operators and discrete norms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

/// Grid geometry: step `h` and a power-of-two number of sites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        validate_grid(h, n)?;
        Ok(Self { h, n })
    }

    /// Smallest power-of-two grid of step `h` whose period is at least `min_length`.
    pub fn with_min_length(h: f64, min_length: f64) -> Result<Self> {
        if !(min_length > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {min_length}")));
        }
        let raw = (min_length / h - 1e-9).ceil().max(8.0) as usize;
        Self::new(h, fft::next_pow2_at_least(raw))
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.h
    }
}

fn validate_grid(h: f64, n: usize) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidGrid(format!("step must be positive and finite, got {h}")));
    }
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("n_points must be a power of two >= 8, got {n}")));
    }
    Ok(())
}

/// Complex samples `u_g` at the sites `g = j h`, `j = 0..n`, of a periodic lattice.
///
/// Site `j` stands for the position `j h` taken in `[-L/2, L/2)`, so a profile
/// centred at the origin sits around index 0 and wraps to the end of the array.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    h: f64,
    values: Vec<Complex64>,
}

impl GridField {
    pub fn new(h: f64, values: Vec<Complex64>) -> Result<Self> {
        validate_grid(h, values.len())?;
        Ok(Self { h, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { h: grid.h, values: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    /// Sample `f` at the centred site positions.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let values = (0..grid.n).map(|j| f(site_position(j, grid.n, grid.h))).collect();
        Self { h: grid.h, values }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn length(&self) -> f64 {
        self.h * self.values.len() as f64
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { h: self.h, n: self.values.len() }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn position(&self, j: usize) -> f64 {
        site_position(j, self.values.len(), self.h)
    }

    /// Cyclic translation by whole sites: `(rotate(f, s))_j = f_{j-s}`.
    pub fn rotate(&self, sites: i64) -> Self {
        let n = self.values.len();
        let values = (0..n).map(|j| self.values[fft::slot(j as i64 - sites, n)]).collect();
        Self { h: self.h, values }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { h: self.h, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn sub(&self, other: &GridField) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { h: self.h, values })
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { h: self.h, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub(crate) fn check_compatible(&self, other: &GridField) -> Result<()> {
        if self.values.len() != other.values.len() {
            return Err(Error::SizeMismatch { expected: self.values.len(), actual: other.values.len() });
        }
        if (self.h - other.h).abs() > 1e-14 * self.h {
            return Err(Error::StepMismatch(self.h, other.h));
        }
        Ok(())
    }
}

pub(crate) fn site_position(j: usize, n: usize, h: f64) -> f64 {
    fft::mode(j, n) as f64 * h
}

/// Reduce `x` to the representative in `[-L/2, L/2)`.
pub fn wrap_position(x: f64, length: f64) -> f64 {
    x - length * ((x + 0.5 * length) / length).floor()
}

/// Three-point discrete Laplacian `(f_{g+h} - 2 f_g + f_{g-h}) / h²` with periodic wraparound.
pub fn discrete_laplacian(f: &GridField) -> GridField {
    let n = f.n_points();
    let inv_h2 = 1.0 / (f.h * f.h);
    let v = &f.values;
    let values = (0..n)
        .map(|j| (v[(j + 1) % n] - 2.0 * v[j] + v[(j + n - 1) % n]) * inv_h2)
        .collect();
    GridField { h: f.h, values }
}

/// Symmetric finite-difference stencil `a_{-n..=n}` for the second derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    /// `a_0, a_1, …, a_n`; negative indices mirror these.
    one_sided: Vec<f64>,
}

impl StencilSpec {
    /// Build from `a_0..=a_n`. Fails unless the full stencil sums to zero.
    pub fn new(one_sided: Vec<f64>) -> Result<Self> {
        if one_sided.len() < 2 {
            return Err(Error::Config("a stencil needs a_0 and at least a_1".into()));
        }
        if one_sided.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("stencil coefficients must be finite".into()));
        }
        let scale = one_sided.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let sum = one_sided[0] + 2.0 * one_sided[1..].iter().sum::<f64>();
        if sum.abs() > 1e-12 * scale * one_sided.len() as f64 {
            return Err(Error::Config(format!("stencil coefficients must sum to zero, got {sum:.3e}")));
        }
        Ok(Self { one_sided })
    }

    /// Build from the full list `a_{-n}, …, a_n`; the list must be symmetric.
    pub fn from_full(full: &[f64]) -> Result<Self> {
        if full.len() % 2 == 0 {
            return Err(Error::Config("full stencil must have odd length".into()));
        }
        let n = full.len() / 2;
        for k in 1..=n {
            if full[n + k] != full[n - k] {
                return Err(Error::Config(format!("stencil is not symmetric at k = {k}")));
            }
        }
        Self::new(full[n..].to_vec())
    }

    pub fn half_width(&self) -> usize {
        self.one_sided.len() - 1
    }

    pub fn coeff(&self, k: i64) -> f64 {
        self.one_sided.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    pub fn one_sided(&self) -> &[f64] {
        &self.one_sided
    }

    /// `a_0 + 2 Σ_{k>0} a_k cos(kθ)`, evaluated as `-4 Σ a_k sin²(kθ/2)` to avoid cancellation.
    pub fn symbol(&self, theta: f64) -> f64 {
        -4.0 * self.one_sided[1..]
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let s = ((i + 1) as f64 * theta * 0.5).sin();
                a * s * s
            })
            .sum::<f64>()
    }
}

/// `(1/h²) Σ_k a_k f_{g-kh}` on the periodic lattice.
pub fn apply_stencil(f: &GridField, s: &StencilSpec) -> Result<GridField> {
    let n = f.n_points();
    let w = s.half_width();
    if n <= 2 * w {
        return Err(Error::StencilTooWide { half_width: w, n_points: n });
    }
    let inv_h2 = 1.0 / (f.h * f.h);
    let v = &f.values;
    let a = s.one_sided();
    let values = (0..n)
        .map(|j| {
            let mut acc = a[0] * v[j];
            for (k, ak) in a.iter().enumerate().skip(1) {
                acc += *ak * (v[(j + k) % n] + v[(j + n - k) % n]);
            }
            acc * inv_h2
        })
        .collect();
    Ok(GridField { h: f.h, values })
}

/// Centred stencil of order `2n` for the second derivative:
/// `a_{±k} = 2(-1)^{k+1}/k² · C(2n, n-k)/C(2n, n)` for `0 < k ≤ n`, `a_0 = -2 Σ_{j≤n} 1/j²`.
pub fn dst_coefficients(order: usize) -> Result<StencilSpec> {
    if order == 0 {
        return Err(Error::Config("stencil order parameter must be >= 1".into()));
    }
    let n = order;
    let central = binomial(2 * n, n);
    let mut one_sided = Vec::with_capacity(n + 1);
    one_sided.push(-2.0 * (1..=n).map(|j| 1.0 / (j * j) as f64).sum::<f64>());
    for k in 1..=n {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        one_sided.push(2.0 * sign / (k * k) as f64 * binomial(2 * n, n - k) / central);
    }
    StencilSpec::new(one_sided)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolAnalysis {
    pub consistency_order: u32,
    pub stability_alpha: f64,
    pub stable: bool,
}

/// Consistency order and stability constant of a stencil, read off its symbol.
pub fn stencil_symbol_analysis(s: &StencilSpec) -> SymbolAnalysis {
    let stability_alpha = stability_constant(s);
    SymbolAnalysis {
        consistency_order: consistency_order(s),
        stability_alpha,
        stable: stability_alpha > 0.0,
    }
}

fn consistency_order(s: &StencilSpec) -> u32 {
    // Roundoff floor of err(θ) is ~1e-16; keep well above it.
    const FLOOR: f64 = 1e-12;
    let thetas: Vec<f64> = (0..10).map(|j| 0.4 * 0.5_f64.powi(j)).collect();
    let errs: Vec<f64> = thetas.iter().map(|&t| (s.symbol(t) / (t * t) + 1.0).abs()).collect();
    let mut slope = None;
    for j in 0..thetas.len() - 1 {
        if errs[j] > FLOOR && errs[j + 1] > FLOOR {
            slope = Some((errs[j] / errs[j + 1]).ln() / (thetas[j] / thetas[j + 1]).ln());
        }
    }
    match slope {
        Some(p) => (2.0 * (p / 2.0).round()).max(0.0) as u32,
        // the error sits below roundoff on the whole probe range
        None => 2 * (s.half_width() as u32 + 1),
    }
}

fn stability_constant(s: &StencilSpec) -> f64 {
    const SAMPLES: usize = 4096;
    let g = |t: f64| -s.symbol(t) / (t * t);
    let step = PI / SAMPLES as f64;
    let (mut best_i, mut best) = (1, f64::INFINITY);
    for i in 1..=SAMPLES {
        let v = g(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = (best_i as f64 - 1.0).max(1e-6) * step;
    let hi = ((best_i + 1) as f64 * step).min(PI);
    let refined = golden_section_min(g, lo, hi, 1e-13);
    refined.min(best).min(g(hi))
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b)).min(fc).min(fd)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    H1,
    HomogeneousSobolev(u32),
}

/// Discrete norms on `hZ`: `‖f‖²_{L²} = hΣ|f_g|²`, `‖f‖²_{H¹}` adds the forward-difference sum,
/// and `‖f‖²_{Ḣⁿ} = ⟨(-Δ_h)ⁿ f, f⟩` evaluated in Fourier space.
pub fn norm(f: &GridField, kind: NormKind) -> f64 {
    let h = f.h;
    let l2sq = h * f.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
    match kind {
        NormKind::L2 => l2sq.sqrt(),
        NormKind::H1 => (l2sq + forward_difference_sq(f)).sqrt(),
        NormKind::HomogeneousSobolev(order) => {
            let n = f.n_points();
            let mut buf = f.values.clone();
            fft::forward(&mut buf);
            let length = f.length();
            let sum: f64 = buf
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let omega = 2.0 * PI * fft::mode(i, n) as f64 / length;
                    laplacian_multiplier(omega, h).powi(order as i32) * (c * h).norm_sqr()
                })
                .sum();
            (sum / length).sqrt()
        }
    }
}

/// `hΣ|(f_g - f_{g-h})/h|²`
pub fn forward_difference_sq(f: &GridField) -> f64 {
    let n = f.n_points();
    let v = &f.values;
    (0..n).map(|j| (v[j] - v[(j + n - 1) % n]).norm_sqr()).sum::<f64>() / f.h
}

/// Symbol of `-Δ_h`: `(4/h²) sin²(ωh/2)`.
#[inline]
pub fn laplacian_multiplier(omega: f64, h: f64) -> f64 {
    let s = (0.5 * omega * h).sin();
    4.0 * s * s / (h * h)
}
