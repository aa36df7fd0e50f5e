//! Newton construction of discrete traveling waves, mass matching, coercivity spectra
//! and Gevrey fits.
//!
//! Unknowns are the real Fourier coefficients of the wave, i.e. fields with
//! `ū(-x) = u(x)`. That class is invariant under the gradient map and removes the
//! gauge and translation kernels from the Jacobian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{self, Dispersion, Laplacian, Stencil};
use crate::error::{Error, Result};
use crate::fft;
use crate::functionals::{hessian_apply_with, lagrangian_gradient_with, linear_multiplier};
use crate::lattice::{laplacian_multiplier, norm, GridField, GridSpec, NormKind, StencilSpec};
use crate::spectral::{cubic_padding, fine_transform, interpolant_values, to_grid, SpectralField};
use crate::waves::{check_domain, psi_eval, psi_projected, WaveParams};

/// Dense LU is used up to this many modes; larger systems go through GMRES.
pub const DENSE_LIMIT: usize = 1024;
/// Dense eigensolves for the coercivity spectrum are limited to this many modes.
pub const EIGEN_LIMIT: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Compute the coercivity constant of the result (dense, `n ≤ 512` only).
    pub coercivity: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 30, max_halvings: 10, coercivity: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyFit {
    pub c: f64,
    pub eps: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolitonSolution {
    pub params: WaveParams,
    pub field: SpectralField,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub coercivity_alpha: Option<f64>,
    pub gevrey: GevreyFit,
    pub stencil: Option<StencilSpec>,
    /// Registry name of the dispersion operator.
    pub dispersion: String,
}

impl SolitonSolution {
    pub fn grid(&self) -> GridSpec {
        self.field.grid()
    }

    pub fn mass(&self) -> f64 {
        self.field.l2_norm_sq()
    }

    /// Rebuild the dispersion operator the wave was solved with.
    pub fn dispersion_operator(&self) -> Result<Box<dyn Dispersion>> {
        match &self.stencil {
            Some(s) => Ok(Box::new(Stencil::new(s.clone(), self.dispersion.clone())?)),
            None => dispersion::registry().create(&self.dispersion),
        }
    }
}

pub fn solve_wave(p: &WaveParams, grid: GridSpec, opts: &SolverOptions) -> Result<SolitonSolution> {
    solve_wave_with(&Laplacian, p, grid, opts, None)
}

/// Solve with the stencil `s` in place of the three-point Laplacian.
pub fn solve_wave_dst(s: &StencilSpec, p: &WaveParams, grid: GridSpec, opts: &SolverOptions) -> Result<SolitonSolution> {
    let label = format!("stencil:{}", s.half_width());
    let d = Stencil::new(s.clone(), label)?;
    solve_wave_with(&d, p, grid, opts, None)
}

/// Newton solve of `dL_ξ(u) = 0` for an arbitrary dispersion, starting from `init`
/// (default: the projected continuous soliton).
pub fn solve_wave_with(
    d: &dyn Dispersion,
    p: &WaveParams,
    grid: GridSpec,
    opts: &SolverOptions,
    init: Option<SpectralField>,
) -> Result<SolitonSolution> {
    check_domain(p, grid)?;
    let start = match init {
        Some(u) => {
            if u.grid() != grid {
                return Err(Error::SizeMismatch { expected: grid.n, actual: u.n_points() });
            }
            u.real_part()
        }
        None => psi_projected(p, grid)?,
    };
    let (field, residual_norm, newton_iters) = newton(d, p, start, opts)?;
    let gevrey = gevrey_fit(&field);
    let mut sol = SolitonSolution {
        params: *p,
        field,
        residual_norm,
        newton_iters,
        coercivity_alpha: None,
        gevrey,
        stencil: d.stencil().cloned(),
        dispersion: d.name(),
    };
    if opts.coercivity && grid.n <= EIGEN_LIMIT {
        sol.coercivity_alpha = Some(coercivity_spectrum_with(d, &sol).alpha);
    }
    Ok(sol)
}

/// `‖dL_ξ(u)‖_{L²}`
pub fn residual(p: &WaveParams, u: &SpectralField) -> f64 {
    residual_with(&Laplacian, p, u)
}

pub fn residual_with(d: &dyn Dispersion, p: &WaveParams, u: &SpectralField) -> f64 {
    lagrangian_gradient_with(d, p, u).l2_norm_sq().sqrt()
}

fn real_gradient(d: &dyn Dispersion, p: &WaveParams, u: &SpectralField) -> Result<(DVector<f64>, f64)> {
    let g = lagrangian_gradient_with(d, p, u);
    let leak = g.max_imag();
    if leak > 1e-9 * u.max_abs().max(1.0) {
        return Err(Error::SymmetryViolation { leak });
    }
    let v = DVector::from_iterator(g.n_points(), g.coeffs().iter().map(|c| c.re));
    let res = (v.norm_squared() / u.length()).sqrt();
    Ok((v, res))
}

fn with_coeffs(template: &SpectralField, a: &DVector<f64>) -> SpectralField {
    let mut u = template.clone();
    for (c, x) in u.coeffs_mut().iter_mut().zip(a.iter()) {
        *c = Complex64::new(*x, 0.0);
    }
    u
}

fn newton(d: &dyn Dispersion, p: &WaveParams, start: SpectralField, opts: &SolverOptions) -> Result<(SpectralField, f64, usize)> {
    let mut a = DVector::from_iterator(start.n_points(), start.coeffs().iter().map(|c| c.re));
    let mut u = start;
    let (mut g, mut res) = real_gradient(d, p, &u)?;
    let mut iters = 0;
    while res >= opts.tol {
        if iters >= opts.max_iter || !res.is_finite() {
            return Err(Error::NoConvergence { residual: res, iters });
        }
        let step = newton_step(d, p, &u, &g, res)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial_a = &a - &step * t;
            let trial = with_coeffs(&u, &trial_a);
            let (tg, tres) = real_gradient(d, p, &trial)?;
            if tres < res {
                a = trial_a;
                u = trial;
                g = tg;
                res = tres;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iters += 1;
        if !accepted {
            return Err(Error::NoConvergence { residual: res, iters });
        }
    }
    Ok((u, res, iters))
}

/// Spectra of `|u|²` and `u²` on the padded grid, indexed by mode via [`fft::slot`].
fn quadratic_spectra(u: &SpectralField) -> (Vec<Complex64>, Vec<Complex64>) {
    let m = cubic_padding(u.n_points());
    let vals = interpolant_values(u, m);
    let w = fine_transform(vals.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect(), u.length());
    let q = fine_transform(vals.iter().map(|v| v * v).collect(), u.length());
    (w, q)
}

/// Jacobian of the real gradient with respect to real coefficients:
/// `J_kj = μ_k δ_kj - (2/L) Re W_{k-j} - (1/L) Re Q_{k+j}`.
pub fn real_jacobian(d: &dyn Dispersion, p: &WaveParams, u: &SpectralField) -> DMatrix<f64> {
    let n = u.n_points();
    let l = u.length();
    let (w, q) = quadratic_spectra(u);
    let m = w.len();
    let h = u.h();
    let modes: Vec<i64> = (0..n).map(|i| fft::mode(i, n)).collect();
    DMatrix::from_fn(n, n, |r, c| {
        let (k, j) = (modes[r], modes[c]);
        let mut v = -(2.0 / l) * w[fft::slot(k - j, m)].re - (1.0 / l) * q[fft::slot(k + j, m)].re;
        if r == c {
            v += linear_multiplier(d, p, u.omega(r), h);
        }
        v
    })
}

fn newton_step(d: &dyn Dispersion, p: &WaveParams, u: &SpectralField, g: &DVector<f64>, res: f64) -> Result<DVector<f64>> {
    let n = u.n_points();
    if n <= DENSE_LIMIT {
        let j = real_jacobian(d, p, u);
        return j.lu().solve(g).ok_or(Error::NoConvergence { residual: res, iters: 0 });
    }
    let l = u.length();
    let (w, q) = quadratic_spectra(u);
    let m = w.len();
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let k = fft::mode(i, n);
            linear_multiplier(d, p, u.omega(i), u.h()) - (2.0 / l) * w[0].re - (1.0 / l) * q[fft::slot(2 * k, m)].re
        })
        .collect();
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let v = with_coeffs(u, x);
        let hv = hessian_apply_with(d, p, u, &v);
        DVector::from_iterator(n, hv.coeffs().iter().map(|c| c.re))
    };
    gmres(apply, &diag, g, 1e-3, 60, 40).ok_or(Error::NoConvergence { residual: res, iters: 0 })
}

/// Right-preconditioned restarted GMRES for `A x = b` with a diagonal preconditioner.
/// Stops when `‖b - A x‖ ≤ rtol ‖b‖`.
fn gmres(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    diag: &[f64],
    b: &DVector<f64>,
    rtol: f64,
    restart: usize,
    max_cycles: usize,
) -> Option<DVector<f64>> {
    let n = b.len();
    let precond = |v: &DVector<f64>| DVector::from_iterator(n, v.iter().zip(diag).map(|(x, d)| if d.abs() > 1e-300 { x / d } else { *x }));
    let bnorm = b.norm();
    let mut x = DVector::zeros(n);
    if bnorm == 0.0 {
        return Some(x);
    }
    for _ in 0..max_cycles {
        let r = b - apply(&x);
        let beta = r.norm();
        if beta <= rtol * bnorm {
            return Some(x);
        }
        let mut basis: Vec<DVector<f64>> = vec![r / beta];
        let mut hess = DMatrix::<f64>::zeros(restart + 1, restart);
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut e = DVector::<f64>::zeros(restart + 1);
        e[0] = beta;
        let mut used = 0;
        for j in 0..restart {
            let mut v = apply(&precond(&basis[j]));
            for (i, bi) in basis.iter().enumerate() {
                let hij = v.dot(bi);
                hess[(i, j)] = hij;
                v -= bi * hij;
            }
            let hn = v.norm();
            hess[(j + 1, j)] = hn;
            for i in 0..j {
                let t = cs[i] * hess[(i, j)] + sn[i] * hess[(i + 1, j)];
                hess[(i + 1, j)] = -sn[i] * hess[(i, j)] + cs[i] * hess[(i + 1, j)];
                hess[(i, j)] = t;
            }
            let denom = hess[(j, j)].hypot(hess[(j + 1, j)]);
            cs[j] = hess[(j, j)] / denom;
            sn[j] = hess[(j + 1, j)] / denom;
            hess[(j, j)] = denom;
            hess[(j + 1, j)] = 0.0;
            e[j + 1] = -sn[j] * e[j];
            e[j] *= cs[j];
            used = j + 1;
            if e[j + 1].abs() <= rtol * bnorm || hn == 0.0 {
                break;
            }
            basis.push(v / hn);
        }
        let mut y = DVector::<f64>::zeros(used);
        for i in (0..used).rev() {
            let mut s = e[i];
            for k in i + 1..used {
                s -= hess[(i, k)] * y[k];
            }
            y[i] = s / hess[(i, i)];
        }
        let mut z = DVector::zeros(n);
        for (i, yi) in y.iter().enumerate() {
            z += &basis[i] * *yi;
        }
        x += precond(&z);
    }
    let r = b - apply(&x);
    (r.norm() <= rtol * bnorm).then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    /// Smallest eigenvalue of the `H¹`-preconditioned Hessian on the complement of
    /// `span(η, iη, ∂_xη)`.
    pub alpha: f64,
    /// Lowest eigenvalues of the projected form, ascending.
    pub spectrum_head: Vec<f64>,
    /// Lowest eigenvalues of the unprojected form, ascending.
    pub unprojected_head: Vec<f64>,
    /// `⟨Hη, η⟩ / ‖η‖²_{H¹}`
    pub eta_rayleigh: f64,
}

pub fn coercivity_spectrum(sol: &SolitonSolution) -> Result<CoercivityReport> {
    let d = sol.dispersion_operator()?;
    Ok(coercivity_spectrum_with(d.as_ref(), sol))
}

/// Dense eigen-analysis of the Lagrangian Hessian at `sol`, in real coordinates
/// `v̂ = x + iy`, preconditioned by the discrete `H¹` weight `1 + (4/h²)sin²(ωh/2)`.
pub fn coercivity_spectrum_with(d: &dyn Dispersion, sol: &SolitonSolution) -> CoercivityReport {
    const HEAD: usize = 8;
    let u = &sol.field;
    let p = &sol.params;
    let n = u.n_points();
    let l = u.length();
    let h = u.h();
    let (w, q) = quadratic_spectra(u);
    let m = w.len();
    let modes: Vec<i64> = (0..n).map(|i| fft::mode(i, n)).collect();
    let mult: Vec<f64> = (0..n).map(|i| linear_multiplier(d, p, u.omega(i), h)).collect();
    let weight: Vec<f64> = (0..n).map(|i| ((1.0 + laplacian_multiplier(u.omega(i), h)) / l).sqrt()).collect();

    // quadratic form K = B / L, then K̃ = D^{-1/2} K D^{-1/2}
    let mut k = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let wk = w[fft::slot(modes[r] - modes[c], m)];
            let qk = q[fft::slot(modes[r] + modes[c], m)];
            let (a, b, cc, dd) = (wk.re, wk.im, qk.re, qk.im);
            let diag = if r == c { mult[r] } else { 0.0 };
            let s = 1.0 / (l * weight[r] * weight[c]);
            k[(r, c)] = (diag - 2.0 * a / l - cc / l) * s;
            k[(r, n + c)] = (2.0 * b / l - dd / l) * s;
            k[(n + r, c)] = (-2.0 * b / l - dd / l) * s;
            k[(n + r, n + c)] = (diag - 2.0 * a / l + cc / l) * s;
        }
    }

    // constraint directions η, iη, ∂η in z-coordinates: c = D^{-1/2} e
    let eta: Vec<Complex64> = u.coeffs().to_vec();
    let dirs: Vec<Vec<Complex64>> = vec![
        eta.clone(),
        eta.iter().map(|c| c * Complex64::new(0.0, 1.0)).collect(),
        eta.iter().enumerate().map(|(i, c)| c * Complex64::new(0.0, u.omega(i))).collect(),
    ];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for dir in &dirs {
        let mut v = DVector::from_fn(2 * n, |i, _| {
            let (j, part) = (i % n, i / n);
            let c = dir[j];
            (if part == 0 { c.re } else { c.im }) / (l * weight[j])
        });
        for b in &basis {
            let proj = v.dot(b);
            v -= b * proj;
        }
        let nv = v.norm();
        if nv > 1e-12 {
            basis.push(v / nv);
        }
    }

    // η Rayleigh quotient in the H¹ metric: z = D^{1/2} η
    let z_eta = DVector::from_fn(2 * n, |i, _| {
        let (j, part) = (i % n, i / n);
        (if part == 0 { eta[j].re } else { eta[j].im }) * weight[j]
    });
    let eta_rayleigh = (&k * &z_eta).dot(&z_eta) / z_eta.norm_squared();

    let mut unprojected = k.clone().symmetric_eigenvalues().iter().copied().collect::<Vec<_>>();
    unprojected.sort_by(|a, b| a.total_cmp(b));
    unprojected.truncate(HEAD);

    // P K̃ P + σ Σ q qᵀ with P = I - Σ q qᵀ
    let sigma = 10.0 * (0..2 * n).map(|i| k[(i, i)].abs()).fold(1.0, f64::max);
    let qmat = DMatrix::from_columns(&basis);
    let kq = &k * &qmat;
    let qkq = qmat.transpose() * &kq;
    let mut proj = k.clone();
    proj -= &kq * qmat.transpose();
    proj -= &qmat * kq.transpose();
    proj += &qmat * &qkq * qmat.transpose();
    proj += &qmat * qmat.transpose() * sigma;
    // symmetrize against roundoff
    let proj = (&proj + proj.transpose()) * 0.5;
    let mut projected: Vec<f64> = proj.symmetric_eigenvalues().iter().copied().collect();
    projected.sort_by(|a, b| a.total_cmp(b));
    projected.truncate(HEAD);

    CoercivityReport { alpha: projected[0], spectrum_head: projected, unprojected_head: unprojected, eta_rayleigh }
}

/// Least-squares line through `(|ω_k|, log|û_k|)` over modes with `|û_k| > 1e-12`,
/// skipping the lowest tenth of the frequency range: `|û| ≈ C e^{-ε|ω|}`.
pub fn gevrey_fit(u: &SpectralField) -> GevreyFit {
    let omega_max = (0..u.n_points()).map(|i| u.omega(i).abs()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = u
        .coeffs()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let w = u.omega(i).abs();
            (c.norm() > 1e-12 && w >= 0.1 * omega_max).then(|| (w, c.norm().ln()))
        })
        .collect();
    let count = pts.len();
    if count < 3 {
        return GevreyFit { c: f64::NAN, eps: f64::NAN, r2: f64::NAN, points: count };
    }
    let nf = count as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    GevreyFit { c: intercept.exp(), eps: -slope, r2: 1.0 - sse / syy, points: count }
}

/// `‖I η - ψ‖_{H¹(hZ)}`: distance between the wave and the continuous soliton sampled on the lattice.
pub fn consistency_error(sol: &SolitonSolution) -> f64 {
    let grid = sol.grid();
    let psi = GridField::from_fn(grid, |x| psi_eval(&sol.params, x));
    norm(&to_grid(&sol.field).sub(&psi).expect("same grid"), NormKind::H1)
}

/// Find `ζ₁` with `‖η_{(ζ₁, ξ₂)}‖² = target` by safeguarded false position on `bracket`.
pub fn match_mass(xi2: f64, target: f64, grid: GridSpec, bracket: (f64, f64), opts: &SolverOptions) -> Result<WaveParams> {
    let mass_at = |z1: f64| -> Result<f64> {
        let p = WaveParams::new(z1, xi2).map_err(|e| Error::BracketFailure(e.to_string()))?;
        Ok(solve_wave(&p, grid, opts)?.mass())
    };
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::BracketFailure(format!("empty bracket [{lo}, {hi}]")));
    }
    let (m_lo, m_hi) = (mass_at(lo)?, mass_at(hi)?);
    if !(m_lo < m_hi) {
        return Err(Error::BracketFailure(format!("mass is not increasing on the bracket: {m_lo} at {lo}, {m_hi} at {hi}")));
    }
    if !(m_lo <= target && target <= m_hi) {
        return Err(Error::BracketFailure(format!("target {target} outside [{m_lo}, {m_hi}]")));
    }
    let tol = 1e-11 * target;
    let (mut f_lo, mut f_hi) = (m_lo - target, m_hi - target);
    let mut side = 0i8;
    for _ in 0..100 {
        if f_lo.abs() <= tol {
            return WaveParams::new(lo, xi2);
        }
        if f_hi.abs() <= tol {
            return WaveParams::new(hi, xi2);
        }
        let mut z = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(z > lo && z < hi) {
            z = 0.5 * (lo + hi);
        }
        let m = mass_at(z)?;
        let f = m - target;
        if m < m_lo - tol || m > m_hi + tol {
            return Err(Error::BracketFailure(format!("mass is not monotone: {m} at {z}")));
        }
        if f.abs() <= tol {
            return WaveParams::new(z, xi2);
        }
        // Illinois modification keeps both ends moving
        if f < 0.0 {
            lo = z;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = z;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 1e-15 * hi.abs() {
            return WaveParams::new(0.5 * (lo + hi), xi2);
        }
    }
    Err(Error::BracketFailure("no convergence in 100 iterations".into()))
}
