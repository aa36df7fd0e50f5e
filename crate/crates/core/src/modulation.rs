//! Gauge/translation tracking of a trajectory around a traveling wave.
//!
//! `T_{γ,x0} v = e^{iγ} v(· - x0)`. A state `(γ, x0)` is the orbit projection of `u`
//! when `w = T⁻¹u` satisfies `⟨w - η, iη⟩ = ⟨w - η, ∂_xη⟩ = 0`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Dnls, Flow, Trajectory};
use crate::error::{Error, Result};
use crate::fft;
use crate::lattice::{norm, GridField, NormKind};
use crate::spectral::{discrete_h1_norm, inner, to_grid, to_spectral, SpectralField};
use crate::waves::WaveParams;

const MAX_NEWTON: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    /// Phase, unwrapped along a track.
    pub gamma: f64,
    /// Position, unwrapped across periods along a track.
    pub x0: f64,
}

impl ModulationState {
    pub fn new(gamma: f64, x0: f64) -> Self {
        Self { gamma, x0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationTrack {
    pub times: Vec<f64>,
    pub states: Vec<ModulationState>,
    /// `(γ̇, ẋ0)` per frame from the modulation system.
    pub rates: Vec<(f64, f64)>,
    pub delta: Vec<f64>,
    /// `‖A⁻¹‖₂` per frame.
    pub a_inv_norm: Vec<f64>,
    /// Frame and time at which the orbit was lost, if it was.
    pub lost_at: Option<(usize, f64)>,
}

/// `T_{γ,x0} u`
pub fn transform(u: &SpectralField, state: ModulationState) -> SpectralField {
    let g = Complex64::from_polar(1.0, state.gamma);
    u.map(|w, c| c * g * Complex64::from_polar(1.0, -w * state.x0))
}

/// `T⁻¹_{γ,x0} u = e^{-iγ} u(· + x0)`
pub fn inverse_transform(u: &SpectralField, state: ModulationState) -> SpectralField {
    let g = Complex64::from_polar(1.0, -state.gamma);
    u.map(|w, c| c * g * Complex64::from_polar(1.0, w * state.x0))
}

/// Coarse guess for the projection: the lattice shift and phase maximizing the
/// correlation of `u` with `η`, refined by a parabola through the peak.
pub fn locate(u: &SpectralField, eta: &SpectralField) -> ModulationState {
    let n = u.n_points();
    // c(x) = ∫ u(y) conj(η(y - x)) dy, transform û conj(η̂)
    let prod: Vec<Complex64> = u.coeffs().iter().zip(eta.coeffs()).map(|(a, b)| a * b.conj()).collect();
    let corr = to_grid(&SpectralField::new(u.h(), prod).expect("same grid"));
    let v = corr.values();
    let (best, _) = v.iter().enumerate().fold((0, -1.0), |acc, (i, c)| if c.norm() > acc.1 { (i, c.norm()) } else { acc });
    let (a, b, c) = (v[(best + n - 1) % n].norm(), v[best].norm(), v[(best + 1) % n].norm());
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-300 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let x0 = (fft::mode(best, n) as f64 + offset) * u.h();
    ModulationState { gamma: v[best].arg(), x0 }
}

fn residuals(w: &SpectralField, ieta: &SpectralField, deta: &SpectralField) -> Vector2<f64> {
    Vector2::new(inner(w, ieta), inner(w, deta))
}

/// Solve the orthogonality conditions by Newton's method from `guess`.
pub fn project_orbit(u: &SpectralField, eta: &SpectralField, guess: ModulationState) -> Result<ModulationState> {
    let ieta = eta.times_i();
    let deta = eta.derivative();
    let scale = eta.l2_norm_sq();
    let radius = 0.5 * discrete_h1_norm(eta);
    let mut state = guess;
    let w0 = inverse_transform(u, state);
    if discrete_h1_norm(&w0.sub(eta)?) > radius {
        return Err(Error::ProjectionDiverged { frame: None, time: None });
    }
    for _ in 0..=MAX_NEWTON {
        let w = inverse_transform(u, state);
        let f = residuals(&w, &ieta, &deta);
        if f.amax() < 1e-11 * scale {
            if discrete_h1_norm(&w.sub(eta)?) > radius {
                return Err(Error::ProjectionDiverged { frame: None, time: None });
            }
            return Ok(state);
        }
        // ∂_γ w = -iw, ∂_{x0} w = ∂_x w
        let miw = w.times_i().scale(Complex64::new(-1.0, 0.0));
        let dw = w.derivative();
        let jac = Matrix2::new(inner(&miw, &ieta), inner(&dw, &ieta), inner(&miw, &deta), inner(&dw, &deta));
        let det = jac.determinant();
        let Some(inv) = jac.try_inverse() else {
            return Err(Error::SingularA { det });
        };
        let step = inv * f;
        state.gamma -= step[0];
        state.x0 -= step[1];
        if !(state.gamma.is_finite() && state.x0.is_finite()) {
            break;
        }
    }
    Err(Error::ProjectionDiverged { frame: None, time: None })
}

/// `A = [[⟨iη, iw⟩, -⟨iη, ∂w⟩], [⟨∂η, iw⟩, -⟨∂η, ∂w⟩]]` with `w = T⁻¹u`.
pub fn modulation_matrix(u: &SpectralField, eta: &SpectralField, state: ModulationState) -> Matrix2<f64> {
    let w = inverse_transform(u, state);
    let ieta = eta.times_i();
    let deta = eta.derivative();
    let iw = w.times_i();
    let dw = w.derivative();
    Matrix2::new(inner(&ieta, &iw), -inner(&ieta, &dw), inner(&deta, &iw), -inner(&deta, &dw))
}

/// `(γ̇, ẋ0)` from `A (γ̇, ẋ0)ᵀ = (⟨T⁻¹∂_t u, iη⟩, ⟨T⁻¹∂_t u, ∂_xη⟩)ᵀ`, with `∂_t u` from the lattice flow.
pub fn modulation_rates(f: &GridField, eta: &SpectralField, state: ModulationState) -> Result<(f64, f64)> {
    modulation_rates_with(f, eta, state, &Dnls)
}

/// As [`modulation_rates`] with `∂_t u` taken from `flow`.
pub fn modulation_rates_with(f: &GridField, eta: &SpectralField, state: ModulationState, flow: &dyn Flow) -> Result<(f64, f64)> {
    let u = to_spectral(f);
    let a = modulation_matrix(&u, eta, state);
    let dt = inverse_transform(&to_spectral(&flow.rhs(f)), state);
    let b = Vector2::new(inner(&dt, &eta.times_i()), inner(&dt, &eta.derivative()));
    let det = a.determinant();
    let inv = a.try_inverse().ok_or(Error::SingularA { det })?;
    let r = inv * b;
    Ok((r[0], r[1]))
}

/// `‖f - T_{γ,x0}η‖_{H¹(hZ)}`
pub fn orbit_distance(f: &GridField, eta: &SpectralField, state: ModulationState) -> f64 {
    let target = to_grid(&transform(eta, state));
    norm(&f.sub(&target).expect("same grid"), NormKind::H1)
}

/// Spectral norm of a 2×2 inverse.
fn inverse_norm(a: &Matrix2<f64>) -> f64 {
    match a.try_inverse() {
        Some(inv) => inv.singular_values().max(),
        None => f64::INFINITY,
    }
}

/// Track every frame, failing with [`Error::ProjectionDiverged`] when the orbit is lost.
pub fn track(traj: &Trajectory, eta: &SpectralField) -> Result<ModulationTrack> {
    let t = track_lenient(traj, eta)?;
    match t.lost_at {
        Some((frame, time)) => Err(Error::ProjectionDiverged { frame: Some(frame), time: Some(time) }),
        None => Ok(t),
    }
}

/// Track frames until the orbit is lost and return what was gathered.
///
/// Each frame starts from the previous state pushed forward by its rates. Frame 0 must
/// project; a later failure, or a miss of at least `π` in phase or `L/4` in position
/// against that prediction, ends the track and is recorded in `lost_at`.
pub fn track_lenient(traj: &Trajectory, eta: &SpectralField) -> Result<ModulationTrack> {
    let mut out = ModulationTrack {
        times: Vec::new(),
        states: Vec::new(),
        rates: Vec::new(),
        delta: Vec::new(),
        a_inv_norm: Vec::new(),
        lost_at: None,
    };
    let length = eta.length();
    // previous time, state and rates
    let mut prev: Option<(f64, ModulationState, (f64, f64))> = None;
    for (i, (time, frame)) in traj.times.iter().zip(&traj.frames).enumerate() {
        let u = to_spectral(frame);
        let predicted = prev.map(|(t, s, (gd, xd))| ModulationState { gamma: s.gamma + gd * (time - t), x0: s.x0 + xd * (time - t) });
        let projected = match predicted {
            Some(guess) => project_orbit(&u, eta, guess).or_else(|_| {
                let mut coarse = locate(&u, eta);
                coarse.gamma = unwrap_near(coarse.gamma, guess.gamma, 2.0 * PI);
                coarse.x0 = unwrap_near(coarse.x0, guess.x0, length);
                project_orbit(&u, eta, coarse)
            }),
            None => project_orbit(&u, eta, locate(&u, eta)),
        };
        let state = match projected {
            Ok(s) => s,
            Err(Error::ProjectionDiverged { .. }) | Err(Error::SingularA { .. }) if i > 0 => {
                out.lost_at = Some((i, *time));
                break;
            }
            Err(Error::ProjectionDiverged { .. }) => return Err(Error::ProjectionDiverged { frame: Some(0), time: Some(*time) }),
            Err(e) => return Err(e),
        };
        if let Some(p) = predicted {
            if (state.gamma - p.gamma).abs() >= PI || (state.x0 - p.x0).abs() >= 0.25 * length {
                out.lost_at = Some((i, *time));
                break;
            }
        }
        let rates = modulation_rates(frame, eta, state)?;
        out.times.push(*time);
        out.states.push(state);
        out.rates.push(rates);
        out.delta.push(orbit_distance(frame, eta, state));
        out.a_inv_norm.push(inverse_norm(&modulation_matrix(&u, eta, state)));
        prev = Some((*time, state, rates));
    }
    Ok(out)
}

/// `x + k·period` closest to `target`.
fn unwrap_near(x: f64, target: f64, period: f64) -> f64 {
    x + ((target - x) / period).round() * period
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeMode {
    /// `κ (δ(0) + e^{-ℓ/h}) e^{h|ξ₂|t}`
    Gronwall,
    /// `κ (δ(0) + e^{-ℓ/h} + √(t|ξ₂|) h^{n-1/2} sup_{s≤t}‖u(s)‖_{Ḣⁿ})`
    Sobolev(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub mode: EnvelopeMode,
    pub kappa: f64,
    pub ell: f64,
    pub max_ratio: f64,
    pub envelope: Vec<f64>,
}

/// Fit the stability envelope to a track: `ℓ = πε/3` from the Gevrey exponent `ε` of the
/// wave, `κ` the largest ratio `δ/envelope` over the first tenth of the frames.
///
/// The Sobolev mode needs the trajectory's `Ḣⁿ` norms; frames are matched by index.
pub fn envelope_check(
    track: &ModulationTrack,
    traj: &Trajectory,
    h: f64,
    p: &WaveParams,
    gevrey_eps: f64,
    mode: EnvelopeMode,
) -> Result<EnvelopeReport> {
    if track.delta.is_empty() {
        return Err(Error::Config("empty track".into()));
    }
    let ell = PI * gevrey_eps / 3.0;
    let floor = (-ell / h).exp();
    let d0 = track.delta[0];
    let speed = p.xi2().abs();
    let shape: Vec<f64> = match mode {
        EnvelopeMode::Gronwall => track.times.iter().map(|t| (d0 + floor) * (h * speed * t).exp()).collect(),
        EnvelopeMode::Sobolev(n) => {
            let mut sup = 0.0_f64;
            let mut out = Vec::with_capacity(track.times.len());
            for (i, t) in track.times.iter().enumerate() {
                let r = traj.reports.get(i).ok_or_else(|| Error::Config("trajectory shorter than track".into()))?;
                let s = r
                    .sobolev
                    .iter()
                    .find(|(k, _)| *k == n)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::Config(format!("trajectory did not record the Ḣ^{n} norm")))?;
                sup = sup.max(s);
                out.push(d0 + floor + (t * speed).sqrt() * h.powf(n as f64 - 0.5) * sup);
            }
            out
        }
    };
    let head = (track.delta.len() / 10).max(1);
    let kappa = (0..head).map(|i| track.delta[i] / shape[i]).fold(0.0, f64::max).max(1e-300);
    let envelope: Vec<f64> = shape.iter().map(|s| kappa * s).collect();
    let max_ratio = track.delta.iter().zip(&envelope).map(|(d, e)| d / e).fold(0.0, f64::max);
    Ok(EnvelopeReport { mode, kappa, ell, max_ratio, envelope })
}
