//! Thread-local FFT plan cache and mode bookkeeping shared by the spectral code.
//!
//! Arrays are kept in the usual FFT order: slot `i` holds mode `k = i` for
//! `i < n/2` and `k = i - n` otherwise, so the band is `k ∈ [-n/2, n/2)`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward transform, `X_k = Σ_j x_j e^{-2πi jk/n}`.
pub fn forward(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// Unnormalized inverse transform, `x_j = Σ_k X_k e^{2πi jk/n}`.
pub fn inverse(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

#[inline]
pub fn mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[inline]
pub fn slot(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Copy band-limited coefficients of length `n` into a zero-padded array of length `m`.
pub fn pad(coeffs: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = coeffs.len();
    debug_assert!(m >= n);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (i, c) in coeffs.iter().enumerate() {
        out[slot(mode(i, n), m)] = *c;
    }
    out
}

/// Keep only the modes `k ∈ [-n/2, n/2)` of a length-`m` coefficient array.
pub fn truncate(coeffs: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = coeffs.len();
    (0..n).map(|i| coeffs[slot(mode(i, n), m)]).collect()
}

pub fn next_pow2_at_least(x: usize) -> usize {
    x.max(1).next_power_of_two()
}
