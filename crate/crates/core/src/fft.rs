//! Cached FFT plans and normalised transform helpers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanMap = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

fn cache() -> &'static Mutex<(FftPlanner<f64>, PlanMap)> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, PlanMap)>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

/// Returns a shared plan of length `len`.
pub fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let forward = direction == FftDirection::Forward;
    let mut guard = cache().lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    plans
        .entry((len, forward))
        .or_insert_with(|| planner.plan_fft(len, direction))
        .clone()
}

/// Unnormalised forward DFT: X_k = Σ x_n e^{-j2πnk/N}.
pub fn fft_inplace(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), FftDirection::Forward).process(buf);
}

/// Unnormalised inverse DFT: x_n = Σ X_k e^{+j2πnk/N}.
pub fn ifft_inplace(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), FftDirection::Inverse).process(buf);
}

pub fn fft_unitary(buf: &mut [Complex64]) {
    fft_inplace(buf);
    scale(buf, 1.0 / (buf.len() as f64).sqrt());
}

pub fn ifft_unitary(buf: &mut [Complex64]) {
    ifft_inplace(buf);
    scale(buf, 1.0 / (buf.len() as f64).sqrt());
}

pub fn scale(buf: &mut [Complex64], factor: f64) {
    for v in buf {
        *v *= factor;
    }
}

/// e^{jθ}
#[inline]
pub fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}
