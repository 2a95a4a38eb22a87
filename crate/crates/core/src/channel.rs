//! Received-signal generation: an exact sampled time-domain oracle and the
//! frequency-domain matrix model with ISI/ICI terms.
//!
//! Both paths share one convention. The demodulation window of symbol `m`
//! covers samples `m(N+N_cp) + N_cp + i`, `i ∈ [0, N)`, i.e. times
//! `mT + i·T_s`. An echo delayed by `N_h > N_cp` samples leaves window
//! samples `i < ⌈N_h − N_cp⌉` to the previous symbol.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::config::{DerivedParams, OfdmConfig};
use crate::error::{Error, Result};
use crate::fft::{self, cis};
use crate::grid::ComplexGrid;
use crate::linkbudget::{amplitude, TargetSpec};
use crate::waveform::{SymbolFrame, TimeSignal};

/// Physical parameters of one echo in simulation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetDerived {
    pub delay_s: f64,
    /// τ/T_s, fractional.
    pub delay_samples: f64,
    pub doppler_hz: f64,
    /// α̃ = √P_tx·α, amplitude as seen after unitary demodulation.
    pub alpha_tilde: Complex64,
}

impl TargetDerived {
    pub fn new(delay_s: f64, doppler_hz: f64, alpha_tilde: Complex64, params: &DerivedParams) -> Self {
        let raw = delay_s / params.sample_period;
        // Snap float noise so on-grid delays keep exact window boundaries.
        let delay_samples = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw };
        Self {
            delay_s,
            delay_samples,
            doppler_hz,
            alpha_tilde,
        }
    }

    pub fn phase_rad(&self) -> f64 {
        self.alpha_tilde.arg()
    }

    pub fn with_alpha(mut self, alpha_tilde: Complex64) -> Self {
        self.alpha_tilde = alpha_tilde;
        self
    }
}

pub fn target_derived(spec: &TargetSpec, cfg: &OfdmConfig, params: &DerivedParams) -> Result<TargetDerived> {
    spec.validate(params)?;
    let tau = params.delay_from_range(spec.range_m);
    if tau >= params.symbol_duration {
        return Err(Error::InvalidTarget(format!(
            "delay {tau:e} s is not below one symbol duration"
        )));
    }
    let f_d = params.doppler_from_velocity(spec.velocity_mps);
    if f_d.abs() > 0.1 * params.subcarrier_spacing {
        log::warn!(
            "target at {} m: Doppler {:.1} Hz exceeds 0.1·Δf ({:.1} Hz)",
            spec.range_m,
            f_d,
            0.1 * params.subcarrier_spacing
        );
    }
    let a = cfg.tx_power_w.sqrt() * amplitude(spec, cfg, params);
    Ok(TargetDerived::new(tau, f_d, Complex64::from_polar(a, spec.phase_rad), params))
}

pub fn targets_derived(specs: &[TargetSpec], cfg: &OfdmConfig, params: &DerivedParams) -> Result<Vec<TargetDerived>> {
    specs.iter().map(|s| target_derived(s, cfg, params)).collect()
}

/// b(τ): e^{−j2πkΔfτ}, k = 0..N.
pub fn delay_steering(delay_samples: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| cis(-2.0 * PI * k as f64 * delay_samples / n as f64))
        .collect()
}

/// c(f_D): e^{j2πf_D mT}, m = 0..M.
pub fn doppler_steering(doppler_hz: f64, m: usize, symbol_duration: f64) -> Vec<Complex64> {
    (0..m)
        .map(|i| cis(2.0 * PI * doppler_hz * i as f64 * symbol_duration))
        .collect()
}

/// A delay less than this many samples above an integer keeps its symbol
/// boundary at that integer. Estimates of on-grid targets scatter around
/// the integer; with a plain ceiling half of them would move the boundary
/// sample of every symbol by one.
pub const BOUNDARY_TOLERANCE: f64 = 0.05;

/// First sample index at or after the fractional position `x`, subject to
/// [`BOUNDARY_TOLERANCE`].
pub fn boundary_ceil(x: f64) -> f64 {
    (x - BOUNDARY_TOLERANCE).ceil()
}

/// First window sample that belongs to the current symbol.
pub fn isi_boundary(delay_samples: f64, cp_length: usize, n: usize) -> usize {
    let b = boundary_ceil(delay_samples - cp_length as f64);
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(n)
    }
}

/// Φ·v evaluated as DFT(mask · IDFT(v)) with mask selecting window samples
/// `i ≥ ⌈N_h − N_cp⌉`, the part of the window still filled by the current
/// symbol. Returns zeros when the echo is inside the CP.
pub fn phi_apply(delay_samples: f64, cp_length: usize, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    if delay_samples <= cp_length as f64 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let i0 = isi_boundary(delay_samples, cp_length, n);
    let mut buf = v.to_vec();
    fft::ifft_unitary(&mut buf);
    for s in &mut buf[..i0] {
        *s = Complex64::new(0.0, 0.0);
    }
    fft::fft_unitary(&mut buf);
    buf
}

/// How Doppler enters the frequency-domain model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerModel {
    /// One phase e^{j2πf_D mT} per symbol, no intra-symbol ICI.
    PerSymbol,
    /// Additionally applies e^{j2πf_D iT_s} across the window samples,
    /// matching the sampled oracle exactly.
    IntraSymbol,
}

/// Noiseless received frequency frame for `targets`:
///
/// `Y_m = α̃·c_m·[ b⊙X_m + Φ_c(b'⊙X_{m−1}) − Φ_c(b⊙X_m) ]`
///
/// with `b = b(τ)`, `b' = b(τ − T_cp)` and `Φ_c = I − Φ` acting only for
/// echoes beyond the CP. `out_cols` may exceed the frame width by one: that
/// column holds only the spill of the last symbol.
pub fn model_received_frame_fd(
    frame: &SymbolFrame,
    targets: &[TargetDerived],
    params: &DerivedParams,
    doppler: DopplerModel,
    out_cols: usize,
) -> Result<ComplexGrid> {
    let n = params.subcarriers;
    let ncp = params.cp_length;
    let x = &frame.data;
    if x.rows() != n {
        return Err(Error::DimensionMismatch(format!("frame has {} rows, config N = {n}", x.rows())));
    }
    if out_cols > x.cols() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{out_cols} output columns from a {}-symbol frame",
            x.cols()
        )));
    }
    let steer: Vec<(Vec<Complex64>, Vec<Complex64>)> = targets
        .iter()
        .map(|t| {
            (
                delay_steering(t.delay_samples, n),
                delay_steering(t.delay_samples - ncp as f64, n),
            )
        })
        .collect();
    let mut out = ComplexGrid::zeros(n, out_cols);
    out.as_mut_slice()
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(m, col)| {
            let mut cur = vec![Complex64::new(0.0, 0.0); n];
            let mut prev = vec![Complex64::new(0.0, 0.0); n];
            for (t, (b, b_prev)) in targets.iter().zip(&steer) {
                let gain = t.alpha_tilde * cis(2.0 * PI * t.doppler_hz * m as f64 * params.symbol_duration);
                let has_cur = m < x.cols();
                let isi = t.delay_samples > ncp as f64;
                let intra = doppler == DopplerModel::IntraSymbol && t.doppler_hz != 0.0;
                if !isi && !intra {
                    if has_cur {
                        for ((o, xv), bv) in col.iter_mut().zip(x.col(m)).zip(b) {
                            *o += gain * bv * xv;
                        }
                    }
                    continue;
                }
                // Time-domain window assembled from the current and previous symbol.
                if has_cur {
                    for ((c, xv), bv) in cur.iter_mut().zip(x.col(m)).zip(b) {
                        *c = bv * xv;
                    }
                    fft::ifft_unitary(&mut cur);
                } else {
                    cur.fill(Complex64::new(0.0, 0.0));
                }
                let i0 = if isi { isi_boundary(t.delay_samples, ncp, n) } else { 0 };
                if i0 > 0 {
                    if m >= 1 {
                        for ((p, xv), bv) in prev.iter_mut().zip(x.col(m - 1)).zip(b_prev) {
                            *p = bv * xv;
                        }
                        fft::ifft_unitary(&mut prev);
                        cur[..i0].copy_from_slice(&prev[..i0]);
                    } else {
                        cur[..i0].fill(Complex64::new(0.0, 0.0));
                    }
                }
                if intra {
                    let w = 2.0 * PI * t.doppler_hz * params.sample_period;
                    for (i, c) in cur.iter_mut().enumerate() {
                        *c *= cis(w * i as f64);
                    }
                }
                fft::fft_unitary(&mut cur);
                for (o, c) in col.iter_mut().zip(&cur) {
                    *o += gain * c;
                }
            }
        });
    Ok(out)
}

/// Adds the echo `α·x(t − τ)·e^{j2πf_D t}` of `tx` for one target into
/// `out`, with α = α̃/√P_tx.
///
/// Each transmitted symbol is a trigonometric polynomial over its CP-extended
/// support, so the fractional delay is exact: the symbol body is shifted by
/// δ = N_h − ⌊N_h⌋ with a spectral phase ramp and placed ⌊N_h⌋ samples later.
pub fn add_echo_time(tx: &TimeSignal, target: &TargetDerived, tx_power_w: f64, out: &mut [Complex64]) {
    let n = tx.subcarriers;
    let ncp = tx.cp_length;
    let sym_len = n + ncp;
    let alpha = target.alpha_tilde / tx_power_w.sqrt();
    if alpha.norm_sqr() == 0.0 {
        return;
    }
    let n_h = target.delay_samples;
    let d = n_h.floor();
    let delta = n_h - d;
    let d = d as usize;
    let ramp: Vec<Complex64> = (0..n).map(|k| cis(-2.0 * PI * k as f64 * delta / n as f64)).collect();
    let base = tx.start_offset;
    let n_sym = (tx.len() - base) / sym_len;
    let total = out.len();
    let w = 2.0 * PI * target.doppler_hz * tx.sample_period;
    let chunks: Vec<(usize, Vec<Complex64>)> = (0..n_sym)
        .into_par_iter()
        .filter_map(|m| {
            let start = base + m * sym_len;
            let body = &tx.samples[start + ncp..start + sym_len];
            if body.iter().all(|v| v.norm_sqr() == 0.0) {
                return None;
            }
            let mut q = body.to_vec();
            if delta != 0.0 {
                fft::fft_inplace(&mut q);
                for (v, r) in q.iter_mut().zip(&ramp) {
                    *v *= r;
                }
                fft::ifft_inplace(&mut q);
                fft::scale(&mut q, 1.0 / n as f64);
            }
            let first = boundary_ceil(n_h).max(0.0) as usize;
            let lo = start + first;
            let hi = (start + sym_len + first).min(total);
            if lo >= hi {
                return None;
            }
            let vals = (lo..hi)
                .map(|s| {
                    // Periodic body index s − d − start − N_cp (mod N).
                    let idx = (s + n - d - start - ncp) % n;
                    let t = s as f64 - (base + ncp) as f64;
                    alpha * q[idx] * cis(w * t)
                })
                .collect();
            Some((lo, vals))
        })
        .collect();
    for (lo, vals) in chunks {
        for (o, v) in out[lo..].iter_mut().zip(vals) {
            *o += v;
        }
    }
}

/// Sampled received signal: sum of echoes of `tx` plus complex white
/// Gaussian noise of power `noise_power` per sample.
///
/// Noise is drawn from ChaCha8 streams, one stream per block of
/// [`NOISE_BLOCK`] samples, so the result does not depend on scheduling.
pub fn apply_channel_time(
    tx: &TimeSignal,
    targets: &[TargetDerived],
    tx_power_w: f64,
    noise_power: f64,
    seed: u64,
) -> Result<TimeSignal> {
    if !(noise_power >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise power {noise_power} must be non-negative")));
    }
    let mut out = TimeSignal::zeros_like(tx);
    out.seed = Some(seed);
    for t in targets {
        add_echo_time(tx, t, tx_power_w, &mut out.samples);
    }
    if noise_power > 0.0 {
        add_noise(&mut out.samples, noise_power, seed);
    }
    Ok(out)
}

pub const NOISE_BLOCK: usize = 4096;

/// Adds CN(0, power) noise to `buf`, one ChaCha8 stream per block.
pub fn add_noise(buf: &mut [Complex64], power: f64, seed: u64) {
    let sigma = (power / 2.0).sqrt();
    buf.par_chunks_mut(NOISE_BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        for v in chunk {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re * sigma, im * sigma);
        }
    });
}
