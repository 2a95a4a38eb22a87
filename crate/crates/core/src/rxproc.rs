//! Conventional OFDM radar processing: demodulation, zero-forcing
//! equalization, windowing and range-Doppler image formation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::config::DerivedParams;
use crate::error::{Error, Result};
use crate::fft;
use crate::grid::ComplexGrid;
use crate::units::w_to_dbm;
use crate::waveform::{SymbolFrame, TimeSignal};

/// Removes the CP of each symbol and applies a unitary N-point DFT.
///
/// Symbol `m` is read from `start_offset + window_offset + m(N+N_cp) + N_cp`.
pub fn demodulate(rx: &TimeSignal, window_offset: usize, symbols: usize) -> Result<ComplexGrid> {
    let n = rx.subcarriers;
    let sym_len = rx.symbol_len();
    let first = rx.start_offset + window_offset + rx.cp_length;
    let needed = first + (symbols.max(1) - 1) * sym_len + n;
    if symbols > 0 && needed > rx.len() {
        return Err(Error::SignalTooShort {
            needed,
            available: rx.len(),
        });
    }
    let mut out = ComplexGrid::zeros(n, symbols);
    out.as_mut_slice()
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(m, col)| {
            let s = first + m * sym_len;
            col.copy_from_slice(&rx.samples[s..s + n]);
            fft::fft_unitary(col);
        });
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Rectangular,
    Chebyshev { sidelobe_db: f64 },
    Hamming,
}

/// Separable 2D window with its coherent peak-power loss.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub w_r: Vec<f64>,
    pub w_d: Vec<f64>,
    /// |mean(w_r·w_dᵀ)|²
    pub loss: f64,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, n: usize, m: usize) -> Self {
        let w_r = window(kind, n);
        let w_d = window(kind, m);
        let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len().max(1) as f64;
        let loss = (mean(&w_r) * mean(&w_d)).powi(2);
        Self { kind, w_r, w_d, loss }
    }

    pub fn rectangular(n: usize, m: usize) -> Self {
        Self::new(WindowKind::Rectangular, n, m)
    }

    pub fn is_rectangular(&self) -> bool {
        self.kind == WindowKind::Rectangular
    }
}

/// Symmetric window of length `len`, peak normalised to 1.
pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => vec![1.0; len],
        WindowKind::Hamming => {
            if len == 1 {
                return vec![1.0];
            }
            (0..len)
                .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
                .collect()
        }
        WindowKind::Chebyshev { sidelobe_db } => chebwin(len, sidelobe_db),
    }
}

/// Dolph-Chebyshev window built from the frequency-domain Chebyshev
/// polynomial (same construction as SciPy's `chebwin`).
pub fn chebwin(len: usize, sidelobe_db: f64) -> Vec<f64> {
    if len <= 1 {
        return vec![1.0; len];
    }
    let order = (len - 1) as f64;
    let beta = ((10f64.powf(sidelobe_db.abs() / 20.0)).acosh() / order).cosh();
    let p: Vec<f64> = (0..len)
        .map(|k| {
            let x = beta * (PI * k as f64 / len as f64).cos();
            if x > 1.0 {
                (order * x.acosh()).cosh()
            } else if x < -1.0 {
                let sign = if len % 2 == 1 { 1.0 } else { -1.0 };
                sign * (order * (-x).acosh()).cosh()
            } else {
                (order * x.acos()).cos()
            }
        })
        .collect();
    let mut w: Vec<f64>;
    if len % 2 == 1 {
        let mut buf: Vec<Complex64> = p.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::fft_inplace(&mut buf);
        let half = len.div_ceil(2);
        let re: Vec<f64> = buf[..half].iter().map(|v| v.re).collect();
        w = re[1..].iter().rev().copied().collect();
        w.extend_from_slice(&re);
    } else {
        let mut buf: Vec<Complex64> = p
            .iter()
            .enumerate()
            .map(|(k, &v)| v * fft::cis(PI * k as f64 / len as f64))
            .collect();
        fft::fft_inplace(&mut buf);
        let half = len / 2 + 1;
        let re: Vec<f64> = buf[..half].iter().map(|v| v.re).collect();
        w = re[1..].iter().rev().copied().collect();
        w.extend_from_slice(&re[1..]);
    }
    let max = w.iter().copied().fold(f64::MIN, f64::max);
    for v in &mut w {
        *v /= max;
    }
    w
}

/// H = (Y ⊘ X) ⊙ (w_r·w_dᵀ), over the columns of `y`.
pub fn equalize_and_window(y: &ComplexGrid, x: &SymbolFrame, window: &WindowSpec) -> Result<ComplexGrid> {
    let (n, m) = y.shape();
    if x.subcarriers() != n || x.symbols() < m {
        return Err(Error::DimensionMismatch(format!(
            "received {n}x{m} against transmit {}x{}",
            x.subcarriers(),
            x.symbols()
        )));
    }
    if window.w_r.len() != n || window.w_d.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "window {}x{} for a {n}x{m} frame",
            window.w_r.len(),
            window.w_d.len()
        )));
    }
    let mut h = ComplexGrid::zeros(n, m);
    for c in 0..m {
        let xc = x.data.col(c);
        let yc = y.col(c);
        let wd = window.w_d[c];
        for (r, out) in h.col_mut(c).iter_mut().enumerate() {
            if xc[r].norm_sqr() == 0.0 {
                return Err(Error::ZeroSymbol { subcarrier: r, symbol: c });
            }
            *out = yc[r] / xc[r] * (window.w_r[r] * wd);
        }
    }
    Ok(h)
}

/// Complex range-Doppler image with zero velocity at column M/2.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerImage {
    pub data: ComplexGrid,
    pub range_axis: Vec<f64>,
    pub velocity_axis: Vec<f64>,
}

impl RangeDopplerImage {
    pub fn range_bins(&self) -> usize {
        self.data.rows()
    }

    pub fn doppler_bins(&self) -> usize {
        self.data.cols()
    }

    pub fn power(&self, r: usize, d: usize) -> f64 {
        self.data.get(r, d).norm_sqr()
    }

    /// Fractional (range, Doppler) bin of a delay and Doppler frequency.
    pub fn bin_of(tau: f64, doppler_hz: f64, params: &DerivedParams) -> (f64, f64) {
        let n = params.subcarriers as f64;
        let m = params.symbols as f64;
        let r = (tau / params.sample_period).rem_euclid(n);
        let d = (doppler_hz * m * params.symbol_duration + m / 2.0).rem_euclid(m);
        (r, d)
    }

    /// Nearest image cell of a delay and Doppler frequency.
    pub fn cell_of(tau: f64, doppler_hz: f64, params: &DerivedParams) -> (usize, usize) {
        let (r, d) = Self::bin_of(tau, doppler_hz, params);
        (
            (r.round() as usize) % params.subcarriers,
            (d.round() as usize) % params.symbols,
        )
    }
}

/// Applies the block permutation that moves column j to (j + M/2) mod M.
/// It is its own inverse for even M.
pub fn doppler_shift_columns(g: &ComplexGrid) -> ComplexGrid {
    let (n, m) = g.shape();
    let mut out = ComplexGrid::zeros(n, m);
    for c in 0..m {
        out.col_mut((c + m / 2) % m).copy_from_slice(g.col(c));
    }
    out
}

/// Unitary IDFT over subcarriers, unitary DFT over symbols, then the
/// Doppler permutation.
pub fn range_doppler_image(h: &ComplexGrid, params: &DerivedParams) -> Result<RangeDopplerImage> {
    let (n, m) = h.shape();
    if n != params.subcarriers || m % 2 != 0 || m == 0 {
        return Err(Error::DimensionMismatch(format!(
            "channel matrix {n}x{m} (need N = {} rows and an even column count)",
            params.subcarriers
        )));
    }
    let mut g = h.clone();
    g.as_mut_slice()
        .par_chunks_mut(n)
        .for_each(fft::ifft_unitary);
    // Transpose so rows become contiguous for the Doppler transform.
    let mut t = vec![Complex64::new(0.0, 0.0); n * m];
    for c in 0..m {
        for (r, v) in g.col(c).iter().enumerate() {
            t[r * m + c] = *v;
        }
    }
    t.par_chunks_mut(m).for_each(fft::fft_unitary);
    let mut data = ComplexGrid::zeros(n, m);
    for r in 0..n {
        for c in 0..m {
            data.set(r, (c + m / 2) % m, t[r * m + c]);
        }
    }
    let mt = m as f64 * params.symbol_duration;
    Ok(RangeDopplerImage {
        data,
        range_axis: (0..n).map(|i| i as f64 * params.range_resolution).collect(),
        velocity_axis: (0..m)
            .map(|j| params.velocity_from_doppler((j as f64 - (m / 2) as f64) / mt))
            .collect(),
    })
}

/// Cell of a known target and its measured peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakMetric {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub peak_w: f64,
    pub peak_dbm: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub floor_w: f64,
    pub floor_dbm: f64,
    pub peaks: Vec<PeakMetric>,
}

/// Median-based floor and per-target image SINR.
///
/// The floor is the median of |I|² outside `exclusion` (range, Doppler)
/// bins around every target, divided by ln 2: for complex Gaussian noise
/// that maps the median of the exponential power distribution to its mean.
/// A target's peak is the largest |I|² within ±1 bin of its cell.
pub fn image_metrics(
    image: &RangeDopplerImage,
    targets: &[(usize, usize)],
    exclusion: (usize, usize),
) -> Result<ImageMetrics> {
    let (n, m) = image.data.shape();
    for &(r, d) in targets {
        if r >= n || d >= m {
            return Err(Error::OutOfBounds(format!("target cell ({r}, {d}) in a {n}x{m} image")));
        }
    }
    let excluded = |r: usize, d: usize| {
        targets.iter().any(|&(tr, td)| {
            let dr = r.abs_diff(tr);
            let dd = d.abs_diff(td);
            dr <= exclusion.0 && dd.min(m - dd) <= exclusion.1
        })
    };
    let mut pool: Vec<f64> = Vec::with_capacity(n * m);
    for d in 0..m {
        for (r, v) in image.data.col(d).iter().enumerate() {
            if targets.is_empty() || !excluded(r, d) {
                pool.push(v.norm_sqr());
            }
        }
    }
    let floor_w = if pool.is_empty() { 0.0 } else { median(&mut pool) / std::f64::consts::LN_2 };
    let peaks = targets
        .iter()
        .map(|&(tr, td)| {
            let mut best = (tr, td, 0.0);
            for dr in -1i64..=1 {
                let r = tr as i64 + dr;
                if r < 0 || r >= n as i64 {
                    continue;
                }
                for dd in -1i64..=1 {
                    let d = (td as i64 + dd).rem_euclid(m as i64) as usize;
                    let p = image.power(r as usize, d);
                    if p > best.2 {
                        best = (r as usize, d, p);
                    }
                }
            }
            PeakMetric {
                range_bin: best.0,
                doppler_bin: best.1,
                peak_w: best.2,
                peak_dbm: w_to_dbm(best.2),
                sinr_db: 10.0 * (best.2 / floor_w).log10(),
            }
        })
        .collect();
    Ok(ImageMetrics {
        floor_w,
        floor_dbm: w_to_dbm(floor_w),
        peaks,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let upper = *m;
    if values.len() % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::MIN, f64::max);
        0.5 * (lower + upper)
    }
}
