//! Sub-bin delay/Doppler refinement with a 2D chirp-Z zoom and
//! loss-compensated complex amplitude estimation.
//!
//! Index conventions follow the image: range bin `ν` corresponds to delay
//! `ν/B`, Doppler column `μ` to `f_D = (μ − M/2)/(M·T)`.

pub mod czt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::{delay_steering, doppler_steering};
use crate::config::DerivedParams;
use crate::detect::CoarsePeak;
use crate::error::{Error, Result};
use crate::fft::cis;
use crate::grid::ComplexGrid;
use crate::linkbudget::eta;
use crate::rxproc::WindowSpec;
use crate::waveform::SymbolFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CztConfig {
    /// Width of the zoomed region in coarse bins.
    pub roi_width: usize,
    /// Zoom factor: CZT points per coarse bin.
    pub zoom_factor: usize,
    /// Three-point parabolic refinement of the CZT peak.
    pub quadratic: bool,
}

impl Default for CztConfig {
    fn default() -> Self {
        Self {
            roi_width: 8,
            zoom_factor: 100,
            quadratic: true,
        }
    }
}

impl CztConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roi_width < 3 {
            return Err(Error::InvalidParameter("CZT ROI width must be at least 3 bins".into()));
        }
        if self.zoom_factor == 0 {
            return Err(Error::InvalidParameter("CZT zoom factor must be at least 1".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> usize {
        self.roi_width * self.zoom_factor
    }
}

/// Zoomed image around one coarse peak, normalised by 1/√(NM) so on-grid
/// points equal the range-Doppler image values.
#[derive(Debug, Clone)]
pub struct CztZoom {
    pub z: ComplexGrid,
    pub coarse: (usize, usize),
    pub roi_width: usize,
    pub zoom_factor: usize,
}

impl CztZoom {
    pub fn points(&self) -> usize {
        self.z.rows()
    }

    /// Fractional image bins of zoom point (k, p).
    pub fn bins_of(&self, k: f64, p: f64) -> (f64, f64) {
        let half = self.points() as f64 / 2.0;
        let l = self.zoom_factor as f64;
        (
            self.coarse.0 as f64 + (k - half) / l,
            self.coarse.1 as f64 + (p - half) / l,
        )
    }
}

/// Two-stage CZT: along subcarriers toward range, then along symbols toward
/// Doppler, over `roi_width` bins centred on the coarse peak.
pub fn czt_zoom(h: &ComplexGrid, peak: &CoarsePeak, cfg: &CztConfig) -> Result<CztZoom> {
    cfg.validate()?;
    let (n, m) = h.shape();
    if peak.range_bin >= n || peak.doppler_bin >= m {
        return Err(Error::OutOfBounds(format!(
            "peak ({}, {}) in a {n}x{m} frame",
            peak.range_bin, peak.doppler_bin
        )));
    }
    let mut roi = cfg.roi_width;
    if roi > n.min(m) {
        log::warn!("CZT ROI of {roi} bins clamped to {} to avoid wrap-around", n.min(m));
        roi = n.min(m);
    }
    let l = cfg.zoom_factor;
    let k_out = roi * l;
    let (nf, mf, lf, bf) = (n as f64, m as f64, l as f64, roi as f64);
    // Range: Σ_n H(n,m)·e^{+j2πn(n̂ − B/2 + k/L)/N}.
    let a_r = cis(-2.0 * PI * (peak.range_bin as f64 - bf / 2.0) / nf);
    let w_r = cis(2.0 * PI / (lf * nf));
    let plan_r = czt::CztPlan::new(n, k_out, w_r, a_r);
    let mut zr = ComplexGrid::zeros(k_out, m);
    for c in 0..m {
        let col = plan_r.apply(h.col(c));
        zr.col_mut(c).copy_from_slice(&col);
    }
    // Doppler: Σ_m Z_r(k,m)·e^{−j2πm(m̂ − M/2 − B/2 + p/L)/M}.
    let a_d = cis(2.0 * PI * (peak.doppler_bin as f64 - (mf + bf) / 2.0) / mf);
    let w_d = cis(-2.0 * PI / (lf * mf));
    let scale = 1.0 / (nf * mf).sqrt();
    let plan_d = czt::CztPlan::new(m, k_out, w_d, a_d);
    let mut z = ComplexGrid::zeros(k_out, k_out);
    for k in 0..k_out {
        let row = plan_d.apply(&zr.row(k));
        for (p, v) in row.into_iter().enumerate() {
            z.set(k, p, v * scale);
        }
    }
    Ok(CztZoom {
        z,
        coarse: (peak.range_bin, peak.doppler_bin),
        roi_width: roi,
        zoom_factor: l,
    })
}

/// Vertex offset of the parabola through (−1, s_m), (0, s_0), (1, s_p).
pub fn parabolic_offset(s_m: f64, s_0: f64, s_p: f64) -> f64 {
    let den = s_m + s_p - 2.0 * s_0;
    if den == 0.0 {
        0.0
    } else {
        (s_m - s_p) / (2.0 * den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedPeak {
    /// Integer CZT peak.
    pub k_star: usize,
    pub p_star: usize,
    /// Peak after optional parabolic refinement, in CZT points.
    pub k_fine: f64,
    pub p_fine: f64,
    /// Offsets from the coarse indices in bins.
    pub delta_k: f64,
    pub delta_p: f64,
    /// Fractional image bins.
    pub range_bin: f64,
    pub doppler_bin: f64,
    pub tau_s: f64,
    pub doppler_hz: f64,
    pub quadratic_applied: bool,
    /// Peak at the ROI border: no parabola neighbours.
    pub at_border: bool,
}

/// Locates the zoomed peak and maps it to physical delay and Doppler:
/// `τ̂ = (n̂ + Δk)/B` and `f̂_D = (m̂ + Δp − M/2)/(M·T)`.
pub fn refine_peak(zoom: &CztZoom, quadratic: bool, params: &DerivedParams) -> RefinedPeak {
    let (k_star, p_star, _) = zoom.z.argmax_power();
    let kz = zoom.points();
    let at_border = k_star == 0 || p_star == 0 || k_star + 1 >= kz || p_star + 1 >= kz;
    let s = |k: usize, p: usize| zoom.z.get(k, p).norm_sqr();
    let (mut k_fine, mut p_fine) = (k_star as f64, p_star as f64);
    let quadratic_applied = quadratic && !at_border;
    if quadratic_applied {
        k_fine += parabolic_offset(s(k_star - 1, p_star), s(k_star, p_star), s(k_star + 1, p_star));
        p_fine += parabolic_offset(s(k_star, p_star - 1), s(k_star, p_star), s(k_star, p_star + 1));
    }
    let half = kz as f64 / 2.0;
    let l = zoom.zoom_factor as f64;
    let delta_k = (k_fine - half) / l;
    let delta_p = (p_fine - half) / l;
    let n = params.subcarriers as f64;
    let m = params.symbols as f64;
    let range_bin = (zoom.coarse.0 as f64 + delta_k).rem_euclid(n);
    let doppler_bin = zoom.coarse.1 as f64 + delta_p;
    RefinedPeak {
        k_star,
        p_star,
        k_fine,
        p_fine,
        delta_k,
        delta_p,
        range_bin,
        doppler_bin,
        tau_s: range_bin / params.bandwidth(),
        doppler_hz: (doppler_bin - m / 2.0) / (m * params.symbol_duration),
        quadratic_applied,
        at_border,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub isi: f64,
    pub doppler: f64,
    pub window: f64,
}

impl Losses {
    pub fn total(&self) -> f64 {
        self.isi * self.doppler * self.window
    }
}

/// Peak power losses of an echo: η², the η-widened Dirichlet kernel, and
/// the window's coherent gain.
pub fn losses(tau: f64, doppler_hz: f64, window: &WindowSpec, params: &DerivedParams) -> Losses {
    let e = eta(tau, params);
    let n = params.subcarriers as f64;
    let x = PI * doppler_hz * e / params.subcarrier_spacing;
    let dop = if x.abs() < 1e-12 {
        1.0
    } else {
        (x.sin() / (n * (x / n).sin())).powi(2)
    };
    Losses {
        isi: e * e,
        doppler: dop,
        window: window.loss,
    }
}

/// Normalised 2D DTFT of H at fractional image bins (ν, μ):
/// `(1/√(NM))·Σ_{n,m} H(n,m)·e^{j2πnν/N}·e^{−j2πm(μ − M/2)/M}`.
pub fn dtft_at(h: &ComplexGrid, range_bin: f64, doppler_bin: f64) -> Complex64 {
    let (n, m) = h.shape();
    let (nf, mf) = (n as f64, m as f64);
    let wr = 2.0 * PI * range_bin / nf;
    let wd = -2.0 * PI * (doppler_bin - mf / 2.0) / mf;
    let mut acc = Complex64::new(0.0, 0.0);
    for c in 0..m {
        let s: Complex64 = h
            .col(c)
            .iter()
            .enumerate()
            .map(|(r, v)| v * cis(wr * r as f64))
            .sum();
        acc += s * cis(wd * c as f64);
    }
    acc / (nf * mf).sqrt()
}

/// Loss-compensated amplitude: `|α̃̂|² = |Z|²/(G_p·L_win·L_ISI·L_Dop)`, phase
/// taken from Z.
pub fn estimate_alpha(z_peak: Complex64, losses: &Losses, params: &DerivedParams) -> Result<Complex64> {
    let total = losses.total();
    if !(total > 0.0) {
        return Err(Error::EstimationImpossible(
            "echo lies entirely outside the receive window (zero captured fraction)".into(),
        ));
    }
    let mag = (z_peak.norm_sqr() / (params.processing_gain * total)).sqrt();
    Ok(Complex64::from_polar(mag, z_peak.arg()))
}

/// Least-squares amplitude `b^H(Y ⊙ X*)c* / (‖b‖²‖c‖²)` (conjugate steering
/// vectors project onto the target's own response).
pub fn projection_alpha(
    y: &ComplexGrid,
    x: &SymbolFrame,
    tau: f64,
    doppler_hz: f64,
    params: &DerivedParams,
) -> Result<Complex64> {
    let (n, m) = y.shape();
    if x.subcarriers() != n || x.symbols() < m {
        return Err(Error::DimensionMismatch(format!(
            "received {n}x{m} against transmit {}x{}",
            x.subcarriers(),
            x.symbols()
        )));
    }
    let b = delay_steering(tau / params.sample_period, n);
    let c = doppler_steering(doppler_hz, m, params.symbol_duration);
    let mut acc = Complex64::new(0.0, 0.0);
    for (col, cm) in c.iter().enumerate() {
        let s: Complex64 = y
            .col(col)
            .iter()
            .zip(x.data.col(col))
            .zip(&b)
            .map(|((yv, xv), bv)| bv.conj() * yv * xv.conj())
            .sum();
        acc += s * cm.conj();
    }
    Ok(acc / (n * m) as f64)
}

/// First window sample holding the current symbol for delay `tau`.
fn window_start(tau: f64, params: &DerivedParams) -> f64 {
    crate::channel::boundary_ceil(tau / params.sample_period - params.cp_length as f64).clamp(0.0, params.subcarriers as f64)
}

/// Removes the intra-symbol Doppler rotation from a measured peak phase.
///
/// Inside one demodulation window the echo rotates by `e^{j2πf_D·i·T_s}`
/// over the captured samples `i ∈ [i₀, N)`, which averages to a phase of
/// `π·f_D·T_s·(i₀ + N − 1)` at the peak. Subtracting it references θ to
/// t = 0, the convention of the sampled channel and of the reconstruction.
pub fn sw_phase_correction(theta_raw: f64, tau: f64, doppler_hz: f64, params: &DerivedParams) -> f64 {
    let i0 = window_start(tau, params);
    let n = params.subcarriers as f64;
    wrap_phase(theta_raw - PI * doppler_hz * params.sample_period * (i0 + n - 1.0))
}

pub fn wrap_phase(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Full per-target estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetEstimate {
    pub tau_s: f64,
    pub doppler_hz: f64,
    /// Phase of α̃ referenced to t = 0.
    pub theta_rad: f64,
    /// |α̃̂|
    pub alpha_mag: f64,
    pub coarse: (usize, usize),
    pub fine: (usize, usize),
    pub offsets: (f64, f64),
    pub losses: Losses,
    pub quadratic_applied: bool,
    pub at_border: bool,
    pub peak_power_w: f64,
}

impl TargetEstimate {
    /// Estimate carrying exact parameters, e.g. for cancellation bounds.
    pub fn from_derived(t: &crate::channel::TargetDerived, params: &DerivedParams) -> Self {
        let cell = crate::rxproc::RangeDopplerImage::cell_of(t.delay_s, t.doppler_hz, params);
        let window = WindowSpec::rectangular(params.subcarriers, params.symbols);
        Self {
            tau_s: t.delay_s,
            doppler_hz: t.doppler_hz,
            theta_rad: t.alpha_tilde.arg(),
            alpha_mag: t.alpha_tilde.norm(),
            coarse: cell,
            fine: cell,
            offsets: (0.0, 0.0),
            losses: losses(t.delay_s, t.doppler_hz, &window, params),
            quadratic_applied: false,
            at_border: false,
            peak_power_w: 0.0,
        }
    }

    pub fn alpha_tilde(&self) -> Complex64 {
        Complex64::from_polar(self.alpha_mag, self.theta_rad)
    }

    pub fn range_m(&self, params: &DerivedParams) -> f64 {
        params.range_from_delay(self.tau_s)
    }

    pub fn velocity_mps(&self, params: &DerivedParams) -> f64 {
        params.velocity_from_doppler(self.doppler_hz)
    }

    pub fn to_derived(&self, params: &DerivedParams) -> crate::channel::TargetDerived {
        crate::channel::TargetDerived::new(self.tau_s, self.doppler_hz, self.alpha_tilde(), params)
    }
}

/// CZT zoom, refinement, DTFT peak evaluation and loss compensation for
/// one coarse detection. With `phase_correction` the phase is referenced to
/// t = 0 (needed by reconstructions that model intra-symbol Doppler).
pub fn estimate_target(
    h: &ComplexGrid,
    peak: &CoarsePeak,
    window: &WindowSpec,
    cfg: &CztConfig,
    phase_correction: bool,
    params: &DerivedParams,
) -> Result<TargetEstimate> {
    let zoom = czt_zoom(h, peak, cfg)?;
    let fine = refine_peak(&zoom, cfg.quadratic, params);
    let z = if fine.quadratic_applied {
        dtft_at(h, fine.range_bin, fine.doppler_bin)
    } else {
        zoom.z.get(fine.k_star, fine.p_star)
    };
    let l = losses(fine.tau_s, fine.doppler_hz, window, params);
    let alpha = estimate_alpha(z, &l, params)?;
    let theta = if phase_correction {
        sw_phase_correction(alpha.arg(), fine.tau_s, fine.doppler_hz, params)
    } else {
        alpha.arg()
    };
    Ok(TargetEstimate {
        tau_s: fine.tau_s,
        doppler_hz: fine.doppler_hz,
        theta_rad: theta,
        alpha_mag: alpha.norm(),
        coarse: zoom.coarse,
        fine: (fine.k_star, fine.p_star),
        offsets: (fine.delta_k, fine.delta_p),
        losses: l,
        quadratic_applied: fine.quadratic_applied,
        at_border: fine.at_border,
        peak_power_w: z.norm_sqr(),
    })
}
