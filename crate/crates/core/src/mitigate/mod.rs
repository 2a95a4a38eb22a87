//! Interference cancellation for targets beyond the CP: JIC-CC (frequency
//! domain cancellation plus FDCC), FR-SW (time domain cancellation plus
//! sliding-window stitching) and an iterative SIC baseline.

pub mod fr_sw;
pub mod jic_cc;
pub mod sic;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

use crate::channel::{add_echo_time, delay_steering, doppler_steering, model_received_frame_fd, DopplerModel};
use crate::config::{DerivedParams, OfdmConfig};
use crate::detect::{cfar_detect, CfarConfig, CoarsePeak};
use crate::error::{Error, Result};
use crate::estimate::{dtft_at, estimate_target, CztConfig, TargetEstimate};
use crate::fft::cis;
use crate::grid::ComplexGrid;
use crate::rxproc::{
    demodulate, equalize_and_window, image_metrics, range_doppler_image, RangeDopplerImage, WindowKind, WindowSpec,
};
use crate::units::w_to_dbm;
use crate::waveform::{SymbolFrame, TimeSignal};

pub use fr_sw::{fr_sw, SwShiftPlan};
pub use jic_cc::{fdcc, jic_cc};
pub use sic::sic_baseline;

/// Processing settings shared by the mitigation algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    pub window: WindowKind,
    pub cfar: CfarConfig,
    pub czt: CztConfig,
    /// SIC iterations.
    pub sic_iterations: usize,
    /// SIC declares a detection only when the peak also clears the image
    /// floor by this many dB.
    pub sic_threshold_db: f64,
    /// Keep per-stage images (initial, cleaned, FR-SW auxiliaries).
    pub keep_stage_images: bool,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        Self {
            window: WindowKind::Rectangular,
            cfar: CfarConfig::default(),
            czt: CztConfig::default(),
            sic_iterations: 15,
            sic_threshold_db: 17.0,
            keep_stage_images: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "stage")]
pub enum DetectionStage {
    /// Conventional image of the received frame.
    Initial,
    /// Cleaned image after cancellation (FDCC image for JIC-CC).
    Weak,
    /// FR-SW auxiliary image of shift `shift`.
    Auxiliary { shift: usize },
    /// SIC iteration.
    Iteration { iteration: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectedTarget {
    pub estimate: TargetEstimate,
    pub stage: DetectionStage,
    /// Absolute (range, Doppler) cell in the final image.
    pub cell: (usize, usize),
    /// Its echo was reconstructed and removed.
    pub cancelled: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub detect_s: f64,
    pub estimate_s: f64,
    pub cancel_s: f64,
    pub reprocess_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct MitigationResult {
    pub image: RangeDopplerImage,
    pub targets: Vec<DetectedTarget>,
    /// Conventional image of the input.
    pub initial_image: RangeDopplerImage,
    /// Named intermediate images when requested.
    pub stage_images: Vec<(String, RangeDopplerImage)>,
    /// Median floor of the final image away from detections.
    pub floor_w: f64,
    pub floor_dbm: f64,
    /// FDCC had no symbol after the frame and skipped the last column.
    pub fdcc_last_column_omitted: bool,
    pub timings: Timings,
}

impl MitigationResult {
    pub fn initial_targets(&self) -> impl Iterator<Item = &DetectedTarget> {
        self.targets.iter().filter(|t| t.stage == DetectionStage::Initial)
    }

    /// A detection within one range and one Doppler bin of `cell`.
    pub fn detected_near(&self, cell: (usize, usize)) -> Option<&DetectedTarget> {
        let m = self.image.doppler_bins();
        self.targets.iter().find(|t| same_cell(t.cell, cell, m))
    }
}

/// Processing chain applied to a received signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Conventional,
    JicCc,
    FrSw,
    Sic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Conventional, Algorithm::JicCc, Algorithm::FrSw, Algorithm::Sic];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Conventional => "conventional",
            Algorithm::JicCc => "jic_cc",
            Algorithm::FrSw => "fr_sw",
            Algorithm::Sic => "sic",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Runs `alg` on the received samples `y`.
///
/// JIC-CC demodulates one symbol past the frame when `frame` carries it;
/// the conventional chain records its CFAR detections as estimates.
pub fn run_algorithm(
    alg: Algorithm,
    y: &TimeSignal,
    frame: &SymbolFrame,
    sys: &OfdmConfig,
    cfg: &MitigationConfig,
    params: &DerivedParams,
) -> Result<MitigationResult> {
    let m = params.symbols;
    match alg {
        Algorithm::Conventional => {
            let started = Instant::now();
            let window = WindowSpec::new(cfg.window, params.subcarriers, m);
            let (h, image) = conventional(&demodulate(y, 0, m)?, frame, &window, params)?;
            let targets = record_detections(&h, &image, &window, cfg, DetectionStage::Initial, params)?;
            let timings = Timings {
                detect_s: started.elapsed().as_secs_f64(),
                ..Timings::default()
            };
            finish(image.clone(), targets, image, Vec::new(), false, timings, cfg, started)
        }
        Algorithm::JicCc => {
            let cols = if frame.symbols() > m { m + 1 } else { m };
            jic_cc(&demodulate(y, 0, cols)?, frame, cfg, params)
        }
        Algorithm::FrSw => fr_sw(y, frame, sys, cfg, params),
        Algorithm::Sic => sic_baseline(&demodulate(y, 0, m)?, frame, cfg, params),
    }
}

/// Cells within one range bin and one (wrapped) Doppler bin.
pub fn same_cell(a: (usize, usize), b: (usize, usize), doppler_bins: usize) -> bool {
    let dd = a.1.abs_diff(b.1);
    a.0.abs_diff(b.0) <= 1 && dd.min(doppler_bins - dd) <= 1
}

/// Zero-forcing equalisation, windowing and image formation over the first
/// M columns of `y`.
pub fn conventional(
    y: &ComplexGrid,
    frame: &SymbolFrame,
    window: &WindowSpec,
    params: &DerivedParams,
) -> Result<(ComplexGrid, RangeDopplerImage)> {
    let y = if y.cols() > params.symbols {
        y.leading_columns(params.symbols)?
    } else {
        y.clone()
    };
    let h = equalize_and_window(&y, frame, window)?;
    let img = range_doppler_image(&h, params)?;
    Ok((h, img))
}

/// Frequency-domain echo of one estimate, `out_cols` columns.
pub fn reconstruct_fd(
    est: &TargetEstimate,
    frame: &SymbolFrame,
    params: &DerivedParams,
    out_cols: usize,
) -> Result<ComplexGrid> {
    model_received_frame_fd(frame, &[est.to_derived(params)], params, DopplerModel::IntraSymbol, out_cols)
}

/// Sampled echo `α̂·x(nT_s − τ̂)·e^{j2πf̂_D nT_s}` of one estimate.
pub fn reconstruct_td(est: &TargetEstimate, tx: &TimeSignal, tx_power_w: f64, params: &DerivedParams) -> TimeSignal {
    let mut out = TimeSignal::zeros_like(tx);
    add_echo_time(tx, &est.to_derived(params), tx_power_w, &mut out.samples);
    out
}

/// Interference-free equalised response `α̂·b(τ̂)·c(f̂_D)ᵀ ⊙ W` of the given
/// estimates, summed.
pub fn target_shape(estimates: &[&TargetEstimate], window: &WindowSpec, params: &DerivedParams) -> ComplexGrid {
    let (n, m) = (params.subcarriers, params.symbols);
    let mut h = ComplexGrid::zeros(n, m);
    for est in estimates {
        let b = delay_steering(est.tau_s / params.sample_period, n);
        let c = doppler_steering(est.doppler_hz, m, params.symbol_duration);
        let a = est.alpha_tilde();
        for (col, cm) in c.iter().enumerate() {
            let g = a * cm * window.w_d[col];
            for ((o, bv), wr) in h.col_mut(col).iter_mut().zip(&b).zip(&window.w_r) {
                *o += g * bv * wr;
            }
        }
    }
    h
}

/// Adds the image of the cancelled targets' interference-free shape.
pub fn restore_targets(
    image: &mut RangeDopplerImage,
    targets: &[DetectedTarget],
    window: &WindowSpec,
    params: &DerivedParams,
) -> Result<()> {
    let cancelled: Vec<&TargetEstimate> = targets.iter().filter(|t| t.cancelled).map(|t| &t.estimate).collect();
    if cancelled.is_empty() {
        return Ok(());
    }
    let shape = range_doppler_image(&target_shape(&cancelled, window, params), params)?;
    image.data += &shape.data;
    Ok(())
}

/// Step shared by JIC-CC and FR-SW: estimates the initial detections one
/// at a time on a running residual, strongest first.
///
/// Each estimate's equalised reconstruction is subtracted before the next
/// detection is examined. A detection whose cell power fell by more than
/// [`LEAKAGE_DROP_DB`] was leakage of a stronger target (sidelobe or ISI
/// spike): it is kept in the list but not cancelled.
pub const LEAKAGE_DROP_DB: f64 = 6.0;

pub fn estimate_strong_targets(
    h0: &ComplexGrid,
    peaks: &[CoarsePeak],
    frame: &SymbolFrame,
    window: &WindowSpec,
    cfg: &MitigationConfig,
    params: &DerivedParams,
) -> Result<Vec<DetectedTarget>> {
    if peaks.is_empty() {
        return Ok(Vec::new());
    }
    let keep = 10f64.powf(-LEAKAGE_DROP_DB / 10.0);
    let mut h_res = h0.clone();
    let mut out = Vec::with_capacity(peaks.len());
    for (i, peak) in peaks.iter().enumerate() {
        let cell = (peak.range_bin, peak.doppler_bin);
        let residual = dtft_at(&h_res, cell.0 as f64, cell.1 as f64).norm_sqr();
        let live = i == 0 || residual >= keep * peak.power_w;
        let est = estimate_target(&h_res, peak, window, &cfg.czt, true, params)?;
        if live {
            let y_h = reconstruct_fd(&est, frame, params, params.symbols)?;
            let h_h = equalize_and_window(&y_h, frame, window)?;
            h_res -= &h_h;
        } else {
            log::debug!("detection at {cell:?} is leakage, left in place");
        }
        out.push(DetectedTarget {
            estimate: est,
            stage: DetectionStage::Initial,
            cell,
            cancelled: live,
        });
    }
    Ok(out)
}

/// Appends `new` detections that do not repeat a cell already listed.
pub fn merge_detections(list: &mut Vec<DetectedTarget>, new: Vec<DetectedTarget>, doppler_bins: usize) {
    for t in new {
        if !list.iter().any(|o| same_cell(o.cell, t.cell, doppler_bins)) {
            list.push(t);
        }
    }
}

/// Floor of `image` away from the listed detections.
pub fn residual_floor(image: &RangeDopplerImage, targets: &[DetectedTarget], cfar: &CfarConfig) -> Result<f64> {
    let cells: Vec<(usize, usize)> = targets.iter().map(|t| t.cell).collect();
    Ok(image_metrics(image, &cells, cfar.guard)?.floor_w)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    image: RangeDopplerImage,
    targets: Vec<DetectedTarget>,
    initial_image: RangeDopplerImage,
    stage_images: Vec<(String, RangeDopplerImage)>,
    fdcc_last_column_omitted: bool,
    mut timings: Timings,
    cfg: &MitigationConfig,
    started: Instant,
) -> Result<MitigationResult> {
    let floor_w = residual_floor(&image, &targets, &cfg.cfar)?;
    timings.total_s = started.elapsed().as_secs_f64();
    Ok(MitigationResult {
        image,
        targets,
        initial_image,
        stage_images,
        floor_w,
        floor_dbm: w_to_dbm(floor_w),
        fdcc_last_column_omitted,
        timings,
    })
}

/// Detections of `image` turned into estimates on `h` without cancellation.
pub(crate) fn record_detections(
    h: &ComplexGrid,
    image: &RangeDopplerImage,
    window: &WindowSpec,
    cfg: &MitigationConfig,
    stage: DetectionStage,
    params: &DerivedParams,
) -> Result<Vec<DetectedTarget>> {
    let peaks = cfar_detect(image, &cfg.cfar)?;
    peaks
        .iter()
        .map(|p| {
            Ok(DetectedTarget {
                estimate: estimate_target(h, p, window, &cfg.czt, false, params)?,
                stage,
                cell: (p.range_bin, p.doppler_bin),
                cancelled: false,
            })
        })
        .collect()
}

pub(crate) fn check_frame(y: &ComplexGrid, frame: &SymbolFrame, params: &DerivedParams) -> Result<()> {
    if y.rows() != params.subcarriers || y.cols() < params.symbols || y.cols() > params.symbols + 1 {
        return Err(Error::DimensionMismatch(format!(
            "received frame {}x{} for N = {}, M = {}",
            y.rows(),
            y.cols(),
            params.subcarriers,
            params.symbols
        )));
    }
    if frame.subcarriers() != params.subcarriers || frame.symbols() < y.cols() {
        return Err(Error::DimensionMismatch(format!(
            "transmit frame {}x{} for a {}-column receive frame",
            frame.subcarriers(),
            frame.symbols(),
            y.cols()
        )));
    }
    Ok(())
}

/// e^{−j2πkN_cp/N}: the FDCC alignment of the next symbol.
pub(crate) fn fdcc_phase(k: usize, params: &DerivedParams) -> Complex64 {
    cis(-2.0 * PI * (k * params.cp_length) as f64 / params.subcarriers as f64)
}
