//! Joint interference cancellation with frequency-domain coherent
//! compensation.

use std::time::Instant;

use super::{
    check_frame, conventional, estimate_strong_targets, fdcc_phase, finish, merge_detections, reconstruct_fd,
    record_detections, restore_targets, DetectionStage, MitigationConfig, MitigationResult, Timings,
};
use crate::config::DerivedParams;
use crate::detect::cfar_detect;
use crate::error::Result;
use crate::grid::ComplexGrid;
use crate::rxproc::WindowSpec;
use crate::waveform::SymbolFrame;

/// `Y'_m(k) = Y_m(k) + e^{−j2πkN_cp/N}·Y_{m+1}(k)` for the first M columns.
///
/// With only M columns available the last output column has no successor
/// and is passed through; the flag in the return value reports that.
pub fn fdcc(yc: &ComplexGrid, params: &DerivedParams) -> (ComplexGrid, bool) {
    let m = params.symbols.min(yc.cols());
    let mut out = ComplexGrid::zeros(yc.rows(), m);
    let phase: Vec<_> = (0..yc.rows()).map(|k| fdcc_phase(k, params)).collect();
    for c in 0..m {
        let next = (c + 1 < yc.cols()).then(|| yc.col(c + 1));
        let dst = out.col_mut(c);
        dst.copy_from_slice(yc.col(c));
        if let Some(next) = next {
            for ((o, v), p) in dst.iter_mut().zip(next).zip(&phase) {
                *o += p * v;
            }
        }
    }
    (out, yc.cols() <= m)
}

/// JIC-CC on a demodulated frame `y` (M or M+1 columns).
///
/// Step 1 detects on the conventional image, step 2 estimates and removes
/// the detections in the frequency domain, step 3 applies FDCC and detects
/// again, step 4 restores the removed targets' shapes into the clean image.
pub fn jic_cc(
    y: &ComplexGrid,
    frame: &SymbolFrame,
    cfg: &MitigationConfig,
    params: &DerivedParams,
) -> Result<MitigationResult> {
    let started = Instant::now();
    check_frame(y, frame, params)?;
    let mut timings = Timings::default();
    let window = WindowSpec::new(cfg.window, params.subcarriers, params.symbols);

    let t = Instant::now();
    let (h0, initial) = conventional(y, frame, &window, params)?;
    let peaks = cfar_detect(&initial, &cfg.cfar)?;
    timings.detect_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut targets = estimate_strong_targets(&h0, &peaks, frame, &window, cfg, params)?;
    timings.estimate_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut yc = y.clone();
    for d in targets.iter().filter(|d| d.cancelled) {
        let y_h = reconstruct_fd(&d.estimate, frame, params, y.cols())?;
        yc -= &y_h;
    }
    timings.cancel_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (y_fdcc, omitted) = fdcc(&yc, params);
    if omitted {
        log::warn!("FDCC: no symbol after the frame, last column left uncompensated");
    }
    let (h1, mut image) = conventional(&y_fdcc, frame, &window, params)?;
    let weak = record_detections(&h1, &image, &window, cfg, DetectionStage::Weak, params)?;
    merge_detections(&mut targets, weak, params.symbols);
    timings.reprocess_s += t.elapsed().as_secs_f64();

    let mut stages = Vec::new();
    if cfg.keep_stage_images {
        stages.push(("cleaned".to_string(), image.clone()));
    }
    restore_targets(&mut image, &targets, &window, params)?;
    finish(image, targets, initial, stages, omitted, timings, cfg, started)
}
