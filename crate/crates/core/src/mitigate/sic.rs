//! Iterative cancel-then-detect baseline with projection amplitude
//! estimates on the FFT grid.
//!
//! Each tracked target's ISI and ICI terms (the frame model minus its
//! interference-free part) are removed, so its own full-energy response
//! stays in the image. Amplitudes are re-projected on every residual, which
//! converges geometrically with ratio 1 − η for a target with captured
//! fraction η.

use num_complex::Complex64;
use std::time::Instant;

use super::{check_frame, finish, DetectedTarget, DetectionStage, MitigationConfig, MitigationResult, Timings};
use crate::channel::{delay_steering, doppler_steering, model_received_frame_fd, DopplerModel, TargetDerived};
use crate::config::DerivedParams;
use crate::detect::cfar_detect;
use crate::error::{Error, Result};
use crate::estimate::{losses, projection_alpha, TargetEstimate};
use crate::grid::ComplexGrid;
use crate::rxproc::{equalize_and_window, image_metrics, range_doppler_image, RangeDopplerImage, WindowSpec};
use crate::waveform::SymbolFrame;

#[derive(Debug, Clone, Copy)]
struct Tracked {
    cell: (usize, usize),
    tau: f64,
    doppler: f64,
    alpha: Complex64,
    iteration: usize,
    peak_w: f64,
}

/// ISI and ICI part of one target's frame: model minus `α̃·c_m·b⊙X_m`.
fn interference_terms(frame: &SymbolFrame, t: &TargetDerived, params: &DerivedParams) -> Result<ComplexGrid> {
    let m = params.symbols;
    let mut y = model_received_frame_fd(frame, &[*t], params, DopplerModel::PerSymbol, m)?;
    let b = delay_steering(t.delay_samples, params.subcarriers);
    let c = doppler_steering(t.doppler_hz, m, params.symbol_duration);
    for (col, cm) in c.iter().enumerate() {
        let g = t.alpha_tilde * cm;
        for ((o, bv), xv) in y.col_mut(col).iter_mut().zip(&b).zip(frame.data.col(col)) {
            *o -= g * bv * xv;
        }
    }
    Ok(y)
}

fn residual(y: &ComplexGrid, frame: &SymbolFrame, tracked: &[Tracked], params: &DerivedParams) -> Result<ComplexGrid> {
    let mut r = y.clone();
    for t in tracked {
        if t.tau / params.sample_period <= params.cp_length as f64 {
            continue;
        }
        let d = TargetDerived::new(t.tau, t.doppler, t.alpha, params);
        r -= &interference_terms(frame, &d, params)?;
    }
    Ok(r)
}

/// SIC with `cfg.sic_iterations` passes, always without windowing.
///
/// A pass accepts a CFAR detection only when it also clears the image floor
/// by `cfg.sic_threshold_db`. Tracked targets keep their interference-free
/// response, so the final image needs no restoration step.
pub fn sic_baseline(
    y: &ComplexGrid,
    frame: &SymbolFrame,
    cfg: &MitigationConfig,
    params: &DerivedParams,
) -> Result<MitigationResult> {
    let started = Instant::now();
    if cfg.sic_iterations == 0 {
        return Err(Error::InvalidParameter("SIC needs at least one iteration".into()));
    }
    check_frame(y, frame, params)?;
    let (n, m) = (params.subcarriers, params.symbols);
    let y = y.leading_columns(m)?;
    let window = WindowSpec::rectangular(n, m);
    let mut timings = Timings::default();
    let mut tracked: Vec<Tracked> = Vec::new();
    let mut res = y.clone();
    let mut initial: Option<RangeDopplerImage> = None;
    let bin_doppler = |d: usize| (d as f64 - (m / 2) as f64) / (m as f64 * params.symbol_duration);
    for it in 0..cfg.sic_iterations {
        let t = Instant::now();
        let h = equalize_and_window(&res, frame, &window)?;
        let img = range_doppler_image(&h, params)?;
        let cells: Vec<(usize, usize)> = tracked.iter().map(|t| t.cell).collect();
        let floor = image_metrics(&img, &cells, cfg.cfar.guard)?.floor_w;
        let thr = floor * 10f64.powf(cfg.sic_threshold_db / 10.0);
        for p in cfar_detect(&img, &cfg.cfar)? {
            let cell = (p.range_bin, p.doppler_bin);
            if p.power_w < thr || tracked.iter().any(|t| super::same_cell(t.cell, cell, m)) {
                continue;
            }
            tracked.push(Tracked {
                cell,
                tau: cell.0 as f64 * params.sample_period,
                doppler: bin_doppler(cell.1),
                alpha: Complex64::new(0.0, 0.0),
                iteration: it,
                peak_w: p.power_w,
            });
        }
        if initial.is_none() {
            initial = Some(img);
        }
        timings.detect_s += t.elapsed().as_secs_f64();
        let t = Instant::now();
        for tr in &mut tracked {
            tr.alpha = projection_alpha(&res, frame, tr.tau, tr.doppler, params)?;
        }
        timings.estimate_s += t.elapsed().as_secs_f64();
        let t = Instant::now();
        res = residual(&y, frame, &tracked, params)?;
        timings.cancel_s += t.elapsed().as_secs_f64();
    }
    let t = Instant::now();
    let h = equalize_and_window(&res, frame, &window)?;
    let image = range_doppler_image(&h, params)?;
    timings.reprocess_s += t.elapsed().as_secs_f64();
    let targets = tracked
        .iter()
        .map(|tr| DetectedTarget {
            estimate: TargetEstimate {
                tau_s: tr.tau,
                doppler_hz: tr.doppler,
                theta_rad: tr.alpha.arg(),
                alpha_mag: tr.alpha.norm(),
                coarse: tr.cell,
                fine: tr.cell,
                offsets: (0.0, 0.0),
                losses: losses(tr.tau, tr.doppler, &window, params),
                quadratic_applied: false,
                at_border: false,
                peak_power_w: tr.peak_w,
            },
            stage: if tr.iteration == 0 {
                DetectionStage::Initial
            } else {
                DetectionStage::Iteration { iteration: tr.iteration }
            },
            cell: tr.cell,
            cancelled: tr.tau / params.sample_period > params.cp_length as f64,
        })
        .collect();
    let initial = initial.expect("at least one iteration ran");
    finish(image, targets, initial, Vec::new(), false, timings, cfg, started)
}
