//! Full-reconstruction sliding window: time-domain cancellation followed by
//! stitching of ISI-free segments from shifted receive windows.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::Instant;

use super::{
    conventional, estimate_strong_targets, finish, merge_detections, restore_targets, DetectedTarget,
    DetectionStage, MitigationConfig, MitigationResult, Timings,
};
use crate::channel::add_echo_time;
use crate::config::{DerivedParams, OfdmConfig};
use crate::detect::cfar_detect;
use crate::error::{Error, Result};
use crate::estimate::{estimate_target, wrap_phase};
use crate::grid::ComplexGrid;
use crate::rxproc::{demodulate, RangeDopplerImage, WindowSpec};
use crate::waveform::{synthesize_time_signal, SymbolFrame, TimeSignal};

/// Window shifts of the stitching loop and the rows each one contributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SwShiftPlan {
    pub cp_length: usize,
    /// Segment length per shift; shift `s` fills rows `[s·N_cp, s·N_cp + len)`.
    pub segments: Vec<usize>,
}

impl SwShiftPlan {
    pub fn new(subcarriers: usize, cp_length: usize) -> Result<Self> {
        if cp_length == 0 || cp_length > subcarriers {
            return Err(Error::InvalidConfig {
                field: "cp_length",
                reason: format!("sliding window needs 1 ≤ N_cp ≤ N, got {cp_length}"),
            });
        }
        let shifts = subcarriers.div_ceil(cp_length);
        let segments = (0..shifts)
            .map(|s| cp_length.min(subcarriers - s * cp_length))
            .collect();
        Ok(Self { cp_length, segments })
    }

    pub fn shifts(&self) -> usize {
        self.segments.len()
    }

    pub fn start(&self, s: usize) -> usize {
        s * self.cp_length
    }
}

/// FR-SW on the received samples `y`. `frame` is the transmitted data (its
/// first M columns are the reference), `cfg_sys` supplies the transmit
/// power needed to re-synthesise echoes.
pub fn fr_sw(
    y: &TimeSignal,
    frame: &SymbolFrame,
    cfg_sys: &OfdmConfig,
    cfg: &MitigationConfig,
    params: &DerivedParams,
) -> Result<MitigationResult> {
    let started = Instant::now();
    let mut timings = Timings::default();
    let (n, m) = (params.subcarriers, params.symbols);
    let plan = SwShiftPlan::new(n, params.cp_length)?;
    let window = WindowSpec::new(cfg.window, n, m);

    let t = Instant::now();
    let y0 = demodulate(y, 0, m)?;
    let (h0, initial) = conventional(&y0, frame, &window, params)?;
    let peaks = cfar_detect(&initial, &cfg.cfar)?;
    timings.detect_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut targets = estimate_strong_targets(&h0, &peaks, frame, &window, cfg, params)?;
    timings.estimate_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let tx = synthesize_time_signal(frame, cfg_sys)?;
    if tx.len() > y.len() {
        return Err(Error::SignalTooShort {
            needed: tx.len(),
            available: y.len(),
        });
    }
    let mut clean = y.clone();
    let mut echo = vec![num_complex::Complex64::new(0.0, 0.0); y.len()];
    for d in targets.iter().filter(|d| d.cancelled) {
        add_echo_time(&tx, &d.estimate.to_derived(params), cfg_sys.tx_power_w, &mut echo);
    }
    for (c, e) in clean.samples.iter_mut().zip(&echo) {
        *c -= e;
    }
    timings.cancel_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let aux: Vec<(ComplexGrid, Vec<DetectedTarget>, Option<RangeDopplerImage>)> = (0..plan.shifts())
        .into_par_iter()
        .map(|s| -> Result<_> {
            let shift = plan.start(s);
            let ys = demodulate(&clean, shift, m)?;
            let (h, img) = conventional(&ys, frame, &window, params)?;
            let len = plan.segments[s];
            let mut found = Vec::new();
            for p in cfar_detect(&img, &cfg.cfar)?.iter().filter(|p| p.range_bin < len) {
                let mut est = estimate_target(&h, p, &window, &cfg.czt, true, params)?;
                let mut bins = est.tau_s / params.sample_period;
                if bins > n as f64 / 2.0 {
                    bins -= n as f64;
                }
                est.tau_s = (bins + shift as f64) * params.sample_period;
                // The shifted window starts s·N_cp samples later in time.
                est.theta_rad = wrap_phase(est.theta_rad - 2.0 * PI * est.doppler_hz * shift as f64 * params.sample_period);
                est.coarse = (p.range_bin + shift, p.doppler_bin);
                found.push(DetectedTarget {
                    estimate: est,
                    stage: DetectionStage::Auxiliary { shift: s },
                    cell: (p.range_bin + shift, p.doppler_bin),
                    cancelled: false,
                });
            }
            let mut rows = ComplexGrid::zeros(len, m);
            for c in 0..m {
                rows.col_mut(c).copy_from_slice(&img.data.col(c)[..len]);
            }
            Ok((rows, found, cfg.keep_stage_images.then_some(img)))
        })
        .collect::<Result<_>>()?;

    let mut image = RangeDopplerImage {
        data: ComplexGrid::zeros(n, m),
        ..initial.clone()
    };
    let mut stages = Vec::new();
    for (s, (rows, found, img)) in aux.into_iter().enumerate() {
        let r0 = plan.start(s);
        for c in 0..m {
            image.data.col_mut(c)[r0..r0 + rows.rows()].copy_from_slice(rows.col(c));
        }
        merge_detections(&mut targets, found, m);
        if let Some(img) = img {
            stages.push((format!("aux_{s}"), img));
        }
    }
    timings.reprocess_s += t.elapsed().as_secs_f64();

    restore_targets(&mut image, &targets, &window, params)?;
    finish(image, targets, initial, stages, false, timings, cfg, started)
}
