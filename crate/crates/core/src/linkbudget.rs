//! Analytic noise, quantization and interference floors, and the resulting
//! detectability limits.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{DerivedParams, OfdmConfig};
use crate::error::{Error, Result};
use crate::units::{attenuation_db_to_amplitude, db_to_lin, kmh_to_mps, lin_to_db, BOLTZMANN};

/// How strong a target reflects: a radar cross section fed through the radar
/// equation, or a fixed amplitude factor independent of range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reflectivity {
    Rcs { rcs_m2: f64 },
    Attenuation { amplitude: f64 },
}

/// Ground-truth scene entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetEntry", into = "TargetEntry")]
pub struct TargetSpec {
    pub range_m: f64,
    /// Radial velocity; Doppler is f_D = 2v/λ.
    pub velocity_mps: f64,
    pub reflectivity: Reflectivity,
    pub phase_rad: f64,
}

impl TargetSpec {
    pub fn with_rcs_dbsm(range_m: f64, velocity_mps: f64, rcs_dbsm: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            reflectivity: Reflectivity::Rcs {
                rcs_m2: db_to_lin(rcs_dbsm),
            },
            phase_rad: 0.0,
        }
    }

    pub fn with_attenuation_db(range_m: f64, velocity_mps: f64, attenuation_db: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            reflectivity: Reflectivity::Attenuation {
                amplitude: attenuation_db_to_amplitude(attenuation_db),
            },
            phase_rad: 0.0,
        }
    }

    pub fn phase(mut self, phase_rad: f64) -> Self {
        self.phase_rad = phase_rad;
        self
    }

    pub fn rcs_m2(&self) -> Option<f64> {
        match self.reflectivity {
            Reflectivity::Rcs { rcs_m2 } => Some(rcs_m2),
            Reflectivity::Attenuation { .. } => None,
        }
    }

    pub fn validate(&self, params: &DerivedParams) -> Result<()> {
        if !(self.range_m > 0.0) || !self.range_m.is_finite() {
            return Err(Error::InvalidTarget(format!("range {} m must be positive", self.range_m)));
        }
        if self.range_m > params.unambiguous_range * (1.0 + 1e-12) {
            return Err(Error::InvalidTarget(format!(
                "range {} m exceeds the unambiguous range {:.2} m",
                self.range_m, params.unambiguous_range
            )));
        }
        if !self.velocity_mps.is_finite() || !self.phase_rad.is_finite() {
            return Err(Error::InvalidTarget("velocity and phase must be finite".into()));
        }
        match self.reflectivity {
            Reflectivity::Rcs { rcs_m2 } if !(rcs_m2 >= 0.0) => {
                Err(Error::InvalidTarget(format!("rcs {rcs_m2} m² must be non-negative")))
            }
            Reflectivity::Attenuation { amplitude } if !(amplitude >= 0.0) => {
                Err(Error::InvalidTarget(format!("amplitude {amplitude} must be non-negative")))
            }
            _ => Ok(()),
        }
    }
}

/// JSON scene entry. Exactly one of `rcs_dbsm` / `attenuation_db`, and at
/// most one of `velocity_mps` / `velocity_kmh`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    pub range_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcs_dbsm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation_db: Option<f64>,
    #[serde(default)]
    pub phase_deg: f64,
}

impl TryFrom<TargetEntry> for TargetSpec {
    type Error = Error;

    fn try_from(e: TargetEntry) -> Result<Self> {
        let velocity_mps = match (e.velocity_mps, e.velocity_kmh) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidTarget("give velocity_mps or velocity_kmh, not both".into()))
            }
            (Some(v), None) => v,
            (None, Some(v)) => kmh_to_mps(v),
            (None, None) => 0.0,
        };
        let reflectivity = match (e.rcs_dbsm, e.attenuation_db) {
            (Some(rcs), None) => Reflectivity::Rcs { rcs_m2: db_to_lin(rcs) },
            (None, Some(att)) => Reflectivity::Attenuation {
                amplitude: attenuation_db_to_amplitude(att),
            },
            _ => {
                return Err(Error::InvalidTarget(
                    "exactly one of rcs_dbsm or attenuation_db is required".into(),
                ))
            }
        };
        Ok(TargetSpec {
            range_m: e.range_m,
            velocity_mps,
            reflectivity,
            phase_rad: e.phase_deg.to_radians(),
        })
    }
}

impl From<TargetSpec> for TargetEntry {
    fn from(t: TargetSpec) -> Self {
        let (rcs_dbsm, attenuation_db) = match t.reflectivity {
            Reflectivity::Rcs { rcs_m2 } => (Some(lin_to_db(rcs_m2)), None),
            Reflectivity::Attenuation { amplitude } => (None, Some(-20.0 * amplitude.log10())),
        };
        TargetEntry {
            range_m: t.range_m,
            velocity_mps: Some(t.velocity_mps),
            velocity_kmh: None,
            rcs_dbsm,
            attenuation_db,
            phase_deg: t.phase_rad.to_degrees(),
        }
    }
}

/// Captured signal fraction of an echo with delay `tau`.
pub fn eta(tau: f64, params: &DerivedParams) -> f64 {
    (1.0 - (tau - params.cp_duration) / params.data_duration).clamp(0.0, 1.0)
}

/// |α| of a target: radar equation for an RCS, the given amplitude otherwise.
pub fn amplitude(target: &TargetSpec, cfg: &OfdmConfig, params: &DerivedParams) -> f64 {
    match target.reflectivity {
        Reflectivity::Rcs { rcs_m2 } => radar_equation_amplitude(rcs_m2, target.range_m, cfg, params),
        Reflectivity::Attenuation { amplitude } => amplitude,
    }
}

pub fn radar_equation_amplitude(rcs_m2: f64, range_m: f64, cfg: &OfdmConfig, params: &DerivedParams) -> f64 {
    let lambda = params.wavelength;
    (cfg.tx_gain * cfg.rx_gain * rcs_m2 * lambda * lambda / ((4.0 * PI).powi(3) * range_m.powi(4))).sqrt()
}

/// Echo power at the receiver, P_tx·|α|².
pub fn received_power(target: &TargetSpec, cfg: &OfdmConfig, params: &DerivedParams) -> f64 {
    cfg.tx_power_w * amplitude(target, cfg, params).powi(2)
}

/// k_B·B·T·NF
pub fn thermal_noise_power(cfg: &OfdmConfig) -> f64 {
    BOLTZMANN * cfg.bandwidth_hz * cfg.ambient_temperature_k * cfg.noise_figure
}

/// Image SNR of a target under ideal conditions.
pub fn ideal_snr(target: &TargetSpec, cfg: &OfdmConfig, params: &DerivedParams) -> Result<f64> {
    if target.rcs_m2().is_none() {
        return Err(Error::Unsupported(
            "ideal SNR needs a radar cross section, the target is defined by attenuation".into(),
        ));
    }
    Ok(received_power(target, cfg, params) * params.processing_gain / thermal_noise_power(cfg))
}

/// SQNR in dB of an `adc_bits` converter for a signal with PAPR factor `f`.
pub fn sqnr_db(adc_bits: u32, papr_factor: f64) -> f64 {
    6.02 * adc_bits as f64 + 10.0 * (3.0 * papr_factor).log10()
}

/// Quantization noise power referenced to the Tx→Rx spillover that sets the
/// ADC full scale.
pub fn quantization_floor(cfg: &OfdmConfig) -> f64 {
    let spill = cfg.tx_power_w / db_to_lin(cfg.tx_rx_isolation_db);
    spill / db_to_lin(sqnr_db(cfg.adc_bits, cfg.papr_factor))
}

/// Interference power raised by the part of an echo outside the receive
/// window. Zero for echoes inside the CP.
pub fn interference_power(target: &TargetSpec, cfg: &OfdmConfig, params: &DerivedParams) -> f64 {
    let e = eta(params.delay_from_range(target.range_m), params);
    received_power(target, cfg, params) * (1.0 - e * e)
}

/// Largest of thermal, quantization and summed interference power.
pub fn dominant_noise(cfg: &OfdmConfig, params: &DerivedParams, interferers: &[TargetSpec]) -> f64 {
    let interference: f64 = interferers.iter().map(|t| interference_power(t, cfg, params)).sum();
    thermal_noise_power(cfg).max(quantization_floor(cfg)).max(interference)
}

/// Post-processing SINR of `target` with the given interferers, using the
/// target's own radar-equation or attenuation amplitude.
pub fn actual_sinr(target: &TargetSpec, interferers: &[TargetSpec], cfg: &OfdmConfig, params: &DerivedParams) -> f64 {
    let e = eta(params.delay_from_range(target.range_m), params);
    received_power(target, cfg, params) * params.processing_gain * e * e / dominant_noise(cfg, params, interferers)
}

/// Range on the range-bin grid (bins 1..N) where a target of `rcs_m2`
/// produces the most interference power. Returns (range, power).
pub fn worst_case_interferer_range(rcs_m2: f64, cfg: &OfdmConfig, params: &DerivedParams) -> (f64, f64) {
    (1..=cfg.subcarriers)
        .map(|n| {
            let r = n as f64 * params.range_resolution;
            let t = TargetSpec {
                range_m: r,
                velocity_mps: 0.0,
                reflectivity: Reflectivity::Rcs { rcs_m2 },
                phase_rad: 0.0,
            };
            (r, interference_power(&t, cfg, params))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxRange {
    pub range_m: f64,
    /// The unambiguous range was reached before the SINR fell below threshold.
    pub capped: bool,
    /// No range satisfies the threshold.
    pub below_threshold_everywhere: bool,
}

/// Largest range at which a target of `target_rcs_m2` keeps an actual SINR at
/// or above `threshold_db`. SINR falls monotonically with range (R⁻⁴ and η²
/// both shrink, the interference floor is fixed), so bisection applies.
pub fn max_detectable_range(
    target_rcs_m2: f64,
    interferers: &[TargetSpec],
    threshold_db: f64,
    cfg: &OfdmConfig,
    params: &DerivedParams,
) -> Result<MaxRange> {
    if !(threshold_db > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold_db} dB must be positive")));
    }
    let thr = db_to_lin(threshold_db);
    let sinr_at = |r: f64| {
        let t = TargetSpec {
            range_m: r,
            velocity_mps: 0.0,
            reflectivity: Reflectivity::Rcs { rcs_m2: target_rcs_m2 },
            phase_rad: 0.0,
        };
        actual_sinr(&t, interferers, cfg, params)
    };
    let r_max = params.unambiguous_range;
    if sinr_at(r_max) >= thr {
        return Ok(MaxRange {
            range_m: r_max,
            capped: true,
            below_threshold_everywhere: false,
        });
    }
    let mut lo = 1e-3;
    if sinr_at(lo) < thr {
        return Ok(MaxRange {
            range_m: 0.0,
            capped: false,
            below_threshold_everywhere: true,
        });
    }
    let mut hi = r_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sinr_at(mid) >= thr {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * r_max {
            break;
        }
    }
    Ok(MaxRange {
        range_m: lo,
        capped: false,
        below_threshold_everywhere: false,
    })
}

/// Average power over squared peak amplitude of a sampled signal.
pub fn papr_factor_from_signal(samples: &[Complex64]) -> f64 {
    let peak = samples.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let mean = samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64;
    mean / peak
}

/// Floors and per-target figures for a scene.
#[derive(Debug, Clone, Serialize)]
pub struct LinkBudgetReport {
    pub thermal_noise_power: f64,
    pub quantization_noise_power: f64,
    pub interference_power_per_target: Vec<f64>,
    pub dominant_noise: f64,
    /// `None` for attenuation-defined targets.
    pub ideal_snr: Vec<Option<f64>>,
    pub actual_sinr: Vec<f64>,
    /// `None` for attenuation-defined targets.
    pub max_detectable_range: Vec<Option<MaxRange>>,
}

impl LinkBudgetReport {
    /// Every target contributes its interference to the common floor; the
    /// maximum range of a target is computed with all other targets as
    /// interferers.
    pub fn compute(
        targets: &[TargetSpec],
        threshold_db: f64,
        cfg: &OfdmConfig,
        params: &DerivedParams,
    ) -> Result<Self> {
        for t in targets {
            t.validate(params)?;
        }
        let interference_power_per_target = targets.iter().map(|t| interference_power(t, cfg, params)).collect();
        let mut max_range = Vec::with_capacity(targets.len());
        for (i, t) in targets.iter().enumerate() {
            max_range.push(match t.rcs_m2() {
                Some(rcs) => {
                    let others: Vec<TargetSpec> =
                        targets.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, o)| *o).collect();
                    Some(max_detectable_range(rcs, &others, threshold_db, cfg, params)?)
                }
                None => None,
            });
        }
        Ok(Self {
            thermal_noise_power: thermal_noise_power(cfg),
            quantization_noise_power: quantization_floor(cfg),
            interference_power_per_target,
            dominant_noise: dominant_noise(cfg, params, targets),
            ideal_snr: targets.iter().map(|t| ideal_snr(t, cfg, params).ok()).collect(),
            actual_sinr: targets.iter().map(|t| actual_sinr(t, targets, cfg, params)).collect(),
            max_detectable_range: max_range,
        })
    }
}
