//! System parameters and everything derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_lin, dbm_to_w, lin_to_db, w_to_dbm, ROOM_TEMPERATURE, SPEED_OF_LIGHT};

/// Unambiguous range published for the 3.5 GHz reference configuration.
///
/// Kept for reports only. `c·T_d/2` evaluates to about 4985.5 m for the same
/// parameters and that is what the library uses.
pub const PUBLISHED_UNAMBIGUOUS_RANGE_M: f64 = 4914.0;

/// Static OFDM radar parameters. Powers, gains and the noise figure are
/// linear; the JSON form uses dB with unit-suffixed keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OfdmConfigFile", into = "OfdmConfigFile")]
pub struct OfdmConfig {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarriers: usize,
    pub cp_length: usize,
    pub symbols: usize,
    pub tx_power_w: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub noise_figure: f64,
    pub ambient_temperature_k: f64,
    pub tx_rx_isolation_db: f64,
    pub adc_bits: u32,
    /// Average power over squared peak amplitude of the transmit signal.
    pub papr_factor: f64,
}

impl OfdmConfig {
    /// 3.5 GHz, 200 MHz, N = 6652, N_cp = 458, M = 280 simulation setup.
    pub fn simulation_reference() -> Self {
        Self {
            carrier_frequency_hz: 3.5e9,
            bandwidth_hz: 200e6,
            subcarriers: 6652,
            cp_length: 458,
            symbols: 280,
            tx_power_w: dbm_to_w(49.0),
            tx_gain: db_to_lin(25.8),
            rx_gain: db_to_lin(25.8),
            noise_figure: db_to_lin(8.0),
            ambient_temperature_k: ROOM_TEMPERATURE,
            tx_rx_isolation_db: 60.0,
            adc_bits: 12,
            papr_factor: 0.1,
        }
    }

    /// 3.68 GHz, 500 MHz, N = 1024, N_cp = 256, M = 1024 measurement setup.
    /// Hardware figures not given for that setup reuse the simulation values.
    pub fn measurement_reference() -> Self {
        Self {
            carrier_frequency_hz: 3.68e9,
            bandwidth_hz: 500e6,
            subcarriers: 1024,
            cp_length: 256,
            symbols: 1024,
            ..Self::simulation_reference()
        }
    }

    /// Reduced frame (N = 1024, N_cp = 128, M = 64) with the simulation
    /// reference hardware, small enough for quick Monte Carlo runs.
    pub fn desk_scale() -> Self {
        Self {
            subcarriers: 1024,
            cp_length: 128,
            symbols: 64,
            ..Self::simulation_reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.subcarriers == 0 {
            return bad("subcarriers", "must be positive");
        }
        if self.symbols == 0 || !self.symbols.is_multiple_of(2) {
            return bad("symbols", "must be positive and even");
        }
        if self.cp_length >= self.subcarriers {
            return bad("cp_length", "must be smaller than the subcarrier count");
        }
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return bad("bandwidth_hz", "must be positive and finite");
        }
        if !(self.carrier_frequency_hz > self.bandwidth_hz / 2.0) || !self.carrier_frequency_hz.is_finite() {
            return bad("carrier_frequency_hz", "must exceed half the bandwidth");
        }
        if !(self.tx_power_w > 0.0) {
            return bad("tx_power", "must be positive");
        }
        if !(self.tx_gain > 0.0) || !(self.rx_gain > 0.0) {
            return bad("antenna_gain", "must be positive");
        }
        if !(self.noise_figure >= 1.0) {
            return bad("noise_figure", "must be at least 0 dB");
        }
        if !(self.ambient_temperature_k > 0.0) {
            return bad("ambient_temperature_k", "must be positive");
        }
        if self.adc_bits == 0 {
            return bad("adc_bits", "must be at least 1");
        }
        if !(self.papr_factor > 0.0) {
            return bad("papr_factor", "must be positive");
        }
        if self.tx_rx_isolation_db.is_nan() {
            return bad("tx_rx_isolation_db", "must be a number");
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// JSON representation with dB units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfigFile {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarriers: usize,
    pub cp_length: usize,
    pub symbols: usize,
    #[serde(default = "defaults::tx_power_dbm")]
    pub tx_power_dbm: f64,
    #[serde(default = "defaults::gain_dbi")]
    pub tx_gain_dbi: f64,
    #[serde(default = "defaults::gain_dbi")]
    pub rx_gain_dbi: f64,
    #[serde(default = "defaults::noise_figure_db")]
    pub noise_figure_db: f64,
    #[serde(default = "defaults::temperature_k")]
    pub ambient_temperature_k: f64,
    #[serde(default = "defaults::isolation_db")]
    pub tx_rx_isolation_db: f64,
    #[serde(default = "defaults::adc_bits")]
    pub adc_bits: u32,
    #[serde(default = "defaults::papr_factor")]
    pub papr_factor: f64,
}

mod defaults {
    pub fn tx_power_dbm() -> f64 {
        49.0
    }
    pub fn gain_dbi() -> f64 {
        25.8
    }
    pub fn noise_figure_db() -> f64 {
        8.0
    }
    pub fn temperature_k() -> f64 {
        super::ROOM_TEMPERATURE
    }
    pub fn isolation_db() -> f64 {
        60.0
    }
    pub fn adc_bits() -> u32 {
        12
    }
    pub fn papr_factor() -> f64 {
        0.1
    }
}

impl TryFrom<OfdmConfigFile> for OfdmConfig {
    type Error = Error;

    fn try_from(f: OfdmConfigFile) -> Result<Self> {
        let cfg = OfdmConfig {
            carrier_frequency_hz: f.carrier_frequency_hz,
            bandwidth_hz: f.bandwidth_hz,
            subcarriers: f.subcarriers,
            cp_length: f.cp_length,
            symbols: f.symbols,
            tx_power_w: dbm_to_w(f.tx_power_dbm),
            tx_gain: db_to_lin(f.tx_gain_dbi),
            rx_gain: db_to_lin(f.rx_gain_dbi),
            noise_figure: db_to_lin(f.noise_figure_db),
            ambient_temperature_k: f.ambient_temperature_k,
            tx_rx_isolation_db: f.tx_rx_isolation_db,
            adc_bits: f.adc_bits,
            papr_factor: f.papr_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<OfdmConfig> for OfdmConfigFile {
    fn from(c: OfdmConfig) -> Self {
        Self {
            carrier_frequency_hz: c.carrier_frequency_hz,
            bandwidth_hz: c.bandwidth_hz,
            subcarriers: c.subcarriers,
            cp_length: c.cp_length,
            symbols: c.symbols,
            tx_power_dbm: w_to_dbm(c.tx_power_w),
            tx_gain_dbi: lin_to_db(c.tx_gain),
            rx_gain_dbi: lin_to_db(c.rx_gain),
            noise_figure_db: lin_to_db(c.noise_figure),
            ambient_temperature_k: c.ambient_temperature_k,
            tx_rx_isolation_db: c.tx_rx_isolation_db,
            adc_bits: c.adc_bits,
            papr_factor: c.papr_factor,
        }
    }
}

/// Timing, resolution and range limits implied by an [`OfdmConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub subcarriers: usize,
    pub cp_length: usize,
    pub symbols: usize,
    pub subcarrier_spacing: f64,
    pub sample_period: f64,
    pub data_duration: f64,
    pub cp_duration: f64,
    pub symbol_duration: f64,
    pub wavelength: f64,
    pub isi_free_range: f64,
    pub unambiguous_range: f64,
    /// Velocity whose two-way Doppler equals 0.1·Δf.
    pub max_ici_velocity: f64,
    pub processing_gain: f64,
    /// c/(2B)
    pub range_resolution: f64,
    /// λ/(2·M·T)
    pub velocity_resolution: f64,
    /// Sliding-window shift count ⌈N/N_cp⌉ (0 when N_cp = 0).
    pub sw_shifts: usize,
}

pub fn derive_params(cfg: &OfdmConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    let n = cfg.subcarriers as f64;
    let b = cfg.bandwidth_hz;
    let ts = 1.0 / b;
    let td = n * ts;
    let tcp = cfg.cp_length as f64 * ts;
    let t = td + tcp;
    let df = b / n;
    let lambda = SPEED_OF_LIGHT / cfg.carrier_frequency_hz;
    Ok(DerivedParams {
        subcarriers: cfg.subcarriers,
        cp_length: cfg.cp_length,
        symbols: cfg.symbols,
        subcarrier_spacing: df,
        sample_period: ts,
        data_duration: td,
        cp_duration: tcp,
        symbol_duration: t,
        wavelength: lambda,
        isi_free_range: SPEED_OF_LIGHT * tcp / 2.0,
        unambiguous_range: SPEED_OF_LIGHT * td / 2.0,
        max_ici_velocity: 0.1 * df * lambda / 2.0,
        processing_gain: n * cfg.symbols as f64,
        range_resolution: SPEED_OF_LIGHT / (2.0 * b),
        velocity_resolution: lambda / (2.0 * cfg.symbols as f64 * t),
        sw_shifts: if cfg.cp_length == 0 {
            0
        } else {
            cfg.subcarriers.div_ceil(cfg.cp_length)
        },
    })
}

impl DerivedParams {
    pub fn bandwidth(&self) -> f64 {
        1.0 / self.sample_period
    }

    /// Two-way Doppler of a radial velocity.
    pub fn doppler_from_velocity(&self, v_mps: f64) -> f64 {
        2.0 * v_mps / self.wavelength
    }

    pub fn velocity_from_doppler(&self, f_d: f64) -> f64 {
        f_d * self.wavelength / 2.0
    }

    pub fn delay_from_range(&self, range_m: f64) -> f64 {
        2.0 * range_m / SPEED_OF_LIGHT
    }

    pub fn range_from_delay(&self, tau: f64) -> f64 {
        tau * SPEED_OF_LIGHT / 2.0
    }
}
