//! Scene files: a system configuration, a target list and processing
//! settings, simulated once and processed by each selected algorithm.

use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel_time, targets_derived};
use crate::config::{derive_params, DerivedParams, OfdmConfig, OfdmConfigFile};
use crate::error::{Error, Result};
use crate::experiments::{derive_seed, Check};
use crate::linkbudget::{received_power, thermal_noise_power, TargetEntry, TargetSpec};
use crate::mitigate::{run_algorithm, Algorithm, MitigationConfig, MitigationResult};
use crate::rxproc::{image_metrics, RangeDopplerImage, WindowKind, WindowSpec};
use crate::units::{dbm_to_w, w_to_dbm};
use crate::waveform::{generate_data_frame, synthesize_time_signal};

/// Receiver noise of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// k_B·B·T·NF from the configuration.
    Thermal,
    /// Noiseless simulation.
    None,
    /// Fixed noise power per sample.
    PowerDbm(f64),
}

impl NoiseSpec {
    pub fn power_w(&self, cfg: &OfdmConfig) -> f64 {
        match *self {
            NoiseSpec::Thermal => thermal_noise_power(cfg),
            NoiseSpec::None => 0.0,
            NoiseSpec::PowerDbm(p) => dbm_to_w(p),
        }
    }
}

fn thermal() -> NoiseSpec {
    NoiseSpec::Thermal
}

/// JSON scene file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub config: OfdmConfigFile,
    #[serde(default)]
    pub targets: Vec<TargetEntry>,
    #[serde(default = "thermal")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    /// Algorithms to run; empty runs all of them.
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub processing: MitigationConfig,
}

impl ScenarioFile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(s)?;
        file.resolve()?;
        Ok(file)
    }

    /// Validated system configuration and target list.
    pub fn resolve(&self) -> Result<(OfdmConfig, DerivedParams, Vec<TargetSpec>)> {
        let cfg = OfdmConfig::try_from(self.config.clone())?;
        let params = derive_params(&cfg)?;
        let targets = self
            .targets
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let at = |err: Error| match err {
                    Error::InvalidTarget(msg) => Error::InvalidTarget(format!("targets[{i}]: {msg}")),
                    other => Error::InvalidTarget(format!("targets[{i}]: {other}")),
                };
                let t = TargetSpec::try_from(e.clone()).map_err(at)?;
                t.validate(&params).map_err(at)?;
                Ok(t)
            })
            .collect::<Result<_>>()?;
        if let NoiseSpec::PowerDbm(p) = self.noise {
            if !p.is_finite() {
                return Err(Error::InvalidParameter(format!("noise power {p} dBm")));
            }
        }
        self.processing.cfar.validate()?;
        self.processing.czt.validate()?;
        Ok((cfg, params, targets))
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        if self.algorithms.is_empty() {
            Algorithm::ALL.to_vec()
        } else {
            self.algorithms.clone()
        }
    }

    /// Six-target measurement scene: N = 1024, N_cp = 256, M = 1024 at
    /// 3.68 GHz and 500 MHz, targets at 72 to 240 m with 0 or 50 dB
    /// attenuation, ±220 km/h on two of them, Chebyshev 60 dB window and
    /// zoom factor 100.
    ///
    /// The receiver noise is set so the strongest echo peaks
    /// [`MEASUREMENT_SCENE_SNR_DB`] above the image floor.
    pub fn measurement_scene() -> Result<Self> {
        let cfg = OfdmConfig::measurement_reference();
        let params = derive_params(&cfg)?;
        let rows = [
            (72.0, 0.0, 0.0),
            (150.0, -220.0, 0.0),
            (162.0, 220.0, 0.0),
            (222.0, 0.0, 50.0),
            (228.0, 0.0, 50.0),
            (240.0, 0.0, 0.0),
        ];
        let targets: Vec<TargetEntry> = rows
            .iter()
            .enumerate()
            .map(|(i, &(range_m, v, att))| TargetEntry {
                range_m,
                velocity_mps: None,
                velocity_kmh: Some(v),
                rcs_dbsm: None,
                attenuation_db: Some(att),
                phase_deg: 40.0 * i as f64,
            })
            .collect();
        let window = WindowKind::Chebyshev { sidelobe_db: 60.0 };
        let loss = WindowSpec::new(window, params.subcarriers, params.symbols).loss;
        let strongest = TargetSpec::with_attenuation_db(72.0, 0.0, 0.0);
        let peak = received_power(&strongest, &cfg, &params) * params.processing_gain * loss;
        let mut processing = MitigationConfig {
            window,
            ..MitigationConfig::default()
        };
        processing.cfar.pfa = 1e-6;
        Ok(Self {
            config: cfg.into(),
            targets,
            noise: NoiseSpec::PowerDbm(w_to_dbm(peak) - MEASUREMENT_SCENE_SNR_DB),
            seed: 11,
            algorithms: Vec::new(),
            processing,
        })
    }
}

/// Image SNR of the 0 dB-attenuation echoes in [`ScenarioFile::measurement_scene`].
pub const MEASUREMENT_SCENE_SNR_DB: f64 = 80.0;

/// Indices of the 50 dB targets in [`ScenarioFile::measurement_scene`].
pub const MEASUREMENT_SCENE_WEAK: [usize; 2] = [3, 4];

/// How one algorithm saw one ground-truth target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthMetric {
    pub index: usize,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub cell: (usize, usize),
    pub peak_dbm: f64,
    pub sinr_db: f64,
    pub detected: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub algorithm: Algorithm,
    pub result: MitigationResult,
    pub truth: Vec<TruthMetric>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub config: OfdmConfig,
    pub params: DerivedParams,
    pub targets: Vec<TargetSpec>,
    pub seed: u64,
    pub noise_dbm: f64,
    pub runs: Vec<ScenarioRun>,
}

impl ScenarioOutcome {
    pub fn run_of(&self, alg: Algorithm) -> Option<&ScenarioRun> {
        self.runs.iter().find(|r| r.algorithm == alg)
    }
}

/// Simulates the scene once and runs each selected algorithm on it.
/// `seed` overrides the file's seed.
pub fn run_scenario(file: &ScenarioFile, algorithms: &[Algorithm], seed: Option<u64>) -> Result<ScenarioOutcome> {
    let (cfg, params, targets) = file.resolve()?;
    let seed = seed.unwrap_or(file.seed);
    let frame = generate_data_frame(&cfg, derive_seed(seed, 0), true);
    let tx = synthesize_time_signal(&frame, &cfg)?;
    let truth = targets_derived(&targets, &cfg, &params)?;
    let noise = file.noise.power_w(&cfg);
    let y = apply_channel_time(&tx, &truth, cfg.tx_power_w, noise, derive_seed(seed, 1))?;
    let cells: Vec<(usize, usize)> = truth
        .iter()
        .map(|t| RangeDopplerImage::cell_of(t.delay_s, t.doppler_hz, &params))
        .collect();
    let mut runs = Vec::with_capacity(algorithms.len());
    for &alg in algorithms {
        log::info!("running {alg}");
        let result = run_algorithm(alg, &y, &frame, &cfg, &file.processing, &params)?;
        let metrics = image_metrics(&result.image, &cells, file.processing.cfar.guard)?;
        let truth = metrics
            .peaks
            .iter()
            .enumerate()
            .map(|(i, p)| TruthMetric {
                index: i,
                range_m: targets[i].range_m,
                velocity_mps: targets[i].velocity_mps,
                cell: cells[i],
                peak_dbm: p.peak_dbm,
                sinr_db: p.sinr_db,
                detected: result.detected_near(cells[i]).is_some(),
            })
            .collect();
        runs.push(ScenarioRun {
            algorithm: alg,
            result,
            truth,
        });
    }
    Ok(ScenarioOutcome {
        config: cfg,
        params,
        targets,
        seed,
        noise_dbm: w_to_dbm(noise),
        runs,
    })
}

/// Checks of the six-target scene: both weak targets revealed by JIC-CC
/// and FR-SW at `threshold_db`, at least one missed by conventional
/// processing, FR-SW's floor at or below JIC-CC's, and strong echoes at
/// least 60 dB above the receiver noise.
pub fn measurement_scene_checks(out: &ScenarioOutcome, weak: &[usize], threshold_db: f64) -> Result<Vec<Check>> {
    let run = |a: Algorithm| {
        out.run_of(a)
            .ok_or_else(|| Error::InvalidParameter(format!("scene was not processed with {a}")))
    };
    let (conv, jic, frsw) = (run(Algorithm::Conventional)?, run(Algorithm::JicCc)?, run(Algorithm::FrSw)?);
    let weak_min = |r: &ScenarioRun| {
        weak.iter()
            .map(|&i| if r.truth[i].detected { r.truth[i].sinr_db } else { f64::NEG_INFINITY })
            .fold(f64::INFINITY, f64::min)
    };
    let conv_missed = weak.iter().filter(|&&i| !conv.truth[i].detected).count();
    let noise_margin = (0..out.targets.len())
        .filter(|i| !weak.contains(i))
        .map(|i| frsw.truth[i].peak_dbm - out.noise_dbm)
        .fold(f64::INFINITY, f64::min);
    Ok(vec![
        Check::at_least("JIC-CC weakest revealed weak-target SINR (dB)", weak_min(jic), threshold_db),
        Check::at_least("FR-SW weakest revealed weak-target SINR (dB)", weak_min(frsw), threshold_db),
        Check::at_least("weak targets missed by conventional processing", conv_missed as f64, 1.0),
        Check::at_most(
            "FR-SW floor minus JIC-CC floor (dB)",
            frsw.result.floor_dbm - jic.result.floor_dbm,
            0.0,
        ),
        Check::at_least("strong echoes above receiver noise (dB)", noise_margin, 60.0),
    ])
}
