//! Command-line runner for scene files and the reproduction experiments.
//!
//! Thread count follows `RAYON_NUM_THREADS`.

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};

use ofdmradar::config::{derive_params, OfdmConfig};
use ofdmradar::experiments::{
    complexity, estimator_mae, max_range_curves, measured_papr_factor, noise_floors, sinr_sweep, Check, MaeConfig,
    MaePoint, NoiseFloorRow, SweepConfig, SweepResult,
};
use ofdmradar::io::{config_hash, csv_table, detection_records, estimate_records, image_csv, to_json, OutputSet};
use ofdmradar::mitigate::{Algorithm, Timings};
use ofdmradar::scenario::{
    measurement_scene_checks, run_scenario, ScenarioFile, ScenarioOutcome, TruthMetric, MEASUREMENT_SCENE_WEAK,
};

/// Reliable-detection image SINR used by the sweep and scene checks.
const DETECTION_THRESHOLD_DB: f64 = 17.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    /// Analytic thermal, quantisation and interference floors versus range.
    NoiseFloors,
    /// Maximum detectable range versus interferer RCS.
    MaxRange,
    /// Monte Carlo weak-target SINR sweep over all algorithms.
    SinrSweep,
    /// CZT and projection estimator errors and residual floors.
    EstimatorMae,
    /// Processing-time scaling of FR-SW and JIC-CC.
    Complexity,
    /// The scene file given with --scenario.
    Scenario,
    /// Built-in six-target measurement scene.
    MeasurementScene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Scale {
    /// N = 1024, N_cp = 128, M = 64.
    Desk,
    /// N = 6652, N_cp = 458, M = 280.
    Reference,
}

#[derive(Debug, Parser)]
#[command(name = "ofdmradar", version, about = "OFDM radar beyond the cyclic-prefix range: scenes and experiments")]
struct Cli {
    /// Scene file (JSON). Runs the scene unless --experiment says otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed overriding the scene or experiment default.
    #[arg(long)]
    seed: Option<u64>,
    /// Algorithm to run on a scene; repeatable. Defaults to the scene's list.
    #[arg(long = "algo", value_parser = parse_algorithm)]
    algo: Vec<Algorithm>,
    /// Monte Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// System size for the experiments; each experiment has its own default.
    #[arg(long, value_enum)]
    scale: Option<Scale>,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse::<Algorithm>().map_err(|e| e.to_string())
}

fn system(scale: Scale) -> OfdmConfig {
    match scale {
        Scale::Desk => OfdmConfig::desk_scale(),
        Scale::Reference => OfdmConfig::simulation_reference(),
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    scale: Option<Scale>,
    seed: Option<u64>,
    all_pass: bool,
    checks: &'a [Check],
}

fn add_summary(out: &mut OutputSet, experiment: &str, scale: Option<Scale>, seed: Option<u64>, checks: &[Check]) -> Result<()> {
    for c in checks {
        log::info!("{c}");
    }
    let summary = Summary {
        experiment,
        scale,
        seed,
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    };
    out.add("summary.json", to_json(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct AlgorithmMetrics<'a> {
    algorithm: Algorithm,
    floor_dbm: f64,
    fdcc_last_column_omitted: bool,
    detections: usize,
    truth: &'a [TruthMetric],
}

#[derive(Serialize)]
struct ScenarioMetrics<'a> {
    seed: u64,
    noise_dbm: f64,
    algorithms: Vec<AlgorithmMetrics<'a>>,
}

#[derive(Serialize)]
struct AlgorithmTimings {
    algorithm: Algorithm,
    timings: Timings,
}

/// Image, detection and estimate files per algorithm, plus metrics (fully
/// determined by scene and seed) and wall-clock timings kept apart.
fn scenario_outputs(outcome: &ScenarioOutcome, file: &ScenarioFile, out: &mut OutputSet) -> Result<()> {
    out.add("scene.json", to_json(file)?);
    let mut metrics = ScenarioMetrics {
        seed: outcome.seed,
        noise_dbm: outcome.noise_dbm,
        algorithms: Vec::new(),
    };
    let mut timings = Vec::new();
    for run in &outcome.runs {
        let name = run.algorithm.name();
        out.add(format!("{name}/image.csv"), image_csv(&run.result.image));
        out.add(format!("{name}/detections.json"), to_json(&detection_records(&run.result.targets))?);
        out.add(
            format!("{name}/targets.json"),
            to_json(&estimate_records(&run.result.targets, &outcome.params))?,
        );
        metrics.algorithms.push(AlgorithmMetrics {
            algorithm: run.algorithm,
            floor_dbm: run.result.floor_dbm,
            fdcc_last_column_omitted: run.result.fdcc_last_column_omitted,
            detections: run.result.targets.len(),
            truth: &run.truth,
        });
        timings.push(AlgorithmTimings {
            algorithm: run.algorithm,
            timings: run.result.timings,
        });
    }
    out.add("metrics.json", to_json(&metrics)?);
    out.add("timings.json", to_json(&timings)?);
    Ok(())
}

fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioFile::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: &Cli) -> Result<()> {
    let experiment = match (cli.experiment, &cli.scenario) {
        (Some(e), _) => e,
        (None, Some(_)) => Experiment::Scenario,
        (None, None) => bail!("give --scenario <file> or --experiment <kind>"),
    };
    if cli.trials == Some(0) {
        bail!("--trials must be at least 1");
    }
    let mut out = OutputSet::new();
    let (hash, seed) = match experiment {
        Experiment::Scenario | Experiment::MeasurementScene => {
            let file = match (experiment, &cli.scenario) {
                (Experiment::Scenario, Some(path)) => load_scenario(path)?,
                (Experiment::Scenario, None) => bail!("--experiment scenario needs --scenario <file>"),
                _ => ScenarioFile::measurement_scene()?,
            };
            let algorithms = if cli.algo.is_empty() { file.algorithms() } else { cli.algo.clone() };
            let outcome = run_scenario(&file, &algorithms, cli.seed)?;
            scenario_outputs(&outcome, &file, &mut out)?;
            if experiment == Experiment::MeasurementScene {
                let checks = measurement_scene_checks(&outcome, &MEASUREMENT_SCENE_WEAK, DETECTION_THRESHOLD_DB)?;
                add_summary(&mut out, "measurement-scene", None, Some(outcome.seed), &checks)?;
            }
            (config_hash(&file)?, outcome.seed)
        }
        Experiment::NoiseFloors => {
            let scale = cli.scale.unwrap_or(Scale::Reference);
            let seed = cli.seed.unwrap_or(1);
            let mut cfg = system(scale);
            cfg.papr_factor = measured_papr_factor(&cfg, seed)?;
            let params = derive_params(&cfg)?;
            let floors = noise_floors(20.0, &cfg, &params);
            let rows: Vec<Vec<f64>> = floors.rows.iter().map(NoiseFloorRow::values).collect();
            out.add("noise_floors.csv", csv_table(&NoiseFloorRow::HEADER, &rows));
            let checks = floors.checks();
            add_summary(&mut out, "noise-floors", Some(scale), Some(seed), &checks)?;
            (config_hash(&cfg)?, seed)
        }
        Experiment::MaxRange => {
            let scale = cli.scale.unwrap_or(Scale::Reference);
            let cfg = system(scale);
            let params = derive_params(&cfg)?;
            let interferers: Vec<f64> = (0..=6).map(|i| 5.0 * i as f64).collect();
            let curves = max_range_curves(&[0.0, 10.0, 20.0], &interferers, DETECTION_THRESHOLD_DB, &cfg, &params)?;
            out.add("max_range.csv", csv_table(&curves.csv_header(), &curves.csv_rows()));
            add_summary(&mut out, "max-range", Some(scale), None, &curves.checks())?;
            (config_hash(&cfg)?, 0)
        }
        Experiment::SinrSweep => {
            let scale = cli.scale.unwrap_or(Scale::Desk);
            let mut cfg = match scale {
                Scale::Desk => SweepConfig::desk()?,
                Scale::Reference => SweepConfig::reference()?,
            };
            if let Some(t) = cli.trials {
                cfg.trials = t;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let result = sinr_sweep(&cfg)?;
            out.add("sinr_sweep.csv", csv_table(&SweepResult::CSV_HEADER, &result.csv_rows()));
            let mut checks = result.ordering_checks(DETECTION_THRESHOLD_DB);
            if scale == Scale::Reference {
                checks.extend(result.absolute_checks(DETECTION_THRESHOLD_DB));
            }
            add_summary(&mut out, "sinr-sweep", Some(scale), Some(cfg.seed), &checks)?;
            (config_hash(&cfg)?, cfg.seed)
        }
        Experiment::EstimatorMae => {
            let scale = cli.scale.unwrap_or(Scale::Reference);
            let mut cfg = MaeConfig {
                system: system(scale),
                ..MaeConfig::reference()
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let result = estimator_mae(&cfg)?;
            let rows: Vec<Vec<f64>> = result.points.iter().map(MaePoint::values).collect();
            out.add("estimator_mae.csv", csv_table(&MaePoint::HEADER, &rows));
            add_summary(&mut out, "estimator-mae", Some(scale), Some(cfg.seed), &result.checks())?;
            (config_hash(&cfg)?, cfg.seed)
        }
        Experiment::Complexity => {
            let scale = cli.scale.unwrap_or(Scale::Reference);
            let cfg = system(scale);
            let seed = cli.seed.unwrap_or(3);
            let result = complexity(&cfg, 20.0, 3, seed)?;
            out.add(
                "complexity.csv",
                csv_table(&ofdmradar::experiments::ComplexityResult::CSV_HEADER, &result.csv_rows()),
            );
            out.add("timings.json", to_json(&result)?);
            add_summary(&mut out, "complexity", Some(scale), Some(seed), &result.checks())?;
            (config_hash(&cfg)?, seed)
        }
    };
    let written = out.write(&cli.out, &hash, seed)?;
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
