//! Output files: CSV tables, image CSV, detection and estimate lists, and a
//! manifest tying every file to a configuration hash, seed and version.
//!
//! Numbers are written with Rust's own float formatting, so the decimal
//! separator is always `.`.

use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::DerivedParams;
use crate::error::Result;
use crate::estimate::Losses;
use crate::mitigate::{DetectedTarget, DetectionStage};
use crate::rxproc::RangeDopplerImage;
use crate::units::{lin_to_db, w_to_dbm};

pub fn csv_table<S: AsRef<str>>(header: &[S], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    let names: Vec<&str> = header.iter().map(|h| h.as_ref()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Image power in dBm. The first line holds the velocity axis, every
/// following line starts with its range.
pub fn image_csv(image: &RangeDopplerImage) -> String {
    let (n, m) = image.data.shape();
    let mut out = String::with_capacity(n * m * 9);
    out.push_str("range_m\\velocity_mps");
    for v in &image.velocity_axis {
        let _ = write!(out, ",{v:.4}");
    }
    out.push('\n');
    for r in 0..n {
        let _ = write!(out, "{:.4}", image.range_axis[r]);
        for d in 0..m {
            let _ = write!(out, ",{:.3}", w_to_dbm(image.power(r, d)));
        }
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// FNV-1a of the compact JSON form of `value`, as 16 hex digits.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(format!("{:016x}", fnv1a64(serde_json::to_string(value)?.as_bytes())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionRecord {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub alpha_db: f64,
    pub phase_deg: f64,
    pub losses: Losses,
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub power_dbm: f64,
    pub stage: DetectionStage,
    pub cancelled: bool,
}

pub fn estimate_records(targets: &[DetectedTarget], params: &DerivedParams) -> Vec<EstimateRecord> {
    targets
        .iter()
        .map(|t| EstimateRecord {
            range_m: t.estimate.range_m(params),
            velocity_mps: t.estimate.velocity_mps(params),
            alpha_db: 2.0 * lin_to_db(t.estimate.alpha_mag),
            phase_deg: t.estimate.theta_rad.to_degrees(),
            losses: t.estimate.losses,
            range_bin: t.cell.0,
            doppler_bin: t.cell.1,
            power_dbm: w_to_dbm(t.estimate.peak_power_w),
            stage: t.stage,
            cancelled: t.cancelled,
        })
        .collect()
}

pub fn detection_records(targets: &[DetectedTarget]) -> Vec<DetectionRecord> {
    targets
        .iter()
        .map(|t| DetectionRecord {
            range_bin: t.cell.0,
            doppler_bin: t.cell.1,
            power_dbm: w_to_dbm(t.estimate.peak_power_w),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub fnv1a64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

/// Files collected in memory and written together, so a failed run leaves
/// nothing behind.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file under `dir` plus a manifest listing them.
    pub fn write(self, dir: &Path, config_hash: &str, seed: u64) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            seed,
            files: self
                .files
                .iter()
                .map(|(name, data)| ManifestEntry {
                    file: name.clone(),
                    fnv1a64: format!("{:016x}", fnv1a64(data)),
                })
                .collect(),
        };
        let manifest = to_json(&manifest)?;
        fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, data) in self.files.iter().map(|(n, d)| (n.as_str(), d.as_slice())).chain([(MANIFEST_FILE, manifest.as_bytes())]) {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, data)?;
            written.push(path);
        }
        Ok(written)
    }
}
