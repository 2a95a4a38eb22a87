//! Transmit frame generation and CP-OFDM synthesis.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::OfdmConfig;
use crate::error::{Error, Result};
use crate::fft;
use crate::grid::ComplexGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
}

/// Known transmit data, N rows by M (or M+1) symbol columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub data: ComplexGrid,
    pub modulation: Modulation,
    pub seed: u64,
}

impl SymbolFrame {
    pub fn subcarriers(&self) -> usize {
        self.data.rows()
    }

    pub fn symbols(&self) -> usize {
        self.data.cols()
    }

    /// Frame restricted to the first `m` symbols.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        Ok(Self {
            data: self.data.leading_columns(m)?,
            modulation: self.modulation,
            seed: self.seed,
        })
    }
}

const QPSK: [Complex64; 4] = [
    Complex64::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    Complex64::new(-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    Complex64::new(-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
    Complex64::new(std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
];

/// Random QPSK frame of `cfg.symbols` symbols, plus one more when
/// `extra_symbol` is set (used as the symbol after the frame by FDCC).
pub fn generate_data_frame(cfg: &OfdmConfig, seed: u64, extra_symbol: bool) -> SymbolFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = cfg.symbols + usize::from(extra_symbol);
    let data = ComplexGrid::from_fn(cfg.subcarriers, cols, |_, _| QPSK[rng.random_range(0..4)]);
    SymbolFrame {
        data,
        modulation: Modulation::Qpsk,
        seed,
    }
}

/// Sampled complex baseband stream.
///
/// Sample `n` sits at time `(n − start_offset − cp_length)·T_s`, so t = 0 is
/// the start of the data part of symbol 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
    pub sample_period: f64,
    pub start_offset: usize,
    pub subcarriers: usize,
    pub cp_length: usize,
    pub seed: Option<u64>,
}

impl TimeSignal {
    pub fn zeros_like(other: &TimeSignal) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); other.samples.len()],
            seed: None,
            ..other.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn symbol_len(&self) -> usize {
        self.subcarriers + self.cp_length
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes interleaved little-endian f64 I/Q pairs to `path` and a JSON
    /// sidecar to `path.json`.
    pub fn write_cf64(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for v in &self.samples {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        let sidecar = SignalSidecar {
            format: "cf64le".into(),
            sample_rate_hz: 1.0 / self.sample_period,
            sample_period_s: self.sample_period,
            length: self.samples.len(),
            start_offset: self.start_offset,
            seed: self.seed,
            subcarriers: self.subcarriers,
            cp_length: self.cp_length,
        };
        std::fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_cf64(path: &Path) -> Result<Self> {
        let sidecar: SignalSidecar = serde_json::from_str(&std::fs::read_to_string(Self::sidecar_path(path))?)?;
        if sidecar.format != "cf64le" {
            return Err(Error::Unsupported(format!("sample format {}", sidecar.format)));
        }
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() != sidecar.length * 16 {
            return Err(Error::DimensionMismatch(format!(
                "{} bytes for {} samples",
                bytes.len(),
                sidecar.length
            )));
        }
        let samples = bytes
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self {
            samples,
            sample_period: sidecar.sample_period_s,
            start_offset: sidecar.start_offset,
            subcarriers: sidecar.subcarriers,
            cp_length: sidecar.cp_length,
            seed: sidecar.seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalSidecar {
    pub format: String,
    pub sample_rate_hz: f64,
    pub sample_period_s: f64,
    pub length: usize,
    pub start_offset: usize,
    pub seed: Option<u64>,
    pub subcarriers: usize,
    pub cp_length: usize,
}

/// CP-OFDM synthesis: per symbol an unnormalised inverse DFT scaled by
/// √(P_tx/N), CP prepended, symbols concatenated. One zero symbol of
/// N + N_cp samples is appended so delayed echoes of the last symbol fit.
pub fn synthesize_time_signal(frame: &SymbolFrame, cfg: &OfdmConfig) -> Result<TimeSignal> {
    let n = cfg.subcarriers;
    let ncp = cfg.cp_length;
    if frame.subcarriers() != n || frame.symbols() < cfg.symbols {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} for config N={} M={}",
            frame.subcarriers(),
            frame.symbols(),
            n,
            cfg.symbols
        )));
    }
    let sym_len = n + ncp;
    let cols = frame.symbols();
    let mut samples = vec![Complex64::new(0.0, 0.0); (cols + 1) * sym_len];
    let amp = (cfg.tx_power_w / n as f64).sqrt();
    samples[..cols * sym_len]
        .par_chunks_mut(sym_len)
        .enumerate()
        .for_each(|(m, out)| {
            let body = &mut out[ncp..];
            body.copy_from_slice(frame.data.col(m));
            fft::ifft_inplace(body);
            fft::scale(body, amp);
            let (cp, body) = out.split_at_mut(ncp);
            cp.copy_from_slice(&body[n - ncp..]);
        });
    Ok(TimeSignal {
        samples,
        sample_period: 1.0 / cfg.bandwidth_hz,
        start_offset: 0,
        subcarriers: n,
        cp_length: ncp,
        seed: Some(frame.seed),
    })
}
