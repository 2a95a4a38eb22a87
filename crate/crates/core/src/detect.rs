//! Two-dimensional cell-averaging CFAR on the range-Doppler power image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rxproc::RangeDopplerImage;
use crate::units::{db_to_lin, w_to_dbm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfarConfig {
    /// Guard cells on each side, (range, Doppler).
    pub guard: (usize, usize),
    /// Training cells on each side beyond the guard, (range, Doppler).
    pub training: (usize, usize),
    pub pfa: f64,
    pub max_detections: usize,
    /// A second local maximum inside one cluster counts as its own target
    /// when it stands this far above the saddle towards a stronger peak.
    pub min_prominence_db: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            guard: (4, 4),
            training: (12, 8),
            pfa: 1e-4,
            max_detections: 16,
            min_prominence_db: 6.0,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.training.0 == 0 || self.training.1 == 0 {
            return Err(Error::InvalidParameter("CFAR training cells must be positive".into()));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::InvalidParameter(format!("P_fa {} outside (0, 1)", self.pfa)));
        }
        if !(self.min_prominence_db >= 0.0) || !self.min_prominence_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "peak prominence {} dB must be finite and non-negative",
                self.min_prominence_db
            )));
        }
        Ok(())
    }

    pub fn footprint(&self) -> (usize, usize) {
        (
            2 * (self.guard.0 + self.training.0) + 1,
            2 * (self.guard.1 + self.training.1) + 1,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarsePeak {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub power_w: f64,
    pub power_dbm: f64,
}

/// Threshold multiplier for a CA-CFAR with `k` exponential training cells.
pub fn threshold_factor(k: usize, pfa: f64) -> f64 {
    let k = k as f64;
    k * (pfa.powf(-1.0 / k) - 1.0)
}

/// Summed-area table over the power image with the Doppler axis padded by
/// `pad` wrapped columns on both sides.
struct Sat {
    rows: usize,
    cols: usize,
    pad: usize,
    m: usize,
    s: Vec<f64>,
}

impl Sat {
    fn new(power: &[f64], n: usize, m: usize, pad: usize) -> Self {
        let cols = m + 2 * pad;
        let stride = cols + 1;
        let mut s = vec![0.0; (n + 1) * stride];
        for r in 0..n {
            let mut row = 0.0;
            for c in 0..cols {
                let d = (c + m * (pad / m + 1) - pad) % m;
                row += power[d * n + r];
                s[(r + 1) * stride + c + 1] = s[r * stride + c + 1] + row;
            }
        }
        Self { rows: n, cols, pad, m, s }
    }

    /// Sum over range rows [r0, r1] and Doppler offsets [d − h, d + h].
    fn rect(&self, r0: usize, r1: usize, d: usize, h: usize) -> f64 {
        let stride = self.cols + 1;
        let c0 = d + self.pad - h;
        let c1 = d + self.pad + h;
        debug_assert!(r1 < self.rows && c1 < self.cols && self.m > 0);
        self.s[(r1 + 1) * stride + c1 + 1] - self.s[r0 * stride + c1 + 1] - self.s[(r1 + 1) * stride + c0]
            + self.s[r0 * stride + c0]
    }
}

/// Per-cell CA-CFAR threshold (W), column-major like the image.
///
/// The training window is truncated at the range edges with the average
/// taken over the cells that remain; the Doppler axis wraps.
pub fn cfar_threshold_map(image: &RangeDopplerImage, cfg: &CfarConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (n, m) = image.data.shape();
    let (fr, fd) = cfg.footprint();
    if n < fr || m < fd {
        return Err(Error::ImageTooSmall {
            rows: n,
            cols: m,
            footprint_rows: fr,
            footprint_cols: fd,
        });
    }
    let power = image.data.power();
    let (gr, gd) = cfg.guard;
    let (or, od) = (gr + cfg.training.0, gd + cfg.training.1);
    let sat = Sat::new(&power, n, m, od);
    let mut out = vec![0.0; n * m];
    for r in 0..n {
        let (o0, o1) = (r.saturating_sub(or), (r + or).min(n - 1));
        let (g0, g1) = (r.saturating_sub(gr), (r + gr).min(n - 1));
        let outer_cells = (o1 - o0 + 1) * (2 * od + 1);
        let inner_cells = (g1 - g0 + 1) * (2 * gd + 1);
        let k = outer_cells - inner_cells;
        let alpha = threshold_factor(k, cfg.pfa);
        for d in 0..m {
            let train = sat.rect(o0, o1, d, od) - sat.rect(g0, g1, d, gd);
            out[d * n + r] = alpha * train.max(0.0) / k as f64;
        }
    }
    Ok(out)
}

/// CA-CFAR detection, sorted by descending power then range then Doppler.
///
/// Threshold crossings are grouped into connected clusters (both image
/// axes wrap). Each cluster reports its maximum plus every other local
/// maximum whose prominence, its power over the highest saddle linking it
/// to a stronger peak of the cluster, reaches `min_prominence_db`. A weak
/// target touching a strong target's sidelobe skirt stays separate while
/// noise ripple on that skirt does not.
pub fn cfar_detect(image: &RangeDopplerImage, cfg: &CfarConfig) -> Result<Vec<CoarsePeak>> {
    let threshold = cfar_threshold_map(image, cfg)?;
    let (n, m) = image.data.shape();
    let power = image.data.power();
    let mask: Vec<bool> = power.iter().zip(&threshold).map(|(p, t)| p > t).collect();
    let mut peaks = cluster_peaks(&power, &mask, n, m, db_to_lin(cfg.min_prominence_db));
    peaks.sort_by(|a, b| {
        b.power_w
            .total_cmp(&a.power_w)
            .then(a.range_bin.cmp(&b.range_bin))
            .then(a.doppler_bin.cmp(&b.doppler_bin))
    });
    peaks.truncate(cfg.max_detections);
    Ok(peaks)
}

/// The 8-neighbourhood of a cell on the wrapped image, as flat indices.
fn neighbours(cell: usize, n: usize, m: usize) -> impl Iterator<Item = usize> {
    let (r, d) = ((cell % n) as i64, (cell / n) as i64);
    (-1i64..=1).flat_map(move |dr| {
        (-1i64..=1).filter_map(move |dd| {
            if dr == 0 && dd == 0 {
                return None;
            }
            let rr = (r + dr).rem_euclid(n as i64) as usize;
            let cc = (d + dd).rem_euclid(m as i64) as usize;
            Some(cc * n + rr)
        })
    })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Watershed merge of the threshold crossings in descending power order.
/// When two regions meet at a saddle cell, the lower region's peak is kept
/// if it stands `min_prominence` (linear) above the saddle.
fn cluster_peaks(power: &[f64], mask: &[bool], n: usize, m: usize, min_prominence: f64) -> Vec<CoarsePeak> {
    const UNSET: usize = usize::MAX;
    let mut cells: Vec<usize> = (0..n * m).filter(|&i| mask[i]).collect();
    cells.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    let mut parent = vec![UNSET; n * m];
    let mut peak = vec![UNSET; n * m];
    let mut found = Vec::new();
    for &c in &cells {
        parent[c] = c;
        peak[c] = c;
        for j in neighbours(c, n, m) {
            if parent[j] == UNSET {
                continue;
            }
            let (rc, rj) = (find(&mut parent, c), find(&mut parent, j));
            if rc == rj {
                continue;
            }
            // Cells arrive in descending order, so the earlier peak is higher.
            let (hi, lo) = if (power[peak[rc]], peak[rj]) > (power[peak[rj]], peak[rc]) { (rc, rj) } else { (rj, rc) };
            let lo_peak = peak[lo];
            if lo_peak != c && power[lo_peak] >= min_prominence * power[c] {
                found.push(lo_peak);
            }
            parent[lo] = hi;
        }
    }
    for &c in &cells {
        if find(&mut parent, c) == c {
            found.push(peak[c]);
        }
    }
    // Climb each peak to an 8-neighbourhood local maximum of the full image.
    let mut out: Vec<usize> = Vec::with_capacity(found.len());
    for mut cell in found {
        while let Some(next) = neighbours(cell, n, m)
            .filter(|&j| power[j] > power[cell])
            .max_by(|&a, &b| power[a].total_cmp(&power[b]))
        {
            cell = next;
        }
        if !out.contains(&cell) {
            out.push(cell);
        }
    }
    out.into_iter()
        .map(|i| CoarsePeak {
            range_bin: i % n,
            doppler_bin: i / n,
            power_w: power[i],
            power_dbm: w_to_dbm(power[i]),
        })
        .collect()
}
