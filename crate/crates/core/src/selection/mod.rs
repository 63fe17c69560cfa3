//! Keep/prune decisions from landmark scores.
//!
//! The prune threshold comes from a kernel density fit of the score
//! histogram: take the density minimum between the lowest and highest
//! modes and move it down by half the score SD, so that landmarks missed
//! through occlusion in some sessions are still kept.

pub mod kde;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::FeatureMap;

pub use kde::{kde, silverman_bandwidth, Kde};

/// Local maxima lower than this fraction of the tallest one are treated as
/// kernel ripple, not modes.
pub const MIN_PEAK_FRACTION: f64 = 0.05;
/// Threshold used when the density has a single mode.
pub const FALLBACK_QUANTILE: f64 = 0.2;
pub const SD_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// Lowest and highest modes. `None` when the density is unimodal.
    pub peak_locations: Option<(f64, f64)>,
    pub local_min: Option<f64>,
    /// Sample SD of the scores.
    pub sigma: f64,
    pub threshold: f64,
    /// Set when the unimodal fallback produced the threshold.
    pub unimodal_fallback: bool,
}

impl ThresholdReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let _ = writeln!(out, "threshold={}", self.threshold);
        let _ = writeln!(out, "unimodal_fallback={}", self.unimodal_fallback);
        let _ = writeln!(out, "local_min={}", fmt_opt(self.local_min));
        let _ = writeln!(out, "low_peak={}", fmt_opt(self.peak_locations.map(|p| p.0)));
        let _ = writeln!(out, "high_peak={}", fmt_opt(self.peak_locations.map(|p| p.1)));
        let _ = writeln!(out, "sigma={}", self.sigma);
        let _ = writeln!(out, "bandwidth={}", self.bandwidth);
        out
    }
}

/// Indices of local maxima of a gridded density, ripples filtered out.
fn modes(density: &[f64]) -> Vec<usize> {
    let tallest = density.iter().copied().fold(0.0, f64::max);
    let n = density.len();
    (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { density[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { density[i + 1] };
            density[i] > left && density[i] >= right
        })
        .filter(|&i| density[i] >= MIN_PEAK_FRACTION * tallest)
        .collect()
}

pub fn find_threshold(scores: &[f64]) -> Result<ThresholdReport> {
    let k = kde(scores, None)?;
    let (_, sigma) = kde::mean_and_sd(scores);
    let peaks = modes(&k.density);

    if peaks.len() < 2 {
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        return Ok(ThresholdReport {
            threshold: kde::quantile_sorted(&sorted, FALLBACK_QUANTILE),
            grid: k.grid,
            density: k.density,
            bandwidth: k.bandwidth,
            peak_locations: None,
            local_min: None,
            sigma,
            unimodal_fallback: true,
        });
    }

    let lo = peaks[0];
    let hi = *peaks.last().unwrap();
    let min_idx = (lo + 1..hi)
        .min_by(|&a, &b| k.density[a].total_cmp(&k.density[b]))
        .expect("distinct modes have grid points between them");
    let local_min = k.grid[min_idx];
    Ok(ThresholdReport {
        peak_locations: Some((k.grid[lo], k.grid[hi])),
        local_min: Some(local_min),
        threshold: local_min - SD_MARGIN * sigma,
        sigma,
        bandwidth: k.bandwidth,
        grid: k.grid,
        density: k.density,
        unimodal_fallback: false,
    })
}

/// Splits the map into landmarks scoring at least `threshold` and the rest.
pub fn prune_map(map: &FeatureMap, scores: &[f64], threshold: f64) -> Result<(FeatureMap, FeatureMap)> {
    if scores.len() != map.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} landmarks",
            scores.len(),
            map.len()
        )));
    }
    let keep: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    let drop: Vec<bool> = keep.iter().map(|k| !k).collect();
    Ok((map.masked(&keep), map.masked(&drop)))
}

/// Drops the `floor(drop_rate * N)` lowest-keyed landmarks. Equal keys drop
/// the lower id first.
pub fn rank_subset(map: &FeatureMap, keys: &[f64], drop_rate: f64) -> Result<FeatureMap> {
    if keys.len() != map.len() {
        return Err(Error::InvalidInput(format!(
            "{} ranking keys for {} landmarks",
            keys.len(),
            map.len()
        )));
    }
    if !(0.0..1.0).contains(&drop_rate) {
        return Err(Error::InvalidInput(format!("drop rate must be in [0, 1), got {drop_rate}")));
    }
    let n_drop = (drop_rate * map.len() as f64).floor() as usize;
    // map order is id order, so a stable sort on key breaks ties by id
    let mut order: Vec<usize> = (0..map.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut keep = vec![true; map.len()];
    for &i in &order[..n_drop] {
        keep[i] = false;
    }
    Ok(map.masked(&keep))
}
