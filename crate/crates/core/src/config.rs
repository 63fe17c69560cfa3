//! `key = value` configuration files for the command-line pipeline.

use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::EkfParams;
use crate::predictors::DEFAULT_RADIUS;
use crate::regression::ModelConfig;
use crate::simulator::WorldConfig;

pub const DEFAULT_RATES: [f64; 8] = [0.0, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub world: WorldConfig,
    pub model: ModelConfig,
    pub ekf: EkfParams,
    pub rates: Vec<f64>,
    /// Leading fraction of sessions used for fitting; the rest are held out.
    pub train_fraction: f64,
    pub radius: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            world: WorldConfig::default(),
            model: ModelConfig::default(),
            ekf: EkfParams::default(),
            rates: DEFAULT_RATES.to_vec(),
            train_fraction: 0.8,
            radius: DEFAULT_RADIUS,
        }
    }
}

impl PipelineConfig {
    /// Points every seeded component at the same master seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.world.seed = seed;
        self.model.cv.seed = seed;
        self.ekf.seed = seed;
    }

    /// Number of leading sessions used for training out of `n`.
    pub fn train_sessions(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, format!("expected key = value, got `{line}`")))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|m| Error::parse(path, i + 1, m))?;
        }
        cfg.world.validate()?;
        crate::evaluation::validate_rates(&cfg.rates)?;
        if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "train_fraction must be in (0, 1), got {}",
                cfg.train_fraction
            )));
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let w = &mut self.world;
        match key {
            "seed" => {
                let s = num(key, value)?;
                self.set_seed(s);
            }
            "n_persistent" => w.n_persistent = num(key, value)?,
            "n_ephemeral" => w.n_ephemeral = num(key, value)?,
            "area_width" => w.area.0 = num(key, value)?,
            "area_height" => w.area.1 = num(key, value)?,
            "loop_length" => w.loop_length = num(key, value)?,
            "sensor_range" => w.sensor_range = num(key, value)?,
            "detection_prob" => w.detection_prob = num(key, value)?,
            "ephemeral_lifetime" => w.ephemeral_lifetime = num(key, value)?,
            "n_sessions" => w.n_sessions = num(key, value)?,
            "pose_spacing" => w.pose_spacing = num(key, value)?,
            "trajectory_jitter" => w.trajectory_jitter = num(key, value)?,
            "persistent_offset_min" => w.persistent_offset.0 = num(key, value)?,
            "persistent_offset_max" => w.persistent_offset.1 = num(key, value)?,
            "ephemeral_offset_min" => w.ephemeral_offset.0 = num(key, value)?,
            "ephemeral_offset_max" => w.ephemeral_offset.1 = num(key, value)?,
            "sparse_quadrant_density" => w.sparse_quadrant_density = num(key, value)?,
            "range_noise" => {
                let v: f64 = num(key, value)?;
                w.range_noise = v;
                self.ekf.sensor.sigma_range = v;
            }
            "bearing_noise_deg" => {
                let v: f64 = num::<f64>(key, value)?.to_radians();
                w.bearing_noise = v;
                self.ekf.sensor.sigma_bearing = v;
            }
            "sigma_v" => self.ekf.motion.sigma_v = num(key, value)?,
            "sigma_omega_deg" => self.ekf.motion.sigma_omega = num::<f64>(key, value)?.to_radians(),
            "folds" => self.model.cv.folds = num(key, value)?,
            "n_lambdas" => self.model.cv.n_lambdas = num(key, value)?,
            "lambda_min_ratio" => self.model.cv.lambda_min_ratio = num(key, value)?,
            "alphas" => self.model.cv.alphas = list(key, value)?,
            "exclude" => {
                self.model.excluded_columns = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
            }
            "rates" => self.rates = list(key, value)?,
            "train_fraction" => self.train_fraction = num(key, value)?,
            "radius" => self.radius = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("bad value `{value}` for `{key}`"))
}

fn list(key: &str, value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}
