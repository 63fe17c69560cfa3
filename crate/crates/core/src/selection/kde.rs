//! Gaussian kernel density estimate on a fixed grid.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 512;
/// Grid extends this many bandwidths past the extreme samples.
pub const GRID_TAIL: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl Kde {
    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Trapezoid-rule integral of the gridded density.
    pub fn integral(&self) -> f64 {
        let h = self.step();
        self.density
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]) * h)
            .sum()
    }
}

pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolated quantile of already sorted data (`q` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb: `0.9 * min(sd, iqr/1.34) * n^(-1/5)`.
/// Falls back to the SD alone when the IQR collapses.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let (_, sd) = mean_and_sd(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (values.len() as f64).powf(-0.2)
}

pub fn kde(values: &[f64], bandwidth: Option<f64>) -> Result<Kde> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || !(max > min) {
        return Err(Error::InvalidInput(
            "density estimation needs at least two distinct scores".into(),
        ));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(values),
    };
    let lo = min - GRID_TAIL * h;
    let hi = max + GRID_TAIL * h;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * PI).sqrt());
    let density = grid
        .iter()
        .map(|&g| {
            norm * values
                .iter()
                .map(|&v| {
                    let z = (g - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(Kde {
        bandwidth: h,
        grid,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn two_points_wide_kernel_is_symmetric_unimodal() {
        let k = kde(&[-1.0, 1.0], Some(3.0)).unwrap();
        let peak = k
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        // even number of grid points: the two central points share the mode
        assert!(peak == 255 || peak == 256);
        for i in 0..GRID_POINTS {
            let mirrored = k.density[GRID_POINTS - 1 - i];
            assert!((k.density[i] - mirrored).abs() < 1e-12);
        }
        assert!(k.grid[255] < 0.0 && k.grid[256] > 0.0);
    }

    #[test]
    fn standard_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| n.sample(&mut rng)).collect();
        let k = kde(&xs, None).unwrap();
        let at_zero = k
            .grid
            .iter()
            .zip(&k.density)
            .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .unwrap();
        assert!((at_zero.1 - 0.398_942_280_4).abs() < 0.05, "{}", at_zero.1);
        assert!((k.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identical_scores_rejected() {
        assert!(kde(&[2.0, 2.0, 2.0], None).is_err());
        assert!(kde(&[2.0], None).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.2), 0.8);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
    }
}
