//! Cyclic coordinate descent for the elastic net.
//!
//! Minimises over `(b0, b)`:
//!
//! ```text
//! (1/2N) * sum_i (y_i - b0 - x_i.b)^2 + lambda * (alpha*|b|_1 + (1-alpha)/2 * |b|_2^2)
//! ```
//!
//! The intercept is never penalised; it is recovered from the column and
//! response means after solving the centred problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest alpha used when deriving a penalty path for pure ridge, whose
/// true lambda_max is infinite.
pub const RIDGE_ALPHA_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tol: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Relative slack on the L1 activation boundary.
const BOUNDARY_RTOL: f64 = 1e-12;

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// A design matrix and response, centred once so that many penalties can be
/// solved against it with warm starts.
#[derive(Debug, Clone)]
pub struct CenteredProblem {
    xc: DMatrix<f64>,
    yc: DVector<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
    /// (1/N) * ||xc_j||^2
    col_sq: Vec<f64>,
}

impl CenteredProblem {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        if y.len() != n {
            return Err(Error::InvalidInput(format!(
                "design has {n} rows but response has {} values",
                y.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in regression inputs".into()));
        }
        let nf = n as f64;
        let x_mean: Vec<f64> = x.column_iter().map(|c| c.sum() / nf).collect();
        let y_mean = y.iter().sum::<f64>() / nf;
        let mut xc = x.clone();
        for (j, mut col) in xc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-x_mean[j]);
        }
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let col_sq = xc.column_iter().map(|c| c.norm_squared() / nf).collect();
        Ok(CenteredProblem {
            xc,
            yc,
            x_mean,
            y_mean,
            col_sq,
        })
    }

    pub fn nrows(&self) -> usize {
        self.xc.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.xc.ncols()
    }

    /// Smallest lambda at which every coefficient is zero for this alpha.
    pub fn lambda_max(&self, alpha: f64) -> f64 {
        let n = self.nrows() as f64;
        let max_corr = self
            .xc
            .column_iter()
            .map(|c| (c.dot(&self.yc) / n).abs())
            .fold(0.0, f64::max);
        max_corr / alpha.max(RIDGE_ALPHA_FLOOR)
    }

    /// `count` log-spaced penalties from lambda_max down to
    /// `min_ratio * lambda_max`.
    pub fn lambda_path(&self, alpha: f64, count: usize, min_ratio: f64) -> Vec<f64> {
        log_path(self.lambda_max(alpha), count, min_ratio)
    }

    /// Penalised objective at `(intercept, beta)` on the original data.
    pub fn objective(&self, beta: &[f64], alpha: f64, lambda: f64) -> f64 {
        let r = &self.yc - &self.xc * DVector::from_column_slice(beta);
        let n = self.nrows() as f64;
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        r.norm_squared() / (2.0 * n) + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
    }

    pub fn solve(
        &self,
        alpha: f64,
        lambda: f64,
        warm: Option<&[f64]>,
        opts: &CdOptions,
    ) -> Result<PenalizedFit> {
        if !(0.0..=1.0).contains(&alpha) || !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "need alpha in [0,1] and finite lambda >= 0, got alpha={alpha} lambda={lambda}"
            )));
        }
        let p = self.ncols();
        let n = self.nrows() as f64;
        let mut beta = match warm {
            Some(w) if w.len() == p => w.to_vec(),
            Some(w) => {
                return Err(Error::InvalidInput(format!(
                    "warm start has {} values for {p} columns",
                    w.len()
                )))
            }
            None => vec![0.0; p],
        };
        let mut resid = &self.yc - &self.xc * DVector::from_column_slice(&beta);
        let l1_pen = lambda * alpha;
        let l2_pen = lambda * (1.0 - alpha);

        #[cfg(debug_assertions)]
        let mut last_obj = self.objective(&beta, alpha, lambda);

        let mut sweeps = 0;
        let mut converged = p == 0;
        while !converged && sweeps < opts.max_sweeps {
            sweeps += 1;
            let mut max_change = 0.0_f64;
            for j in 0..p {
                let denom = self.col_sq[j] + l2_pen;
                let col = self.xc.column(j);
                let old = beta[j];
                let new = if denom > 0.0 {
                    let rho = col.dot(&resid) / n + self.col_sq[j] * old;
                    // a correlation equal to the penalty up to rounding stays
                    // inactive, so lambda = lambda_max gives exact zeros
                    if rho.abs() - l1_pen <= BOUNDARY_RTOL * l1_pen {
                        0.0
                    } else {
                        soft_threshold(rho, l1_pen) / denom
                    }
                } else {
                    0.0
                };
                let delta = new - old;
                if delta != 0.0 {
                    resid.axpy(-delta, &col, 1.0);
                    beta[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            #[cfg(debug_assertions)]
            {
                let obj = self.objective(&beta, alpha, lambda);
                debug_assert!(
                    obj <= last_obj + 1e-10 * last_obj.abs().max(1.0),
                    "coordinate descent increased the objective: {last_obj} -> {obj}"
                );
                last_obj = obj;
            }
            converged = max_change < opts.tol;
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numerical("coordinate descent diverged".into()));
        }
        let intercept = self.y_mean - beta.iter().zip(&self.x_mean).map(|(b, m)| b * m).sum::<f64>();
        Ok(PenalizedFit {
            coefficients: beta,
            intercept,
            sweeps,
            converged,
        })
    }

    /// Solves along a decreasing penalty path, warm-starting each step.
    pub fn solve_path(&self, alpha: f64, lambdas: &[f64], opts: &CdOptions) -> Result<Vec<PenalizedFit>> {
        let mut fits: Vec<PenalizedFit> = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let warm = fits.last().map(|f| f.coefficients.as_slice());
            fits.push(self.solve(alpha, lambda, warm, opts)?);
        }
        Ok(fits)
    }

    /// Predictions for rows of an uncentred matrix.
    pub fn predict(x: &DMatrix<f64>, fit: &PenalizedFit) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                fit.intercept
                    + x.row(i)
                        .iter()
                        .zip(&fit.coefficients)
                        .map(|(v, b)| v * b)
                        .sum::<f64>()
            })
            .collect()
    }
}

pub fn log_path(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    if !(lambda_max > 0.0) {
        return vec![0.0; count];
    }
    if count == 1 {
        return vec![lambda_max];
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    (0..count).map(|i| lambda_max * (step * i as f64).exp()).collect()
}

/// One-shot elastic-net fit of `y` on `x`.
pub fn fit_penalized(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    lambda: f64,
    opts: &CdOptions,
) -> Result<PenalizedFit> {
    CenteredProblem::new(x, y)?.solve(alpha, lambda, None, opts)
}
