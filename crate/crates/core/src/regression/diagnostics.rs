//! Per-predictor screening: correlation with the label and which columns a
//! pure lasso or pure ridge fit drives to zero.

use nalgebra::DMatrix;

use super::cv::{cross_validate, CvConfig};
use super::elastic_net::CenteredProblem;
use crate::error::Result;

/// A ridge coefficient counts as zeroed when its magnitude is below this
/// fraction of the largest ridge coefficient. Ridge never reaches exact 0.
pub const RIDGE_ZERO_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorDiagnostic {
    pub name: String,
    pub r_squared: f64,
    pub lasso_coefficient: f64,
    pub ridge_coefficient: f64,
    pub lasso_zeroed: bool,
    pub ridge_zeroed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pub lambdas: Vec<f64>,
    /// coefficients[l][j]
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub predictors: Vec<PredictorDiagnostic>,
    pub lasso_lambda: f64,
    pub ridge_lambda: f64,
    pub lasso_path: PathTrace,
    pub ridge_path: PathTrace,
}

impl DiagnosticsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("predictor,r_squared,lasso_coef,ridge_coef,lasso_zeroed,ridge_zeroed\n");
        for p in &self.predictors {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.name, p.r_squared, p.lasso_coefficient, p.ridge_coefficient, p.lasso_zeroed, p.ridge_zeroed
            ));
        }
        out
    }
}

/// Squared Pearson correlation; 0 when either side is constant.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    }
}

fn trace(x: &DMatrix<f64>, y: &[f64], alpha: f64, cfg: &CvConfig) -> Result<PathTrace> {
    let problem = CenteredProblem::new(x, y)?;
    let lambdas = problem.lambda_path(alpha, cfg.n_lambdas, cfg.lambda_min_ratio);
    let fits = problem.solve_path(alpha, &lambdas, &cfg.cd)?;
    Ok(PathTrace {
        lambdas,
        coefficients: fits.into_iter().map(|f| f.coefficients).collect(),
    })
}

/// Runs a cross-validated pure-lasso and pure-ridge fit on standardised
/// `x` and reports each column's R^2 and selected coefficients.
pub fn predictor_diagnostics(
    x: &DMatrix<f64>,
    y: &[f64],
    names: &[String],
    cfg: &CvConfig,
) -> Result<DiagnosticsReport> {
    let lasso = cross_validate(x, y, &CvConfig { alphas: vec![1.0], ..cfg.clone() })?;
    let ridge = cross_validate(x, y, &CvConfig { alphas: vec![0.0], ..cfg.clone() })?;
    let ridge_max = ridge
        .fit
        .coefficients
        .iter()
        .map(|c| c.abs())
        .fold(0.0, f64::max);

    let predictors = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let lc = lasso.fit.coefficients[j];
            let rc = ridge.fit.coefficients[j];
            PredictorDiagnostic {
                name: name.clone(),
                r_squared: r_squared(&col, y),
                lasso_coefficient: lc,
                ridge_coefficient: rc,
                lasso_zeroed: lc == 0.0,
                ridge_zeroed: rc.abs() <= RIDGE_ZERO_FRACTION * ridge_max,
            }
        })
        .collect();

    Ok(DiagnosticsReport {
        predictors,
        lasso_lambda: lasso.lambda,
        ridge_lambda: ridge.lambda,
        lasso_path: trace(x, y, 1.0, cfg)?,
        ridge_path: trace(x, y, 0.0, cfg)?,
    })
}
