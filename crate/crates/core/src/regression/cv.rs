//! k-fold cross-validation over an (alpha, lambda) grid with the one-SD rule.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::elastic_net::{CdOptions, CenteredProblem, PenalizedFit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub alphas: Vec<f64>,
    /// Fixed penalty path shared by every alpha. When `None`, each alpha gets
    /// `n_lambdas` log-spaced values from its own lambda_max.
    pub lambda_path: Option<Vec<f64>>,
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    pub folds: usize,
    pub seed: u64,
    pub cd: CdOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            lambda_path: None,
            n_lambdas: 100,
            lambda_min_ratio: 1e-4,
            folds: 10,
            seed: 0,
            cd: CdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub alpha: f64,
    pub lambda: f64,
    pub mean_mse: f64,
    pub sd_mse: f64,
    /// Held-out MSE of each fold, in fold order.
    pub fold_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub alpha: f64,
    pub lambda: f64,
    /// Refit on all rows at the selected (alpha, lambda).
    pub fit: PenalizedFit,
    /// Grouped by alpha (grid order), lambdas decreasing within a group.
    pub table: Vec<CvCell>,
    /// Cell with the lowest mean error for the selected alpha.
    pub min_cell: usize,
    pub selected_cell: usize,
}

/// Assigns each row to one of `k` folds after a seeded shuffle.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k;
    }
    fold
}

fn rows_where(x: &DMatrix<f64>, y: &[f64], mask: impl Fn(usize) -> bool) -> (DMatrix<f64>, Vec<f64>) {
    let rows: Vec<usize> = (0..x.nrows()).filter(|&i| mask(i)).collect();
    let sub = DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]);
    (sub, rows.iter().map(|&i| y[i]).collect())
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Index of the largest lambda (earliest on a decreasing path) whose mean
/// error is within one SD of the minimum.
pub fn one_sd_rule(cells: &[CvCell]) -> (usize, usize) {
    let min = cells
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mean_mse.total_cmp(&b.1.mean_mse))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let bound = cells[min].mean_mse + cells[min].sd_mse;
    let chosen = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.mean_mse <= bound)
        .max_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(min);
    (min, chosen)
}

/// Cross-validates the elastic net on `x` (expected standardised) and
/// refits the selected model on all rows.
pub fn cross_validate(x: &DMatrix<f64>, y: &[f64], cfg: &CvConfig) -> Result<CvResult> {
    let n = x.nrows();
    if cfg.folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {}", cfg.folds)));
    }
    if cfg.folds > n {
        return Err(Error::InvalidInput(format!(
            "{} folds requested for {n} rows",
            cfg.folds
        )));
    }
    if cfg.alphas.is_empty() {
        return Err(Error::InvalidInput("alpha grid is empty".into()));
    }
    let full = CenteredProblem::new(x, y)?;
    let paths: Vec<Vec<f64>> = cfg
        .alphas
        .iter()
        .map(|&a| match &cfg.lambda_path {
            Some(p) => {
                let mut p = p.clone();
                p.sort_by(|a, b| b.total_cmp(a));
                p
            }
            None => full.lambda_path(a, cfg.n_lambdas, cfg.lambda_min_ratio),
        })
        .collect();
    if paths.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidInput("lambda path is empty".into()));
    }

    let folds = fold_assignment(n, cfg.folds, cfg.seed);
    let splits: Vec<_> = (0..cfg.folds)
        .map(|f| {
            let train = rows_where(x, y, |i| folds[i] != f);
            let test = rows_where(x, y, |i| folds[i] == f);
            (train, test)
        })
        .collect();

    // errors[alpha][fold][lambda]
    let tasks: Vec<(usize, usize)> = (0..cfg.alphas.len())
        .flat_map(|a| (0..cfg.folds).map(move |f| (a, f)))
        .collect();
    let fold_errors: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(a, f)| -> Result<Vec<f64>> {
            let ((xt, yt), (xv, yv)) = &splits[f];
            let problem = CenteredProblem::new(xt, yt)?;
            let fits = problem.solve_path(cfg.alphas[a], &paths[a], &cfg.cd)?;
            Ok(fits
                .iter()
                .map(|fit| {
                    let pred = CenteredProblem::predict(xv, fit);
                    pred.iter().zip(yv).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / yv.len() as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::new();
    let mut per_alpha = Vec::new();
    for (a, &alpha) in cfg.alphas.iter().enumerate() {
        let start = table.len();
        for (l, &lambda) in paths[a].iter().enumerate() {
            let fold_mse: Vec<f64> = (0..cfg.folds)
                .map(|f| fold_errors[a * cfg.folds + f][l])
                .collect();
            let (mean_mse, sd_mse) = mean_sd(&fold_mse);
            table.push(CvCell {
                alpha,
                lambda,
                mean_mse,
                sd_mse,
                fold_mse,
            });
        }
        per_alpha.push(start..table.len());
    }

    // alpha with the lowest achievable mean error; ties go to the first
    let best_alpha = per_alpha
        .iter()
        .enumerate()
        .map(|(a, r)| {
            let best = table[r.clone()]
                .iter()
                .map(|c| c.mean_mse)
                .fold(f64::INFINITY, f64::min);
            (a, best)
        })
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
        .map(|(a, _)| a)
        .expect("non-empty alpha grid");
    let range = per_alpha[best_alpha].clone();
    let (min_local, chosen_local) = one_sd_rule(&table[range.clone()]);
    let alpha = cfg.alphas[best_alpha];
    let lambda = table[range.start + chosen_local].lambda;

    // Refit along the same path down to the chosen penalty so the final
    // solution follows the same warm-start sequence as the folds.
    let path = &paths[best_alpha][..=chosen_local];
    let fit = full
        .solve_path(alpha, path, &cfg.cd)?
        .pop()
        .expect("path has at least one value");

    Ok(CvResult {
        alpha,
        lambda,
        fit,
        table,
        min_cell: range.start + min_local,
        selected_cell: range.start + chosen_local,
    })
}
