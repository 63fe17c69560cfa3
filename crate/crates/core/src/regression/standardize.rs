use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScale {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator), always > 0.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedColumn {
    pub name: String,
    pub reason: String,
}

/// Column means and SDs for the retained predictors, plus the columns that
/// were dropped for having no variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub columns: Vec<ColumnScale>,
    pub excluded: Vec<ExcludedColumn>,
}

impl Standardization {
    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Applies the stored scaling to a matrix whose columns are named by
    /// `names`. Every retained column must be present.
    pub fn apply(&self, x: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = self
            .columns
            .iter()
            .map(|c| {
                names.iter().position(|n| *n == c.name).ok_or_else(|| {
                    Error::InvalidInput(format!("column `{}` missing from input matrix", c.name))
                })
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(x.nrows(), idx.len(), |i, j| {
            let c = &self.columns[j];
            (x[(i, idx[j])] - c.mean) / c.sd
        }))
    }
}

fn is_zero_variance(mean: f64, sd: f64) -> bool {
    !(sd > 1e-12 * mean.abs().max(1.0))
}

/// Centres each column and scales it to unit sample SD. Constant columns
/// are dropped and recorded in [`Standardization::excluded`].
pub fn standardize(x: &DMatrix<f64>, names: &[String]) -> Result<(DMatrix<f64>, Standardization)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "standardisation needs at least 2 rows, got {n}"
        )));
    }
    if names.len() != x.ncols() {
        return Err(Error::InvalidInput(format!(
            "{} column names for {} columns",
            names.len(),
            x.ncols()
        )));
    }
    let mut columns = Vec::new();
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if !sd.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidInput(format!("column `{}` has non-finite values", names[j])));
        }
        if is_zero_variance(mean, sd) {
            excluded.push(ExcludedColumn {
                name: names[j].clone(),
                reason: "zero variance".into(),
            });
        } else {
            columns.push(ColumnScale {
                name: names[j].clone(),
                mean,
                sd,
            });
            kept.push(j);
        }
    }
    let out = DMatrix::from_fn(n, kept.len(), |i, k| {
        let c = &columns[k];
        (x[(i, kept[k])] - c.mean) / c.sd
    });
    Ok((out, Standardization { columns, excluded }))
}
