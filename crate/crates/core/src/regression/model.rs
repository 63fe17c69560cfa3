use std::fmt::Write as _;
use std::path::Path;

use super::cv::{cross_validate, CvConfig};
use super::standardize::{standardize, ColumnScale, ExcludedColumn, Standardization};
use crate::error::{Error, Result};
use crate::labeling::LabelVector;
use crate::predictors::{PredictorMatrix, COLUMNS, CR_TIMES_VIEWS, MAX_POSSIBLE_SPANNED_ANGLE};
use crate::types::LandmarkId;

/// Which predictor columns feed the model. `cr_times_views` is always used.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub excluded_columns: Vec<String>,
    pub cv: CvConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            excluded_columns: vec![MAX_POSSIBLE_SPANNED_ANGLE.to_string()],
            cv: CvConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn model_columns(&self, available: &[String]) -> Result<Vec<String>> {
        if self.excluded_columns.iter().any(|c| c == CR_TIMES_VIEWS) {
            return Err(Error::InvalidInput(format!("`{CR_TIMES_VIEWS}` cannot be excluded")));
        }
        if let Some(bad) = self
            .excluded_columns
            .iter()
            .find(|c| !COLUMNS.contains(&c.as_str()))
        {
            return Err(Error::InvalidInput(format!("unknown predictor column `{bad}`")));
        }
        if !available.iter().any(|c| c == CR_TIMES_VIEWS) {
            return Err(Error::InvalidInput(format!("predictor matrix lacks `{CR_TIMES_VIEWS}`")));
        }
        Ok(available
            .iter()
            .filter(|c| !self.excluded_columns.contains(c))
            .cloned()
            .collect())
    }
}

/// One row of the stored cross-validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub alpha: f64,
    pub lambda: f64,
    pub mean_mse: f64,
    pub sd_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringModel {
    pub standardization: Standardization,
    /// Standardised-space coefficients, one per retained column.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub cv_table: Vec<CvSummary>,
}

/// Per-landmark scores aligned with the predictor matrix row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub ids: Vec<LandmarkId>,
    pub scores: Vec<f64>,
}

const HEADER: &str = "# featmap scoring model v1";

impl ScoringModel {
    pub fn column_names(&self) -> Vec<String> {
        self.standardization.column_names()
    }

    /// Coefficients and intercept on the original predictor scale.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let cols = &self.standardization.columns;
        let coefs: Vec<f64> = self.coefficients.iter().zip(cols).map(|(b, c)| b / c.sd).collect();
        let shift: f64 = coefs.iter().zip(cols).map(|(b, c)| b * c.mean).sum();
        (coefs, self.intercept - shift)
    }

    pub fn score(&self, matrix: &PredictorMatrix) -> Result<ScoreVector> {
        let z = self.standardization.apply(&matrix.data, &matrix.column_names)?;
        let scores = (0..z.nrows())
            .map(|i| {
                self.intercept
                    + z.row(i)
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(v, b)| v * b)
                        .sum::<f64>()
            })
            .collect();
        Ok(ScoreVector {
            ids: matrix.ids.clone(),
            scores,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "alpha={}", self.alpha);
        let _ = writeln!(out, "lambda={}", self.lambda);
        let _ = writeln!(out, "intercept={}", self.intercept);
        out.push_str("[columns]\nname,mean,sd,coefficient\n");
        for (c, b) in self.standardization.columns.iter().zip(&self.coefficients) {
            let _ = writeln!(out, "{},{},{},{}", c.name, c.mean, c.sd, b);
        }
        out.push_str("[excluded]\nname,reason\n");
        for e in &self.standardization.excluded {
            let _ = writeln!(out, "{},{}", e.name, e.reason);
        }
        out.push_str("[cv]\nalpha,lambda,mean_mse,sd_mse\n");
        for c in &self.cv_table {
            let _ = writeln!(out, "{},{},{},{}", c.alpha, c.lambda, c.mean_mse, c.sd_mse);
        }
        out
    }

    pub fn from_text(text: &str, path: &Path) -> Result<ScoringModel> {
        let mut alpha = None;
        let mut lambda = None;
        let mut intercept = None;
        let mut columns = Vec::new();
        let mut coefficients = Vec::new();
        let mut excluded = Vec::new();
        let mut cv_table = Vec::new();
        let mut section = "";
        let mut expect_header = false;

        let num = |raw: &str, ln: usize| -> Result<f64> {
            raw.trim()
                .parse()
                .map_err(|_| Error::parse(path, ln, format!("bad number `{raw}`")))
        };

        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = match line {
                    "[columns]" => "columns",
                    "[excluded]" => "excluded",
                    "[cv]" => "cv",
                    other => return Err(Error::parse(path, ln, format!("unknown section {other}"))),
                };
                expect_header = true;
                continue;
            }
            if expect_header {
                expect_header = false;
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            match section {
                "" => {
                    let (k, v) = line
                        .split_once('=')
                        .ok_or_else(|| Error::parse(path, ln, "expected key=value"))?;
                    let v = num(v, ln)?;
                    match k.trim() {
                        "alpha" => alpha = Some(v),
                        "lambda" => lambda = Some(v),
                        "intercept" => intercept = Some(v),
                        other => return Err(Error::parse(path, ln, format!("unknown key `{other}`"))),
                    }
                }
                "columns" => {
                    if parts.len() != 4 {
                        return Err(Error::parse(path, ln, "expected name,mean,sd,coefficient"));
                    }
                    let sd = num(parts[2], ln)?;
                    if !(sd > 0.0) {
                        return Err(Error::parse(path, ln, "column sd must be positive"));
                    }
                    columns.push(ColumnScale {
                        name: parts[0].to_string(),
                        mean: num(parts[1], ln)?,
                        sd,
                    });
                    coefficients.push(num(parts[3], ln)?);
                }
                "excluded" => {
                    let (name, reason) = line
                        .split_once(',')
                        .ok_or_else(|| Error::parse(path, ln, "expected name,reason"))?;
                    excluded.push(ExcludedColumn {
                        name: name.to_string(),
                        reason: reason.to_string(),
                    });
                }
                "cv" => {
                    if parts.len() != 4 {
                        return Err(Error::parse(path, ln, "expected alpha,lambda,mean_mse,sd_mse"));
                    }
                    cv_table.push(CvSummary {
                        alpha: num(parts[0], ln)?,
                        lambda: num(parts[1], ln)?,
                        mean_mse: num(parts[2], ln)?,
                        sd_mse: num(parts[3], ln)?,
                    });
                }
                _ => unreachable!(),
            }
        }
        let missing = |k: &str| Error::parse(path, 0, format!("model file lacks `{k}`"));
        Ok(ScoringModel {
            standardization: Standardization { columns, excluded },
            coefficients,
            intercept: intercept.ok_or_else(|| missing("intercept"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            lambda: lambda.ok_or_else(|| missing("lambda"))?,
            cv_table,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScoringModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScoringModel::from_text(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_string(path.as_ref(), &self.to_text())
    }
}

/// Selects the configured columns, standardises them, cross-validates the
/// elastic net and packages the result.
pub fn fit_scoring_model(
    matrix: &PredictorMatrix,
    labels: &LabelVector,
    config: &ModelConfig,
) -> Result<ScoringModel> {
    if labels.0.len() != matrix.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} predictor rows",
            labels.0.len(),
            matrix.nrows()
        )));
    }
    let names = config.model_columns(&matrix.column_names)?;
    let selected = matrix.select(&names)?;
    let (z, standardization) = standardize(&selected.data, &names)?;
    if z.ncols() == 0 {
        return Err(Error::InvalidInput("every predictor column has zero variance".into()));
    }
    let cv = cross_validate(&z, labels.values(), &config.cv)?;
    Ok(ScoringModel {
        standardization,
        coefficients: cv.fit.coefficients,
        intercept: cv.fit.intercept,
        alpha: cv.alpha,
        lambda: cv.lambda,
        cv_table: cv
            .table
            .iter()
            .map(|c| CvSummary {
                alpha: c.alpha,
                lambda: c.lambda,
                mean_mse: c.mean_mse,
                sd_mse: c.sd_mse,
            })
            .collect(),
    })
}
