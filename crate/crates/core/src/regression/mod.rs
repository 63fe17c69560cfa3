//! Predictor standardisation, elastic-net fitting with cross-validated
//! penalty selection, and landmark scoring.

pub mod cv;
pub mod diagnostics;
pub mod elastic_net;
pub mod model;
pub mod standardize;

pub use cv::{cross_validate, CvCell, CvConfig, CvResult};
pub use diagnostics::{predictor_diagnostics, DiagnosticsReport, PredictorDiagnostic};
pub use elastic_net::{fit_penalized, CdOptions, CenteredProblem, PenalizedFit};
pub use model::{fit_scoring_model, ModelConfig, ScoreVector, ScoringModel};
pub use standardize::{standardize, Standardization};
