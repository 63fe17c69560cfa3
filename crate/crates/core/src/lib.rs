//! Landmark persistence scoring for 2D feature maps.
//!
//! Per-landmark predictors are computed from repeated drive logs, regressed
//! against an empirical re-observation probability with a cross-validated
//! elastic net, and the resulting scores drive map pruning. An EKF compares
//! localisation quality of score-pruned and track-length-pruned maps.

pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod labeling;
pub mod pipeline;
pub mod predictors;
pub mod regression;
pub mod selection;
pub mod simulator;
pub mod types;

pub use error::{Error, Result};
