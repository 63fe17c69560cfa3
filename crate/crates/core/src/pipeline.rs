//! End-to-end run on a simulated world: fit on the early sessions, prune,
//! and evaluate both rankings on the held-out later sessions.

use std::path::Path;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{curves_to_csv, drop_curve, summary_table, EvalCurve};
use crate::io::{save_id_values, save_map, save_sessions, write_string};
use crate::labeling::{empirical_probability, LabelVector};
use crate::predictors::{build_matrix, PredictorMatrix, TRACK_LENGTH};
use crate::regression::diagnostics::predictor_diagnostics;
use crate::regression::{fit_scoring_model, standardize, DiagnosticsReport, ScoreVector, ScoringModel};
use crate::selection::{find_threshold, prune_map, ThresholdReport};
use crate::simulator::{simulate_dataset, World};
use crate::types::{FeatureMap, SessionLog};

#[derive(Debug, Clone)]
pub struct Experiment {
    pub world: World,
    pub sessions: Vec<SessionLog>,
    pub n_train: usize,
    pub predictors: PredictorMatrix,
    pub labels: LabelVector,
    pub model: ScoringModel,
    pub diagnostics: DiagnosticsReport,
    pub scores: ScoreVector,
    pub threshold: ThresholdReport,
    pub kept: FeatureMap,
    pub discarded: FeatureMap,
    pub score_curve: EvalCurve,
    pub baseline_curve: EvalCurve,
}

impl Experiment {
    pub fn train_sessions(&self) -> &[SessionLog] {
        &self.sessions[..self.n_train]
    }

    pub fn eval_sessions(&self) -> &[SessionLog] {
        &self.sessions[self.n_train..]
    }

    /// Track length per landmark over the training sessions, map order.
    pub fn track_lengths(&self) -> Vec<f64> {
        self.predictors
            .column(TRACK_LENGTH)
            .expect("predictor matrix always carries track_length")
    }

    /// Writes every artefact under `dir`. Tabular outputs are CSV.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let world_dir = dir.join("world");
        save_map(&self.world.map, world_dir.join("map.txt"))?;
        save_sessions(&self.sessions, world_dir.join("sessions"))?;
        write_string(&world_dir.join("ground_truth.csv"), &self.world.ground_truth_csv())?;
        self.predictors.save(dir.join("predictors.csv"))?;
        save_id_values(dir.join("labels.csv"), "label", &self.predictors.ids, self.labels.values())?;
        self.model.save(dir.join("model.txt"))?;
        write_string(&dir.join("diagnostics.csv"), &self.diagnostics.to_csv())?;
        save_id_values(dir.join("scores.csv"), "score", &self.scores.ids, &self.scores.scores)?;
        write_string(&dir.join("threshold.txt"), &self.threshold.to_text())?;
        save_map(&self.kept, dir.join("kept_map.txt"))?;
        save_map(&self.discarded, dir.join("discarded_map.txt"))?;
        write_string(
            &dir.join("eval.csv"),
            &curves_to_csv(&[&self.score_curve, &self.baseline_curve]),
        )?;
        write_string(
            &dir.join("eval_summary.txt"),
            &summary_table(&self.score_curve, &self.baseline_curve),
        )?;
        Ok(())
    }
}

pub fn run_experiment(cfg: &PipelineConfig) -> Result<Experiment> {
    let (world, sessions) = simulate_dataset(&cfg.world)?;
    let n_train = cfg.train_sessions(sessions.len());
    if n_train < 2 || n_train >= sessions.len() {
        return Err(Error::InvalidInput(format!(
            "{} sessions cannot be split into at least two training sessions and one held out",
            sessions.len()
        )));
    }
    let train = &sessions[..n_train];
    let map = &world.map;

    let predictors = build_matrix(map, train, cfg.radius)?;
    let labels = empirical_probability(map, train)?;
    let model = fit_scoring_model(&predictors, &labels, &cfg.model)?;

    let names = cfg.model.model_columns(&predictors.column_names)?;
    let selected = predictors.select(&names)?;
    let (z, st) = standardize(&selected.data, &names)?;
    let diagnostics = predictor_diagnostics(&z, labels.values(), &st.column_names(), &cfg.model.cv)?;

    let scores = model.score(&predictors)?;
    let threshold = find_threshold(&scores.scores)?;
    let (kept, discarded) = prune_map(map, &scores.scores, threshold.threshold)?;

    let track = predictors
        .column(TRACK_LENGTH)
        .ok_or_else(|| Error::Validation("predictor matrix lacks track_length".into()))?;
    let (score_curve, baseline_curve) = drop_curve(
        map,
        &scores.scores,
        &track,
        &sessions[n_train..],
        &cfg.rates,
        &cfg.ekf,
    )?;

    Ok(Experiment {
        world,
        sessions,
        n_train,
        predictors,
        labels,
        model,
        diagnostics,
        scores,
        threshold,
        kept,
        discarded,
        score_curve,
        baseline_curve,
    })
}
