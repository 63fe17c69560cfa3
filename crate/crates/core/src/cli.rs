//! Command-line front end. Exit status 0 on success, 1 on invalid input or
//! failed validation, 2 on usage errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{curves_to_csv, drop_curve, summary_table};
use crate::io::{align_to_map, load_id_values, load_map, load_sessions, save_id_values, save_map, save_sessions, write_string};
use crate::labeling::{empirical_probability, LabelVector};
use crate::pipeline::run_experiment;
use crate::predictors::{build_matrix, PredictorMatrix, TRACK_LENGTH};
use crate::regression::{fit_scoring_model, ScoringModel};
use crate::selection::{find_threshold, prune_map};
use crate::simulator::simulate_dataset;

#[derive(Debug, Parser)]
#[command(name = "featmap", version, about = "Score, prune and evaluate landmark maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// key=value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration file
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world and its drive logs
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the per-landmark predictor matrix
    Predictors {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
        /// Neighbourhood radius in metres
        #[arg(long, default_value_t = crate::predictors::DEFAULT_RADIUS)]
        radius: f64,
    },
    /// Compute empirical re-observation labels
    Label {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the cross-validated elastic-net scoring model
    Fit {
        #[arg(long)]
        predictors: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score landmarks with a fitted model
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        predictors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a map into kept and discarded landmarks at the density threshold
    Prune {
        #[arg(long)]
        map: PathBuf,
        /// `landmark_id,score` CSV
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Model file, used with --predictors when no scores are given
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        predictors: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Localisation covariance versus drop rate for both rankings
    Evaluate {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Held-out session directory
        #[arg(long)]
        sessions: PathBuf,
        /// Predictor CSV supplying the track-length baseline; computed from
        /// the sessions when absent
        #[arg(long)]
        predictors: Option<PathBuf>,
        /// Comma-separated, strictly increasing drop rates
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, fit, prune and evaluate in one go
    Reproduce {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("missing {what}: {}", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("missing {what}: {}", path.display())))
    }
}

fn load_inputs(map: &Path, sessions: &Path) -> Result<(crate::types::FeatureMap, Vec<crate::types::SessionLog>)> {
    require_file(map, "map file")?;
    require_dir(sessions, "session directory")?;
    let map = load_map(map)?;
    let sessions = load_sessions(sessions)?;
    for s in &sessions {
        s.validate_against(&map)?;
    }
    Ok((map, sessions))
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { cfg, out } => {
            let cfg = cfg.load()?;
            let (world, sessions) = simulate_dataset(&cfg.world)?;
            save_map(&world.map, out.join("map.txt"))?;
            save_sessions(&sessions, out.join("sessions"))?;
            write_string(&out.join("ground_truth.csv"), &world.ground_truth_csv())?;
            println!(
                "{} landmarks, {} sessions written to {}",
                world.map.len(),
                sessions.len(),
                out.display()
            );
        }
        Command::Predictors { map, sessions, out, radius } => {
            let (map, sessions) = load_inputs(&map, &sessions)?;
            build_matrix(&map, &sessions, radius)?.save(&out)?;
        }
        Command::Label { map, sessions, out } => {
            let (map, sessions) = load_inputs(&map, &sessions)?;
            let labels = empirical_probability(&map, &sessions)?;
            let ids: Vec<_> = map.ids().collect();
            save_id_values(&out, "label", &ids, labels.values())?;
        }
        Command::Fit { predictors, labels, out, cfg } => {
            require_file(&predictors, "predictor file")?;
            require_file(&labels, "label file")?;
            let cfg = cfg.load()?;
            let matrix = PredictorMatrix::load(&predictors)?;
            let labels = align_labels(&matrix, &load_id_values(&labels)?)?;
            let model = fit_scoring_model(&matrix, &labels, &cfg.model)?;
            model.save(&out)?;
            println!("alpha={} lambda={}", model.alpha, model.lambda);
        }
        Command::Score { model, predictors, out } => {
            require_file(&model, "model file")?;
            require_file(&predictors, "predictor file")?;
            let model = ScoringModel::load(&model)?;
            let matrix = PredictorMatrix::load(&predictors)?;
            let scores = model.score(&matrix)?;
            save_id_values(&out, "score", &scores.ids, &scores.scores)?;
        }
        Command::Prune { map, scores, model, predictors, out } => {
            require_file(&map, "map file")?;
            let map = load_map(&map)?;
            let values = match (scores, model) {
                (Some(s), _) => {
                    require_file(&s, "score file")?;
                    align_to_map(&map, &load_id_values(&s)?, "score file")?
                }
                (None, Some(m)) => {
                    require_file(&m, "model file")?;
                    let p = predictors.ok_or_else(|| {
                        Error::InvalidInput("missing predictor file: --model needs --predictors".into())
                    })?;
                    require_file(&p, "predictor file")?;
                    let sv = ScoringModel::load(&m)?.score(&PredictorMatrix::load(&p)?)?;
                    let rows: Vec<_> = sv.ids.into_iter().zip(sv.scores).collect();
                    align_to_map(&map, &rows, "predictor file")?
                }
                (None, None) => {
                    return Err(Error::InvalidInput(
                        "missing model file: give --model with --predictors, or --scores".into(),
                    ))
                }
            };
            let report = find_threshold(&values)?;
            let (kept, discarded) = prune_map(&map, &values, report.threshold)?;
            save_map(&kept, out.join("kept_map.txt"))?;
            save_map(&discarded, out.join("discarded_map.txt"))?;
            write_string(&out.join("threshold.txt"), &report.to_text())?;
            println!(
                "threshold {} kept {} discarded {}{}",
                report.threshold,
                kept.len(),
                discarded.len(),
                if report.unimodal_fallback { " (unimodal fallback)" } else { "" }
            );
        }
        Command::Evaluate { map, scores, sessions, predictors, rates, cfg, out } => {
            require_file(&scores, "score file")?;
            let (map, sessions) = load_inputs(&map, &sessions)?;
            let cfg = cfg.load()?;
            let rates = if rates.is_empty() { cfg.rates.clone() } else { rates };
            let score_values = align_to_map(&map, &load_id_values(&scores)?, "score file")?;
            let matrix = match predictors {
                Some(p) => {
                    require_file(&p, "predictor file")?;
                    PredictorMatrix::load(&p)?
                }
                None => build_matrix(&map, &sessions, cfg.radius)?,
            };
            let track = matrix
                .column(TRACK_LENGTH)
                .ok_or_else(|| Error::Validation("predictor file lacks track_length".into()))?;
            let rows: Vec<_> = matrix.ids.iter().copied().zip(track).collect();
            let track = align_to_map(&map, &rows, "predictor file")?;
            let (a, b) = drop_curve(&map, &score_values, &track, &sessions, &rates, &cfg.ekf)?;
            write_string(&out.join("eval.csv"), &curves_to_csv(&[&a, &b]))?;
            let table = summary_table(&a, &b);
            write_string(&out.join("eval_summary.txt"), &table)?;
            print!("{table}");
        }
        Command::Reproduce { seed, config, out } => {
            let cfg = ConfigArgs { config, seed: Some(seed) }.load()?;
            let exp = run_experiment(&cfg)?;
            exp.save(&out)?;
            println!(
                "trained on {} sessions, evaluated on {}; threshold {} keeps {} of {}",
                exp.n_train,
                exp.sessions.len() - exp.n_train,
                exp.threshold.threshold,
                exp.kept.len(),
                exp.world.map.len()
            );
            print!("{}", summary_table(&exp.score_curve, &exp.baseline_curve));
        }
    }
    Ok(())
}

fn align_labels(matrix: &PredictorMatrix, rows: &[(crate::types::LandmarkId, f64)]) -> Result<LabelVector> {
    let lookup: std::collections::HashMap<_, _> = rows.iter().copied().collect();
    if lookup.len() != rows.len() {
        return Err(Error::Validation("label file lists a landmark twice".into()));
    }
    matrix
        .ids
        .iter()
        .map(|id| {
            lookup
                .get(id)
                .copied()
                .ok_or_else(|| Error::Validation(format!("no label for landmark {id}")))
        })
        .collect::<Result<Vec<_>>>()
        .map(LabelVector)
}
