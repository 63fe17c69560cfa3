//! Localisation quality of pruned maps: covariance versus drop rate for the
//! score ranking and the track-length baseline.

pub mod ekf;

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::selection::rank_subset;
use crate::types::{FeatureMap, SessionLog};

pub use ekf::{
    ekf_localize, max_cov_magnitude, EkfParams, EkfRun, EkfState, MotionNoise, SensorNoise,
    CHI2_GATE_2DOF,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Score,
    TrackLength,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Score, Strategy::TrackLength];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Score => "score",
            Strategy::TrackLength => "track_length",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub drop_rate: f64,
    /// Mean over sessions of the run's largest position eigenvalue.
    pub max_cov: f64,
    /// Mean over sessions of the run's largest position trace.
    pub max_trace: f64,
    pub mean_association_rate: f64,
    /// Set when any session's run failed.
    pub failed: bool,
    pub landmarks_kept: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub strategy: Strategy,
    pub points: Vec<EvalPoint>,
}

impl EvalCurve {
    /// Lowest drop rate at which localisation failed.
    pub fn first_failure(&self) -> Option<f64> {
        self.points.iter().find(|p| p.failed).map(|p| p.drop_rate)
    }

    pub fn at(&self, drop_rate: f64) -> Option<&EvalPoint> {
        self.points.iter().find(|p| p.drop_rate == drop_rate)
    }
}

pub fn validate_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::InvalidInput("no drop rates given".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(Error::InvalidInput(format!("drop rate {r} outside [0, 1)")));
    }
    if rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("drop rates must be strictly increasing".into()));
    }
    Ok(())
}

/// Prunes the map at each rate under both rankings and localises every
/// held-out session against the result. Cells run in parallel; each one is
/// seeded independently so the output does not depend on scheduling.
pub fn drop_curve(
    map: &FeatureMap,
    scores: &[f64],
    baseline_keys: &[f64],
    eval_sessions: &[SessionLog],
    drop_rates: &[f64],
    params: &EkfParams,
) -> Result<(EvalCurve, EvalCurve)> {
    validate_rates(drop_rates)?;
    if eval_sessions.is_empty() {
        return Err(Error::InvalidInput("no evaluation sessions".into()));
    }
    let mut maps = Vec::with_capacity(2 * drop_rates.len());
    for strategy in Strategy::ALL {
        let keys = match strategy {
            Strategy::Score => scores,
            Strategy::TrackLength => baseline_keys,
        };
        for &rate in drop_rates {
            maps.push((strategy, rate, rank_subset(map, keys, rate)?));
        }
    }

    let cells: Vec<(usize, usize)> = (0..maps.len())
        .flat_map(|m| (0..eval_sessions.len()).map(move |s| (m, s)))
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(m, s)| {
            let pruned = &maps[m].2;
            if pruned.is_empty() {
                return Ok(None);
            }
            ekf_localize(pruned, &eval_sessions[s], params).map(Some)
        })
        .collect::<Result<Vec<Option<EkfRun>>>>()?;

    let n_sessions = eval_sessions.len() as f64;
    let mut curves = Strategy::ALL.map(|strategy| EvalCurve {
        strategy,
        points: Vec::with_capacity(drop_rates.len()),
    });
    for (m, (strategy, rate, pruned)) in maps.iter().enumerate() {
        let cell_runs = &runs[m * eval_sessions.len()..(m + 1) * eval_sessions.len()];
        let point = if cell_runs.iter().any(Option::is_none) {
            EvalPoint {
                drop_rate: *rate,
                max_cov: f64::INFINITY,
                max_trace: f64::INFINITY,
                mean_association_rate: 0.0,
                failed: true,
                landmarks_kept: 0,
            }
        } else {
            let runs: Vec<&EkfRun> = cell_runs.iter().flatten().collect();
            EvalPoint {
                drop_rate: *rate,
                max_cov: runs.iter().map(|r| r.max_cov()).sum::<f64>() / n_sessions,
                max_trace: runs.iter().map(|r| r.max_position_trace).sum::<f64>() / n_sessions,
                mean_association_rate: runs.iter().map(|r| r.association_rate()).sum::<f64>()
                    / n_sessions,
                failed: runs.iter().any(|r| r.failed),
                landmarks_kept: pruned.len(),
            }
        };
        let idx = usize::from(*strategy == Strategy::TrackLength);
        curves[idx].points.push(point);
    }
    let [score, track] = curves;
    Ok((score, track))
}

/// `strategy,drop_rate,max_cov,failed`
pub fn curves_to_csv(curves: &[&EvalCurve]) -> String {
    let mut out = String::from("strategy,drop_rate,max_cov,failed\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(out, "{},{},{},{}", c.strategy, p.drop_rate, p.max_cov, p.failed);
        }
    }
    out
}

/// Fixed-width side-by-side table of both curves.
pub fn summary_table(score: &EvalCurve, baseline: &EvalCurve) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>9}  {:>12} {:>12} {:>6}  {:>12} {:>12} {:>6}",
        "drop_rate", "score_cov", "score_trace", "fail", "track_cov", "track_trace", "fail"
    );
    for (a, b) in score.points.iter().zip(&baseline.points) {
        let _ = writeln!(
            out,
            "{:>9.3}  {:>12.5} {:>12.5} {:>6}  {:>12.5} {:>12.5} {:>6}",
            a.drop_rate, a.max_cov, a.max_trace, a.failed, b.max_cov, b.max_trace, b.failed
        );
    }
    let fmt_fail = |c: &EvalCurve| c.first_failure().map_or("none".to_string(), |r| format!("{r}"));
    let _ = writeln!(out, "first failure: score={} track_length={}", fmt_fail(score), fmt_fail(baseline));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{DetectionEvent, Landmark, LandmarkClass, VehiclePose};
    use crate::types::wrap_angle;

    fn world() -> (FeatureMap, Vec<SessionLog>) {
        let lms: Vec<Landmark> = (0..40)
            .map(|i| {
                let side = if i % 2 == 0 { 5.0 } else { -6.0 };
                Landmark::new(i, i as f64 * 2.5, side, LandmarkClass::Pole)
            })
            .collect();
        let map = FeatureMap::new("m", lms).unwrap();
        let sessions = (0..2)
            .map(|s| {
                let poses: Vec<VehiclePose> = (0..80)
                    .map(|i| VehiclePose::new(i as f64, i as f64 * 1.2, 0.0, 0.0))
                    .collect();
                let mut events = Vec::new();
                for (i, p) in poses.iter().enumerate() {
                    for lm in map.landmarks() {
                        let (dx, dy) = (lm.x - p.x, lm.y - p.y);
                        if dx.hypot(dy) < 25.0 {
                            events.push(DetectionEvent {
                                pose_index: i,
                                landmark_id: lm.id,
                                range: dx.hypot(dy),
                                bearing: wrap_angle(dy.atan2(dx) - p.heading),
                            });
                        }
                    }
                }
                SessionLog::new(s, poses, events).unwrap()
            })
            .collect();
        (map, sessions)
    }

    #[test]
    fn zero_rate_matches_across_strategies() {
        let (map, sessions) = world();
        let scores: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let track: Vec<f64> = (0..40).map(|i| -(i as f64)).collect();
        let (a, b) = drop_curve(&map, &scores, &track, &sessions, &[0.0, 0.5], &EkfParams::default()).unwrap();
        assert_eq!(a.points[0].max_cov, b.points[0].max_cov);
        assert_eq!(a.points[0].failed, b.points[0].failed);
        assert!(!a.points[0].failed);
        assert_eq!(a.points[1].landmarks_kept, 20);
    }

    #[test]
    fn near_total_drop_fails() {
        let (map, sessions) = world();
        let keys: Vec<f64> = (0..40).map(f64::from).collect();
        let (a, b) = drop_curve(&map, &keys, &keys, &sessions, &[0.99], &EkfParams::default()).unwrap();
        assert!(a.points[0].failed && b.points[0].failed);
        assert_eq!(a.first_failure(), Some(0.99));
    }

    #[test]
    fn rates_must_increase() {
        assert!(validate_rates(&[0.2, 0.1]).is_err());
        assert!(validate_rates(&[0.2, 0.2]).is_err());
        assert!(validate_rates(&[1.0]).is_err());
        assert!(validate_rates(&[]).is_err());
        assert!(validate_rates(&[0.0, 0.5]).is_ok());
    }

    #[test]
    fn csv_rows() {
        let (map, sessions) = world();
        let keys: Vec<f64> = (0..40).map(f64::from).collect();
        let rates = [0.0, 0.2, 0.35, 0.5, 0.7];
        let (a, b) = drop_curve(&map, &keys, &keys, &sessions, &rates, &EkfParams::default()).unwrap();
        let csv = curves_to_csv(&[&a, &b]);
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("strategy,drop_rate,max_cov,failed\n"));
        assert!(summary_table(&a, &b).contains("first failure"));
    }
}
