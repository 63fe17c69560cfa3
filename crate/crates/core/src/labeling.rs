//! Empirical re-observation probability, the regression target.

use crate::error::{Error, Result};
use crate::types::{FeatureMap, SessionLog};

/// Per-landmark label in [0, 1], aligned with map (id) order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector(pub Vec<f64>);

impl LabelVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Detection share across all sessions, rescaled so the most frequently
/// matched landmark has 1, then weighted by the fraction of sessions in
/// which the landmark was matched at least once.
pub fn empirical_probability(map: &FeatureMap, sessions: &[SessionLog]) -> Result<LabelVector> {
    if sessions.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "labelling needs at least 2 sessions, got {}",
            sessions.len()
        )));
    }
    let n = map.len();
    let mut detections = vec![0u64; n];
    let mut sessions_seen = vec![0u32; n];
    let mut total = 0u64;
    let mut seen_here = vec![false; n];

    for session in sessions {
        session.validate_against(map)?;
        seen_here.fill(false);
        for ev in &session.events {
            let i = map.index_of(ev.landmark_id).expect("validated above");
            detections[i] += 1;
            seen_here[i] = true;
        }
        total += session.events.len() as u64;
        for (count, seen) in sessions_seen.iter_mut().zip(&seen_here) {
            *count += u32::from(*seen);
        }
    }
    if total == 0 {
        return Err(Error::InvalidInput(
            "no detections in any session, nothing to label".into(),
        ));
    }

    let freq: Vec<f64> = detections.iter().map(|&d| d as f64 / total as f64).collect();
    let max_freq = freq.iter().copied().fold(0.0, f64::max);
    let n_sessions = sessions.len() as f64;
    let labels = freq
        .iter()
        .zip(&sessions_seen)
        .map(|(f, &seen)| ((f / max_freq) * (seen as f64 / n_sessions)).clamp(0.0, 1.0))
        .collect();
    Ok(LabelVector(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{DetectionEvent, Landmark, LandmarkClass, LandmarkId, VehiclePose};

    fn map(n: u32) -> FeatureMap {
        FeatureMap::new(
            "m",
            (0..n).map(|i| Landmark::new(i, i as f64 * 5.0, 0.0, LandmarkClass::Pole)).collect(),
        )
        .unwrap()
    }

    fn session(id: u32, hits: &[(u32, usize)]) -> SessionLog {
        let events = hits
            .iter()
            .flat_map(|&(lm, count)| {
                std::iter::repeat_n(
                    DetectionEvent {
                        pose_index: 0,
                        landmark_id: LandmarkId(lm),
                        range: 1.0,
                        bearing: 0.0,
                    },
                    count,
                )
            })
            .collect();
        SessionLog::new(id, vec![VehiclePose::new(0.0, 0.0, 1.0, 0.0)], events).unwrap()
    }

    #[test]
    fn never_matched_is_zero_and_top_is_one() {
        let m = map(3);
        let s = vec![session(0, &[(0, 4), (1, 2)]), session(1, &[(0, 4), (1, 1)])];
        let y = empirical_probability(&m, &s).unwrap();
        assert_eq!(y.0[2], 0.0);
        assert_eq!(y.0[0], 1.0);
    }

    #[test]
    fn half_frequency_two_of_three_sessions() {
        // landmark 0: 4 hits in each of 3 sessions (12 total).
        // landmark 1: 3 hits in each of 2 sessions (6 total) -> half of max.
        let m = map(2);
        let s = vec![
            session(0, &[(0, 4), (1, 3)]),
            session(1, &[(0, 4), (1, 3)]),
            session(2, &[(0, 4)]),
        ];
        let y = empirical_probability(&m, &s).unwrap();
        assert!((y.0[1] - 0.5 * 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(y.0[0], 1.0);
    }

    #[test]
    fn needs_two_sessions_and_some_detections() {
        let m = map(2);
        assert!(empirical_probability(&m, &[session(0, &[(0, 1)])]).is_err());
        assert!(empirical_probability(&m, &[session(0, &[]), session(1, &[])]).is_err());
    }

    #[test]
    fn zero_iff_never_matched() {
        let m = map(4);
        let s = vec![session(0, &[(0, 1), (3, 9)]), session(1, &[(1, 1)])];
        let y = empirical_probability(&m, &s).unwrap();
        for (i, v) in y.0.iter().enumerate() {
            assert_eq!(*v == 0.0, i == 2, "landmark {i} label {v}");
        }
    }
}
