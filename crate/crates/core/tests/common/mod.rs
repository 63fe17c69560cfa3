#![allow(dead_code)]

use std::f64::consts::PI;

use featmap::simulator::WorldConfig;
use featmap::types::{FeatureMap, LandmarkId, SessionLog};

/// A quick world for tests that only need realistic-looking data.
pub fn small_world() -> WorldConfig {
    WorldConfig {
        n_persistent: 60,
        n_ephemeral: 30,
        n_sessions: 8,
        ephemeral_lifetime: 3,
        seed: 9,
        ..WorldConfig::default()
    }
}

/// Brute-force recomputation of the event-driven predictors of one landmark,
/// straight from the raw detections: (views, spanned angle, track length, area).
pub fn brute_force_geometry(map: &FeatureMap, sessions: &[SessionLog], id: LandmarkId) -> (u64, u32, f64, f64) {
    let lm = map.get(id).expect("landmark in map");
    let mut views = 0;
    let mut best = vec![0.0_f64; 360];
    let mut hit = vec![false; 360];
    for s in sessions {
        for ev in s.events.iter().filter(|e| e.landmark_id == id) {
            let p = &s.poses[ev.pose_index];
            let mut deg = (p.y - lm.y).atan2(p.x - lm.x).to_degrees();
            if deg < 0.0 {
                deg += 360.0;
            }
            let bin = (deg.floor() as usize) % 360;
            let r = ((p.x - lm.x).powi(2) + (p.y - lm.y).powi(2)).sqrt();
            views += 1;
            hit[bin] = true;
            best[bin] = best[bin].max(r);
        }
    }
    let spanned = hit.iter().filter(|&&h| h).count() as u32;
    let unit = PI / 180.0;
    let track = best.iter().sum::<f64>() * unit;
    let area = 0.5 * best.iter().map(|r| r * r).sum::<f64>() * unit;
    (views, spanned, track, area)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
