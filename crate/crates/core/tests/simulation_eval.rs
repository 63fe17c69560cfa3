mod common;

use featmap::evaluation::{ekf_localize, EkfParams, MotionNoise, SensorNoise};
use featmap::selection::rank_subset;
use featmap::simulator::{simulate_dataset, LoopPath, WorldConfig};
use featmap::types::FeatureMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::small_world;

#[test]
fn dataset_is_bit_for_bit_seeded() {
    let cfg = small_world();
    assert_eq!(simulate_dataset(&cfg).unwrap(), simulate_dataset(&cfg).unwrap());
}

#[test]
fn detections_respect_range_and_schedule() {
    let cfg = small_world();
    let (world, sessions) = simulate_dataset(&cfg).unwrap();
    for s in &sessions {
        for ev in &s.events {
            let lm = world.map.get(ev.landmark_id).unwrap();
            assert!(s.pose_of(ev).distance_to(lm) <= cfg.sensor_range);
            assert!(ev.range <= cfg.sensor_range + 3.0 * cfg.range_noise);
            if let Some(&last) = world.ephemeral_schedule.get(&lm.id) {
                assert!(s.session_id.0 <= last);
            }
        }
    }
}

/// Persistent landmarks close to the road are passed by dozens of poses, so
/// at 0.9 detection probability they are matched in essentially every session.
#[test]
fn near_path_persistent_match_rate() {
    let cfg = WorldConfig {
        detection_prob: 0.9,
        ..WorldConfig::default()
    };
    let (world, sessions) = simulate_dataset(&cfg).unwrap();
    let path = LoopPath::new(cfg.loop_length);
    let near: Vec<_> = world
        .map
        .landmarks()
        .iter()
        .filter(|l| l.persistent == Some(true) && path.distance(l.x, l.y) <= 10.0)
        .collect();
    assert!(near.len() > 20);
    for lm in near {
        let matched = sessions.iter().filter(|s| s.events.iter().any(|e| e.landmark_id == lm.id)).count();
        let rate = matched as f64 / sessions.len() as f64;
        assert!(rate >= 0.95, "landmark {} matched in {rate}", lm.id);
    }
}

fn noiseless_world() -> WorldConfig {
    WorldConfig {
        range_noise: 0.0,
        bearing_noise: 0.0,
        detection_prob: 1.0,
        n_ephemeral: 0,
        n_sessions: 2,
        ..WorldConfig::default()
    }
}

#[test]
fn noiseless_simulated_run_is_exact() {
    let (world, sessions) = simulate_dataset(&noiseless_world()).unwrap();
    let params = EkfParams {
        motion: MotionNoise { sigma_v: 0.0, sigma_omega: 0.0 },
        sensor: SensorNoise { sigma_range: 0.0, sigma_bearing: 0.0 },
        ..EkfParams::default()
    };
    let run = ekf_localize(&world.map, &sessions[0], &params).unwrap();
    assert_eq!(run.spd_violations, 0);
    assert!(!run.failed);
    for (st, p) in run.states.iter().zip(&sessions[0].poses) {
        assert!((st.mean[0] - p.x).hypot(st.mean[1] - p.y) < 0.01);
    }
}

#[test]
fn full_map_localises_and_near_empty_map_fails() {
    let cfg = WorldConfig { n_sessions: 3, ..WorldConfig::default() };
    let (world, sessions) = simulate_dataset(&cfg).unwrap();
    let keys: Vec<f64> = vec![0.0; world.map.len()];
    let params = EkfParams::default();
    let full = ekf_localize(&world.map, &sessions[2], &params).unwrap();
    assert!(!full.failed);
    assert_eq!(full.spd_violations, 0);
    let sparse = rank_subset(&world.map, &keys, 0.99).unwrap();
    assert!(ekf_localize(&sparse, &sessions[2], &params).unwrap().failed);
}

/// Dropping landmarks at random removes associated detections at identical
/// poses; the median over seeds of the denser run's covariance is no larger.
#[test]
fn more_associations_do_not_raise_covariance() {
    let cfg = WorldConfig {
        n_ephemeral: 0,
        n_sessions: 1,
        ..WorldConfig::default()
    };
    let (world, sessions) = simulate_dataset(&cfg).unwrap();
    let mut diffs = Vec::new();
    for seed in 0..15u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep: Vec<bool> = (0..world.map.len()).map(|i| i % 2 == 0).collect();
        keep.shuffle(&mut rng);
        let sparse: FeatureMap = world.map.masked(&keep);
        let params = EkfParams { seed, ..EkfParams::default() };
        let dense = ekf_localize(&world.map, &sessions[0], &params).unwrap();
        let thin = ekf_localize(&sparse, &sessions[0], &params).unwrap();
        assert!(dense.associated > thin.associated);
        diffs.push(thin.max_cov() - dense.max_cov());
    }
    diffs.sort_by(f64::total_cmp);
    assert!(diffs[diffs.len() / 2] >= 0.0, "{diffs:?}");
}
