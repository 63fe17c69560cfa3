mod common;

use std::f64::consts::PI;

use featmap::predictors::{
    accumulate_sessions, build_matrix, concentration_ratio, max_possible_spanned_angle, PredictorRecord,
    ANGLE_BINS, CONCENTRATION_RATIO, CR_TIMES_VIEWS, N_VIEWS, SPANNED_ANGLE, TRACK_LENGTH,
    DETECTION_AREA, MAX_POSSIBLE_SPANNED_ANGLE,
};
use featmap::simulator::simulate_dataset;
use featmap::types::{FeatureMap, Landmark, LandmarkClass, LandmarkId};
use proptest::prelude::*;

use common::{brute_force_geometry, rel_close, small_world};

fn record_from(ranges: &[f64]) -> PredictorRecord {
    let mut r = PredictorRecord::new(LandmarkId(0));
    for (i, &v) in ranges.iter().enumerate() {
        r.max_range_per_bin[i] = v;
        r.angle_bins[i] = v > 0.0;
    }
    r
}

proptest! {
    /// Track length is homogeneous of degree 1 and area of degree 2 in the ranges.
    #[test]
    fn homogeneity(ranges in prop::collection::vec(prop_oneof![Just(0.0), 0.1..30.0f64], ANGLE_BINS), k in 0.1..10.0f64) {
        let a = record_from(&ranges);
        let scaled: Vec<f64> = ranges.iter().map(|r| r * k).collect();
        let b = record_from(&scaled);
        prop_assert!(rel_close(b.track_length(), k * a.track_length(), 1e-12));
        prop_assert!(rel_close(b.detection_area(), k * k * a.detection_area(), 1e-12));
        prop_assert_eq!(a.spanned_angle(), b.spanned_angle());
    }

    /// With k neighbours inside the radius the ratio lies in [1/k, 1].
    #[test]
    fn concentration_ratio_bounds(pts in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 1..25)) {
        let mut lms = vec![Landmark::new(0, 0.0, 0.0, LandmarkClass::Pole)];
        for (i, (x, y)) in pts.iter().enumerate() {
            prop_assume!(x.hypot(*y) > 1e-3);
            lms.push(Landmark::new(i as u32 + 1, *x, *y, LandmarkClass::Pole));
        }
        let map = FeatureMap::new("m", lms).unwrap();
        let cr = concentration_ratio(map.get(LandmarkId(0)).unwrap(), &map, 30.0);
        let k = pts.len() as f64;
        prop_assert!(cr >= 1.0 / k - 1e-12 && cr <= 1.0 + 1e-12, "{} with {} neighbours", cr, k);
    }
}

#[test]
fn record_examples() {
    let full = record_from(&[10.0; ANGLE_BINS]);
    assert_eq!(full.spanned_angle(), 360);
    assert!((full.track_length() - 20.0 * PI).abs() < 1e-9);
    assert!((full.detection_area() - 100.0 * PI).abs() < 1e-9);

    let mut quarter = vec![0.0; ANGLE_BINS];
    quarter[..90].fill(2.0);
    assert!((record_from(&quarter).track_length() - PI).abs() < 1e-12);

    let mut one = vec![0.0; ANGLE_BINS];
    one[17] = 6.0;
    assert!((record_from(&one).detection_area() - 0.5 * 36.0 * PI / 180.0).abs() < 1e-12);

    let mut first45 = vec![0.0; ANGLE_BINS];
    first45[..45].fill(1.0);
    assert_eq!(record_from(&first45).spanned_angle(), 45);
}

#[test]
fn matrix_matches_brute_force_on_simulated_world() {
    let (world, sessions) = simulate_dataset(&small_world()).unwrap();
    let m = build_matrix(&world.map, &sessions, 30.0).unwrap();
    let col = |name| m.column(name).unwrap();
    let (views, spanned, track, area) = (col(N_VIEWS), col(SPANNED_ANGLE), col(TRACK_LENGTH), col(DETECTION_AREA));
    let (cr, crv) = (col(CONCENTRATION_RATIO), col(CR_TIMES_VIEWS));
    for (i, lm) in world.map.landmarks().iter().enumerate() {
        let (v, s, t, a) = brute_force_geometry(&world.map, &sessions, lm.id);
        assert_eq!(views[i], v as f64);
        assert_eq!(spanned[i], s as f64);
        assert!(rel_close(track[i], t, 1e-9), "{} vs {}", track[i], t);
        assert!(rel_close(area[i], a, 1e-9));
        // direct evaluation of max/sum over neighbours
        let d: Vec<f64> = world
            .map
            .landmarks()
            .iter()
            .filter(|o| o.id != lm.id)
            .map(|o| (o.x - lm.x).hypot(o.y - lm.y))
            .filter(|&d| d <= 30.0)
            .collect();
        let expected = if d.is_empty() { 1.0 } else { d.iter().cloned().fold(0.0, f64::max) / d.iter().sum::<f64>() };
        assert!(rel_close(cr[i], expected, 1e-12));
        assert!(rel_close(crv[i], expected * v as f64, 1e-12) || (crv[i] == 0.0 && v == 0));
    }
}

/// Detections come only from poses within the sensor range, so the spanned
/// angle can never exceed what the trajectory makes possible.
#[test]
fn spanned_angle_bounded_by_possible() {
    let (world, sessions) = simulate_dataset(&small_world()).unwrap();
    let m = build_matrix(&world.map, &sessions, 30.0).unwrap();
    let spanned = m.column(SPANNED_ANGLE).unwrap();
    let possible = m.column(MAX_POSSIBLE_SPANNED_ANGLE).unwrap();
    let poses: Vec<_> = sessions.iter().flat_map(|s| s.poses.iter()).collect();
    for (i, lm) in world.map.landmarks().iter().enumerate() {
        assert!(spanned[i] <= possible[i], "landmark {}", lm.id);
        assert_eq!(possible[i], max_possible_spanned_angle(lm, poses.iter().copied(), 30.0) as f64);
    }
}

#[test]
fn session_order_does_not_matter() {
    let (world, mut sessions) = simulate_dataset(&small_world()).unwrap();
    let a = build_matrix(&world.map, &sessions, 30.0).unwrap();
    sessions.reverse();
    sessions.swap(1, 4);
    let b = build_matrix(&world.map, &sessions, 30.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(accumulate_sessions(&world.map, &sessions).unwrap().len(), world.map.len());
}

#[test]
fn more_detections_never_shrink_track_or_area() {
    let (world, sessions) = simulate_dataset(&small_world()).unwrap();
    let mut previous = accumulate_sessions(&world.map, &sessions[..1]).unwrap();
    for k in 2..=sessions.len() {
        let next = accumulate_sessions(&world.map, &sessions[..k]).unwrap();
        for (p, n) in previous.iter().zip(&next) {
            assert!(n.track_length() >= p.track_length());
            assert!(n.detection_area() >= p.detection_area());
            assert!(n.spanned_angle() >= p.spanned_angle());
        }
        previous = next;
    }
}

#[test]
fn record_invariants_hold() {
    let (world, sessions) = simulate_dataset(&small_world()).unwrap();
    for r in accumulate_sessions(&world.map, &sessions).unwrap() {
        for b in 0..ANGLE_BINS {
            assert_eq!(r.angle_bins[b], r.max_range_per_bin[b] > 0.0);
        }
        assert!(r.n_views >= u64::from(r.spanned_angle()));
    }
}
