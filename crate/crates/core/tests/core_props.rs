use std::f64::consts::{PI, TAU};
use std::path::Path;

use featmap::io::{format_map, format_session, load_sessions, parse_map, parse_session, save_sessions};
use featmap::types::{
    landmark_frame_angle, wrap_angle, DetectionEvent, FeatureMap, Landmark, LandmarkClass, LandmarkId,
    SessionLog, VehiclePose,
};
use proptest::prelude::*;

fn landmark() -> impl Strategy<Value = Landmark> {
    (
        0u32..10_000,
        -1e4..1e4f64,
        -1e4..1e4f64,
        any::<bool>(),
        prop::option::of(any::<bool>()),
    )
        .prop_map(|(id, x, y, pole, persistent)| Landmark {
            id: LandmarkId(id),
            x,
            y,
            class: if pole { LandmarkClass::Pole } else { LandmarkClass::Corner },
            persistent,
        })
}

fn map() -> impl Strategy<Value = FeatureMap> {
    prop::collection::vec(landmark(), 0..40).prop_map(|mut lms| {
        lms.sort_by_key(|l| l.id);
        lms.dedup_by_key(|l| l.id);
        FeatureMap::new("prop", lms).unwrap()
    })
}

fn session() -> impl Strategy<Value = SessionLog> {
    (0u32..1000, prop::collection::vec((0.01..5.0f64, -500.0..500.0f64, -500.0..500.0f64, -PI..PI), 1..30))
        .prop_flat_map(|(id, steps)| {
            let n = steps.len();
            let events = prop::collection::vec((0..n, 0u32..50, 0.0..30.0f64, -PI..PI), 0..60);
            (Just(id), Just(steps), events)
        })
        .prop_map(|(id, steps, events)| {
            let mut t = 0.0;
            let poses = steps
                .into_iter()
                .map(|(dt, x, y, h)| {
                    t += dt;
                    VehiclePose::new(t, x, y, wrap_angle(h))
                })
                .collect();
            let events = events
                .into_iter()
                .map(|(pose_index, lid, range, bearing)| DetectionEvent {
                    pose_index,
                    landmark_id: LandmarkId(lid),
                    range,
                    bearing,
                })
                .collect();
            SessionLog::new(id, poses, events).unwrap()
        })
}

proptest! {
    #[test]
    fn map_round_trip(m in map()) {
        let back = parse_map(&format_map(&m), Path::new("m")).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn session_round_trip(s in session()) {
        let back = parse_session(&format_session(&s), s.session_id.0, Path::new("s")).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn frame_angle_in_range(px in -100.0..100.0f64, py in -100.0..100.0f64, lx in -100.0..100.0f64, ly in -100.0..100.0f64) {
        prop_assume!((px - lx).hypot(py - ly) > 1e-6);
        let a = landmark_frame_angle(&VehiclePose::new(0.0, px, py, 0.0), &Landmark::new(0, lx, ly, LandmarkClass::Pole)).unwrap();
        prop_assert!((0.0..TAU).contains(&a));
    }

    /// Rotating the vehicle about the landmark rotates the frame angle by
    /// the same amount.
    #[test]
    fn rotation_consistency(r in 0.5..50.0f64, a0 in 0.0..TAU, delta in -TAU..TAU, lx in -50.0..50.0f64, ly in -50.0..50.0f64) {
        let lm = Landmark::new(0, lx, ly, LandmarkClass::Corner);
        let at = |a: f64| VehiclePose::new(0.0, lx + r * a.cos(), ly + r * a.sin(), 0.0);
        let t0 = landmark_frame_angle(&at(a0), &lm).unwrap();
        let t1 = landmark_frame_angle(&at(a0 + delta), &lm).unwrap();
        let diff = wrap_angle(t1 - t0 - delta);
        prop_assert!(diff.abs() < 1e-9, "{}", diff);
    }

    #[test]
    fn wrap_angle_range(a in -1e3..1e3f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        prop_assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-9);
    }
}

#[test]
fn session_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sessions: Vec<SessionLog> = (0..3)
        .rev()
        .map(|id| {
            let poses = vec![VehiclePose::new(0.0, 0.0, 0.0, 0.0), VehiclePose::new(1.0, 1.0, 0.0, 0.1)];
            let ev = DetectionEvent {
                pose_index: 1,
                landmark_id: LandmarkId(id),
                range: 2.5,
                bearing: -0.3,
            };
            SessionLog::new(id, poses, vec![ev]).unwrap()
        })
        .collect();
    save_sessions(&sessions, dir.path()).unwrap();
    let back = load_sessions(dir.path()).unwrap();
    let mut expected = sessions.clone();
    expected.sort_by_key(|s| s.session_id);
    assert_eq!(back, expected);
}

#[test]
fn frame_angle_examples() {
    let lm = Landmark::new(0, 0.0, 0.0, LandmarkClass::Pole);
    let angle = |x, y| landmark_frame_angle(&VehiclePose::new(0.0, x, y, 0.0), &lm).unwrap();
    assert_eq!(angle(1.0, 0.0), 0.0);
    assert!((angle(0.0, 1.0) - PI / 2.0).abs() < 1e-15);
    assert!((angle(-3.0, -3.0) - 5.0 * PI / 4.0).abs() < 1e-12);
    assert!(landmark_frame_angle(&VehiclePose::new(0.0, 0.0, 0.0, 0.0), &lm).is_err());
}
