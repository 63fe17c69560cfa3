//! Shared domain types: landmarks, maps, vehicle poses and session logs.
//!
//! All positions are 2D metres in the map global frame. Angles are radians;
//! the only place angles get discretised is [`crate::predictors`].

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LandmarkId(pub u32);

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub u32);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LandmarkClass {
    Pole,
    Corner,
}

impl LandmarkClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkClass::Pole => "pole",
            LandmarkClass::Corner => "corner",
        }
    }
}

impl FromStr for LandmarkClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pole" => Ok(LandmarkClass::Pole),
            "corner" => Ok(LandmarkClass::Corner),
            other => Err(format!("unknown landmark class `{other}`")),
        }
    }
}

/// A point landmark stored in the map.
///
/// `persistent` is ground truth and only exists for simulator-generated maps.
/// Nothing in the scoring path reads it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: LandmarkId,
    pub x: f64,
    pub y: f64,
    pub class: LandmarkClass,
    pub persistent: Option<bool>,
}

impl Landmark {
    pub fn new(id: u32, x: f64, y: f64, class: LandmarkClass) -> Self {
        Landmark {
            id: LandmarkId(id),
            x,
            y,
            class,
            persistent: None,
        }
    }

    pub fn distance_to(&self, other: &Landmark) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A set of landmarks kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    frame_name: String,
    landmarks: Vec<Landmark>,
}

impl FeatureMap {
    pub fn new(frame_name: impl Into<String>, mut landmarks: Vec<Landmark>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(landmarks.len());
        for lm in &landmarks {
            if !lm.x.is_finite() || !lm.y.is_finite() {
                return Err(Error::Validation(format!(
                    "landmark {} has a non-finite position",
                    lm.id
                )));
            }
            if !seen.insert(lm.id) {
                return Err(Error::Validation(format!("duplicate landmark id {}", lm.id)));
            }
        }
        landmarks.sort_by_key(|lm| lm.id);
        Ok(FeatureMap {
            frame_name: frame_name.into(),
            landmarks,
        })
    }

    pub fn empty(frame_name: impl Into<String>) -> Self {
        FeatureMap {
            frame_name: frame_name.into(),
            landmarks: Vec::new(),
        }
    }

    pub fn frame_name(&self) -> &str {
        &self.frame_name
    }

    /// Landmarks in ascending id order.
    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = LandmarkId> + '_ {
        self.landmarks.iter().map(|lm| lm.id)
    }

    /// Row index of `id` in id order.
    pub fn index_of(&self, id: LandmarkId) -> Option<usize> {
        self.landmarks.binary_search_by_key(&id, |lm| lm.id).ok()
    }

    pub fn get(&self, id: LandmarkId) -> Option<&Landmark> {
        self.index_of(id).map(|i| &self.landmarks[i])
    }

    /// Sub-map of the landmarks whose entry in `mask` (map order) is true.
    pub fn masked(&self, mask: &[bool]) -> FeatureMap {
        debug_assert_eq!(mask.len(), self.landmarks.len());
        FeatureMap {
            frame_name: self.frame_name.clone(),
            landmarks: self
                .landmarks
                .iter()
                .zip(mask)
                .filter(|(_, &k)| k)
                .map(|(lm, _)| *lm)
                .collect(),
        }
    }

    /// Sub-map holding the landmarks for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&Landmark) -> bool) -> FeatureMap {
        FeatureMap {
            frame_name: self.frame_name.clone(),
            landmarks: self.landmarks.iter().copied().filter(|lm| keep(lm)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehiclePose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Radians in (-pi, pi].
    pub heading: f64,
}

impl VehiclePose {
    pub fn new(t: f64, x: f64, y: f64, heading: f64) -> Self {
        VehiclePose { t, x, y, heading }
    }

    pub fn distance_to(&self, lm: &Landmark) -> f64 {
        (self.x - lm.x).hypot(self.y - lm.y)
    }
}

/// A matched detection of a map landmark from one pose of a session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub pose_index: usize,
    pub landmark_id: LandmarkId,
    /// Metres.
    pub range: f64,
    /// Radians, landmark direction in the vehicle frame.
    pub bearing: f64,
}

/// One drive: ordered poses plus the detections made from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub session_id: SessionId,
    pub poses: Vec<VehiclePose>,
    pub events: Vec<DetectionEvent>,
}

impl SessionLog {
    pub fn new(
        session_id: u32,
        poses: Vec<VehiclePose>,
        events: Vec<DetectionEvent>,
    ) -> Result<Self> {
        let log = SessionLog {
            session_id: SessionId(session_id),
            poses,
            events,
        };
        log.validate()?;
        Ok(log)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.poses.windows(2).enumerate() {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::Validation(format!(
                    "session {}: pose {} time {} does not follow {}",
                    self.session_id,
                    i + 1,
                    pair[1].t,
                    pair[0].t
                )));
            }
        }
        for pose in &self.poses {
            if !(pose.x.is_finite() && pose.y.is_finite() && pose.heading.is_finite()) {
                return Err(Error::Validation(format!(
                    "session {}: non-finite pose at t={}",
                    self.session_id, pose.t
                )));
            }
        }
        for ev in &self.events {
            if ev.pose_index >= self.poses.len() {
                return Err(Error::Validation(format!(
                    "session {}: detection of landmark {} references pose {} but only {} poses exist",
                    self.session_id,
                    ev.landmark_id,
                    ev.pose_index,
                    self.poses.len()
                )));
            }
            if !(ev.range >= 0.0) || !ev.bearing.is_finite() {
                return Err(Error::Validation(format!(
                    "session {}: detection of landmark {} has invalid range/bearing",
                    self.session_id, ev.landmark_id
                )));
            }
        }
        Ok(())
    }

    /// Checks that every detection refers to a landmark in `map`.
    pub fn validate_against(&self, map: &FeatureMap) -> Result<()> {
        match self.events.iter().find(|ev| map.index_of(ev.landmark_id).is_none()) {
            Some(ev) => Err(Error::Validation(format!(
                "session {}: detection references landmark {} which is not in the map",
                self.session_id, ev.landmark_id
            ))),
            None => Ok(()),
        }
    }

    pub fn pose_of(&self, event: &DetectionEvent) -> &VehiclePose {
        &self.poses[event.pose_index]
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Direction from the landmark towards the vehicle, measured in the
/// landmark's own frame, in [0, 2pi).
pub fn landmark_frame_angle(pose: &VehiclePose, landmark: &Landmark) -> Result<f64> {
    let dx = pose.x - landmark.x;
    let dy = pose.y - landmark.y;
    if !(dx.is_finite() && dy.is_finite()) {
        return Err(Error::DegenerateGeometry(format!(
            "non-finite position for landmark {}",
            landmark.id
        )));
    }
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "vehicle coincides with landmark {}",
            landmark.id
        )));
    }
    let a = dy.atan2(dx).rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    Ok(if a >= TAU { 0.0 } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn origin() -> Landmark {
        Landmark::new(1, 0.0, 0.0, LandmarkClass::Pole)
    }

    #[test]
    fn frame_angle_axes() {
        let a = landmark_frame_angle(&VehiclePose::new(0.0, 1.0, 0.0, 0.0), &origin()).unwrap();
        assert_eq!(a, 0.0);
        let b = landmark_frame_angle(&VehiclePose::new(0.0, 0.0, 1.0, 0.0), &origin()).unwrap();
        assert!((b - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn frame_angle_third_quadrant() {
        // atan2(-3, -3) = -3pi/4, shifted by 2pi
        let a = landmark_frame_angle(&VehiclePose::new(0.0, -3.0, -3.0, 0.0), &origin()).unwrap();
        assert!((a - 5.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn frame_angle_coincident_is_degenerate() {
        let err = landmark_frame_angle(&VehiclePose::new(0.0, 0.0, 0.0, 0.0), &origin());
        assert!(matches!(err, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn frame_angle_tiny_negative_stays_below_tau() {
        let a = landmark_frame_angle(&VehiclePose::new(0.0, 1.0, -1e-300, 0.0), &origin()).unwrap();
        assert!((0.0..TAU).contains(&a));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let lms = vec![
            Landmark::new(7, 0.0, 0.0, LandmarkClass::Pole),
            Landmark::new(7, 1.0, 0.0, LandmarkClass::Corner),
        ];
        let err = FeatureMap::new("map", lms).unwrap_err();
        assert!(err.to_string().contains("duplicate landmark id 7"));
    }

    #[test]
    fn session_rejects_out_of_range_pose_index() {
        let poses = vec![VehiclePose::new(0.0, 0.0, 0.0, 0.0)];
        let events = vec![DetectionEvent {
            pose_index: 1,
            landmark_id: LandmarkId(0),
            range: 1.0,
            bearing: 0.0,
        }];
        assert!(SessionLog::new(0, poses, events).is_err());
    }

    #[test]
    fn session_rejects_non_increasing_time() {
        let poses = vec![
            VehiclePose::new(1.0, 0.0, 0.0, 0.0),
            VehiclePose::new(1.0, 1.0, 0.0, 0.0),
        ];
        assert!(SessionLog::new(0, poses, vec![]).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
    }
}
