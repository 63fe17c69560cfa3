//! Per-landmark detection statistics accumulated across sessions.
//!
//! Each landmark carries a 360-bin mask of the directions (1 degree each, in
//! the landmark's own frame) from which it was matched, and the largest
//! vehicle distance seen in each bin. The six predictors are derived from
//! those accumulators plus the trajectory and the map layout.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{
    landmark_frame_angle, DetectionEvent, FeatureMap, Landmark, LandmarkId, SessionLog, VehiclePose,
};

pub const ANGLE_BINS: usize = 360;
/// Width of one angle bin in radians.
pub const BIN_WIDTH: f64 = PI / 180.0;
pub const DEFAULT_RADIUS: f64 = 30.0;

pub const N_VIEWS: &str = "n_views";
pub const SPANNED_ANGLE: &str = "spanned_angle";
pub const TRACK_LENGTH: &str = "track_length";
pub const DETECTION_AREA: &str = "detection_area";
pub const MAX_POSSIBLE_SPANNED_ANGLE: &str = "max_possible_spanned_angle";
pub const CONCENTRATION_RATIO: &str = "concentration_ratio";
pub const CR_TIMES_VIEWS: &str = "cr_times_views";

/// Column order of every matrix built by [`build_matrix`].
pub const COLUMNS: [&str; 7] = [
    N_VIEWS,
    SPANNED_ANGLE,
    TRACK_LENGTH,
    DETECTION_AREA,
    MAX_POSSIBLE_SPANNED_ANGLE,
    CONCENTRATION_RATIO,
    CR_TIMES_VIEWS,
];

/// 1 degree bin of an angle in radians, wrapping at 360.
pub fn angle_bin(angle: f64) -> usize {
    (angle.to_degrees().floor() as i64).rem_euclid(ANGLE_BINS as i64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorRecord {
    pub landmark_id: LandmarkId,
    pub n_views: u64,
    pub angle_bins: Box<[bool; ANGLE_BINS]>,
    /// Metres; 0 where the bin was never hit.
    pub max_range_per_bin: Box<[f64; ANGLE_BINS]>,
}

impl PredictorRecord {
    pub fn new(landmark_id: LandmarkId) -> Self {
        PredictorRecord {
            landmark_id,
            n_views: 0,
            angle_bins: Box::new([false; ANGLE_BINS]),
            max_range_per_bin: Box::new([0.0; ANGLE_BINS]),
        }
    }

    /// Folds one matched detection into the record.
    ///
    /// The bin and range come from the pose and the mapped landmark
    /// position, not from the measured range/bearing.
    pub fn accumulate(
        &mut self,
        pose: &VehiclePose,
        landmark: &Landmark,
        event: &DetectionEvent,
    ) -> Result<()> {
        if event.landmark_id != landmark.id || landmark.id != self.landmark_id {
            return Err(Error::InvalidInput(format!(
                "detection of landmark {} folded into record for {} using landmark {}",
                event.landmark_id, self.landmark_id, landmark.id
            )));
        }
        let bin = angle_bin(landmark_frame_angle(pose, landmark)?);
        self.n_views += 1;
        self.angle_bins[bin] = true;
        let r = pose.distance_to(landmark);
        if r > self.max_range_per_bin[bin] {
            self.max_range_per_bin[bin] = r;
        }
        Ok(())
    }

    /// Number of marked bins, in degrees.
    pub fn spanned_angle(&self) -> u32 {
        self.angle_bins.iter().filter(|&&b| b).count() as u32
    }

    /// Arc length swept by the per-bin maximum ranges.
    pub fn track_length(&self) -> f64 {
        self.max_range_per_bin.iter().map(|r| r * BIN_WIDTH).sum()
    }

    /// Area of the sectors bounded by the per-bin maximum ranges.
    pub fn detection_area(&self) -> f64 {
        0.5 * self.max_range_per_bin.iter().map(|r| r * r * BIN_WIDTH).sum::<f64>()
    }
}

/// Distinct 1 degree bins from which poses within `radius` see the landmark.
/// Depends only on the trajectory, not on what was detected.
pub fn max_possible_spanned_angle<'a>(
    landmark: &Landmark,
    poses: impl IntoIterator<Item = &'a VehiclePose>,
    radius: f64,
) -> u32 {
    let mut bins = [false; ANGLE_BINS];
    for pose in poses {
        let d = pose.distance_to(landmark);
        if d <= radius {
            if let Ok(a) = landmark_frame_angle(pose, landmark) {
                bins[angle_bin(a)] = true;
            }
        }
    }
    bins.iter().filter(|&&b| b).count() as u32
}

/// Furthest neighbour distance over the summed neighbour distances, for
/// neighbours within `radius`. Low values mean a dense neighbourhood. An
/// isolated landmark gets 1.
pub fn concentration_ratio(landmark: &Landmark, map: &FeatureMap, radius: f64) -> f64 {
    let (max, sum) = map
        .landmarks()
        .iter()
        .filter(|other| other.id != landmark.id)
        .map(|other| landmark.distance_to(other))
        .filter(|&d| d <= radius)
        .fold((0.0_f64, 0.0_f64), |(m, s), d| (m.max(d), s + d));
    if sum > 0.0 {
        max / sum
    } else {
        1.0
    }
}

/// Finalised predictor values for one landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkPredictors {
    pub n_views: f64,
    pub spanned_angle: f64,
    pub track_length: f64,
    pub detection_area: f64,
    pub max_possible_spanned_angle: f64,
    pub concentration_ratio: f64,
    pub cr_times_views: f64,
}

impl LandmarkPredictors {
    fn as_row(&self) -> [f64; 7] {
        [
            self.n_views,
            self.spanned_angle,
            self.track_length,
            self.detection_area,
            self.max_possible_spanned_angle,
            self.concentration_ratio,
            self.cr_times_views,
        ]
    }
}

/// One row per landmark (ascending id), one column per named predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMatrix {
    pub ids: Vec<LandmarkId>,
    pub column_names: Vec<String>,
    pub data: DMatrix<f64>,
}

impl PredictorMatrix {
    pub fn new(ids: Vec<LandmarkId>, column_names: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != ids.len() || data.ncols() != column_names.len() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{} but has {} ids and {} column names",
                data.nrows(),
                data.ncols(),
                ids.len(),
                column_names.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("predictor matrix has missing values".into()));
        }
        Ok(PredictorMatrix {
            ids,
            column_names,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name)
            .map(|j| self.data.column(j).iter().copied().collect())
    }

    /// Sub-matrix with the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<PredictorMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidInput(format!("predictor column `{n}` not found")))
            })
            .collect::<Result<_>>()?;
        let data = DMatrix::from_fn(self.nrows(), idx.len(), |i, j| self.data[(i, idx[j])]);
        Ok(PredictorMatrix {
            ids: self.ids.clone(),
            column_names: names.to_vec(),
            data,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("landmark_id");
        for c in &self.column_names {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            let _ = write!(out, "{id}");
            for j in 0..self.data.ncols() {
                let _ = write!(out, ",{}", self.data[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<PredictorMatrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header row"))?;
        let mut cols = header.split(',').map(|s| s.trim().to_string());
        if cols.next().as_deref() != Some("landmark_id") {
            return Err(Error::parse(path, 1, "first column must be landmark_id"));
        }
        let column_names: Vec<String> = cols.collect();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            let ln = i + 1;
            let mut parts = line.split(',');
            let id: u32 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::parse(path, ln, "bad landmark_id"))?;
            let row: Vec<f64> = parts
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, ln, "bad predictor value"))?;
            if row.len() != column_names.len() {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("expected {} values, found {}", column_names.len(), row.len()),
                ));
            }
            ids.push(LandmarkId(id));
            values.extend(row);
        }
        let data = DMatrix::from_row_slice(ids.len(), column_names.len(), &values);
        PredictorMatrix::new(ids, column_names, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PredictorMatrix> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PredictorMatrix::from_csv(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_string(path.as_ref(), &self.to_csv())
    }
}

/// Runs every session's detections through per-landmark records (map order).
pub fn accumulate_sessions(map: &FeatureMap, sessions: &[SessionLog]) -> Result<Vec<PredictorRecord>> {
    let mut records: Vec<PredictorRecord> = map.ids().map(PredictorRecord::new).collect();
    for session in sessions {
        session.validate_against(map)?;
        for ev in &session.events {
            let i = map.index_of(ev.landmark_id).expect("validated above");
            records[i].accumulate(session.pose_of(ev), &map.landmarks()[i], ev)?;
        }
    }
    Ok(records)
}

/// Builds the full predictor matrix: one row per map landmark, including
/// landmarks that were never detected.
pub fn build_matrix(map: &FeatureMap, sessions: &[SessionLog], radius: f64) -> Result<PredictorMatrix> {
    if sessions.is_empty() {
        return Err(Error::InvalidInput("at least one session is required".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    let records = accumulate_sessions(map, sessions)?;
    let all_poses: Vec<&VehiclePose> = sessions.iter().flat_map(|s| s.poses.iter()).collect();

    let rows: Vec<LandmarkPredictors> = map
        .landmarks()
        .par_iter()
        .zip(records.par_iter())
        .map(|(lm, rec)| {
            let n_views = rec.n_views as f64;
            let cr = concentration_ratio(lm, map, radius);
            LandmarkPredictors {
                n_views,
                spanned_angle: rec.spanned_angle() as f64,
                track_length: rec.track_length(),
                detection_area: rec.detection_area(),
                max_possible_spanned_angle: max_possible_spanned_angle(
                    lm,
                    all_poses.iter().copied(),
                    radius,
                ) as f64,
                concentration_ratio: cr,
                cr_times_views: cr * n_views,
            }
        })
        .collect();

    let data = DMatrix::from_fn(rows.len(), COLUMNS.len(), |i, j| rows[i].as_row()[j]);
    PredictorMatrix::new(
        map.ids().collect(),
        COLUMNS.iter().map(|s| s.to_string()).collect(),
        data,
    )
}
