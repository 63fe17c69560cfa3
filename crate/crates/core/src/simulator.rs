//! Synthetic worlds and repeated drives with planted persistent and
//! ephemeral landmarks.
//!
//! The vehicle drives a closed rounded-rectangle loop once per session, in
//! a single direction, with a smooth per-session lateral deviation.
//! Persistent landmarks line the road on both sides with one quadrant of the
//! map about four times sparser than the rest. Ephemeral landmarks sit close
//! to the road (parked-vehicle corners) and vanish after a per-landmark
//! number of sessions.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{
    wrap_angle, DetectionEvent, FeatureMap, Landmark, LandmarkClass, LandmarkId, SessionLog,
    VehiclePose,
};

const MIN_SEPARATION: f64 = 0.5;
const MAX_CORNER_RADIUS: f64 = 10.0;
const SPEED: f64 = 5.0;
const JITTER_HARMONICS: usize = 4;
const PLACEMENT_ATTEMPTS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub n_persistent: usize,
    pub n_ephemeral: usize,
    /// Width and height of the map bounding box, centred on the loop.
    pub area: (f64, f64),
    pub loop_length: f64,
    pub sensor_range: f64,
    pub detection_prob: f64,
    /// Ephemeral landmarks are last present in a session drawn uniformly
    /// from the first `ephemeral_lifetime` sessions.
    pub ephemeral_lifetime: u32,
    pub n_sessions: u32,
    pub pose_spacing: f64,
    /// SD of the lateral deviation from the nominal loop, metres.
    pub trajectory_jitter: f64,
    /// Distance band from the road for persistent landmarks.
    pub persistent_offset: (f64, f64),
    /// Distance band from the road for ephemeral landmarks.
    pub ephemeral_offset: (f64, f64),
    /// Density of the sparse quadrant relative to the others.
    pub sparse_quadrant_density: f64,
    pub range_noise: f64,
    /// Radians.
    pub bearing_noise: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_persistent: 200,
            n_ephemeral: 100,
            area: (220.0, 170.0),
            loop_length: 500.0,
            sensor_range: 30.0,
            detection_prob: 0.8,
            ephemeral_lifetime: 6,
            n_sessions: 26,
            pose_spacing: 1.0,
            trajectory_jitter: 0.5,
            persistent_offset: (3.0, 25.0),
            ephemeral_offset: (1.5, 6.0),
            sparse_quadrant_density: 0.25,
            range_noise: 0.05,
            bearing_noise: 0.5_f64.to_radians(),
            seed: 42,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.sensor_range > 0.0) {
            return bad(format!("sensor_range must be positive, got {}", self.sensor_range));
        }
        if !(0.0..=1.0).contains(&self.detection_prob) {
            return bad(format!("detection_prob must be in [0,1], got {}", self.detection_prob));
        }
        if !(self.loop_length > 0.0) || !(self.pose_spacing > 0.0) {
            return bad("loop_length and pose_spacing must be positive".into());
        }
        if !(self.area.0 > 0.0 && self.area.1 > 0.0) {
            return bad("area must be positive".into());
        }
        if self.trajectory_jitter < 0.0 || self.range_noise < 0.0 || self.bearing_noise < 0.0 {
            return bad("noise and jitter must be non-negative".into());
        }
        for (name, (lo, hi)) in [
            ("persistent_offset", self.persistent_offset),
            ("ephemeral_offset", self.ephemeral_offset),
        ] {
            if !(lo > 0.0 && hi > lo) {
                return bad(format!("{name} must satisfy 0 < min < max"));
            }
        }
        if !(self.sparse_quadrant_density > 0.0) {
            return bad("sparse_quadrant_density must be positive".into());
        }
        if self.n_ephemeral > 0 && self.ephemeral_lifetime == 0 {
            return bad("ephemeral_lifetime must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub map: FeatureMap,
    /// Last session in which each ephemeral landmark is present.
    pub ephemeral_schedule: BTreeMap<LandmarkId, u32>,
}

impl World {
    pub fn is_present(&self, id: LandmarkId, session_index: u32) -> bool {
        self.ephemeral_schedule
            .get(&id)
            .is_none_or(|&last| session_index <= last)
    }

    /// `landmark_id,persistent,last_session` with an empty last session for
    /// persistent landmarks.
    pub fn ground_truth_csv(&self) -> String {
        let mut out = String::from("landmark_id,persistent,last_session\n");
        for lm in self.map.landmarks() {
            match self.ephemeral_schedule.get(&lm.id) {
                Some(last) => {
                    let _ = writeln!(out, "{},false,{}", lm.id, last);
                }
                None => {
                    let _ = writeln!(out, "{},true,", lm.id);
                }
            }
        }
        out
    }
}

/// SplitMix64 finaliser over (master seed, stream tag, index).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_WORLD: u64 = 1;
const TAG_TRAJECTORY: u64 = 2;
const TAG_DETECTIONS: u64 = 3;

/// Counter-clockwise rounded rectangle parameterised by arc length.
#[derive(Debug, Clone, Copy)]
pub struct LoopPath {
    /// Half lengths of the straight sections.
    half_x: f64,
    half_y: f64,
    radius: f64,
    length: f64,
}

impl LoopPath {
    pub fn new(length: f64) -> Self {
        let radius = MAX_CORNER_RADIUS.min(length / (4.0 * PI));
        // straights: 2a + 2b with a = 1.5 b
        let b = (length - TAU * radius) / 5.0;
        LoopPath {
            half_x: 0.75 * b,
            half_y: 0.5 * b,
            radius,
            length,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Position and heading at arc length `s`.
    pub fn point(&self, s: f64) -> (f64, f64, f64) {
        let (hx, hy, r) = (self.half_x, self.half_y, self.radius);
        let quarter = FRAC_PI_2 * r;
        let mut s = s.rem_euclid(self.length);
        // (straight length, start point, heading) then a quarter arc about
        // the corner centre, for each of the four sides
        let sides = [
            (2.0 * hx, (-hx, -hy - r), 0.0, (hx, -hy)),
            (2.0 * hy, (hx + r, -hy), FRAC_PI_2, (hx, hy)),
            (2.0 * hx, (hx, hy + r), PI, (-hx, hy)),
            (2.0 * hy, (-hx - r, hy), -FRAC_PI_2, (-hx, -hy)),
        ];
        for (len, (x0, y0), h, (cx, cy)) in sides {
            if s < len {
                return (x0 + s * h.cos(), y0 + s * h.sin(), h);
            }
            s -= len;
            if s < quarter {
                let phi = h - FRAC_PI_2 + s / r.max(f64::MIN_POSITIVE);
                return (cx + r * phi.cos(), cy + r * phi.sin(), wrap_angle(h + s / r));
            }
            s -= quarter;
        }
        // rounding at the very end of the loop
        (-hx, -hy - r, 0.0)
    }

    /// Unsigned distance from `(x, y)` to the loop.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let dx = x.abs() - self.half_x;
        let dy = y.abs() - self.half_y;
        let to_rect = if dx <= 0.0 && dy <= 0.0 {
            // inside the core rectangle: negative distance to its boundary
            dx.max(dy)
        } else {
            dx.max(0.0).hypot(dy.max(0.0))
        };
        (to_rect - self.radius).abs()
    }
}

/// Quadrant index about the map origin: 0 = (-,-), 1 = (+,-), 2 = (-,+), 3 = (+,+).
pub fn quadrant(x: f64, y: f64) -> usize {
    usize::from(x >= 0.0) + 2 * usize::from(y >= 0.0)
}

pub const SPARSE_QUADRANT: usize = 1;

fn sample_in_band(
    path: &LoopPath,
    band: (f64, f64),
    area: (f64, f64),
    rng: &mut ChaCha8Rng,
    accept: impl Fn(f64, f64) -> bool,
) -> Option<(f64, f64)> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let s = rng.random_range(0.0..path.length());
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let offset = rng.random_range(band.0..band.1);
        let (px, py, h) = path.point(s);
        let x = px - side * offset * h.sin();
        let y = py + side * offset * h.cos();
        let d = path.distance(x, y);
        if d < band.0 || d > band.1 {
            continue;
        }
        if x.abs() > 0.5 * area.0 || y.abs() > 0.5 * area.1 {
            continue;
        }
        if accept(x, y) {
            return Some((x, y));
        }
    }
    None
}

/// Persistent landmark count per quadrant so the sparse quadrant has the
/// configured relative density.
pub fn quadrant_targets(n: usize, sparse_density: f64) -> [usize; 4] {
    let sparse = (n as f64 * sparse_density / (3.0 + sparse_density)).round() as usize;
    let rest = n - sparse;
    let mut t = [0; 4];
    t[SPARSE_QUADRANT] = sparse;
    let dense = [0, 2, 3];
    for (k, &q) in dense.iter().enumerate() {
        t[q] = rest / 3 + usize::from(k < rest % 3);
    }
    t
}

pub fn generate_world(config: &WorldConfig) -> Result<World> {
    config.validate()?;
    let total = config.n_persistent + config.n_ephemeral;
    let capacity = (config.area.0 * config.area.1) / (MIN_SEPARATION * MIN_SEPARATION);
    if total as f64 > capacity {
        return Err(Error::InvalidInput(format!(
            "area {}x{} cannot hold {total} landmarks at {MIN_SEPARATION} m separation",
            config.area.0, config.area.1
        )));
    }
    let path = LoopPath::new(config.loop_length);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_WORLD, 0));
    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(total);
    // (x, y, persistent)
    let mut raw: Vec<(f64, f64, bool)> = Vec::with_capacity(total);

    let too_small = || {
        Error::InvalidInput(format!(
            "could not place landmarks in a {}x{} area at {MIN_SEPARATION} m separation",
            config.area.0, config.area.1
        ))
    };
    let clear = |placed: &[(f64, f64)], x: f64, y: f64| {
        placed
            .iter()
            .all(|&(px, py)| (px - x).hypot(py - y) >= MIN_SEPARATION)
    };

    let targets = quadrant_targets(config.n_persistent, config.sparse_quadrant_density);
    for (q, &count) in targets.iter().enumerate() {
        for _ in 0..count {
            let (x, y) = sample_in_band(&path, config.persistent_offset, config.area, &mut rng, |x, y| {
                quadrant(x, y) == q && clear(&placed, x, y)
            })
            .ok_or_else(too_small)?;
            placed.push((x, y));
            raw.push((x, y, true));
        }
    }
    for _ in 0..config.n_ephemeral {
        let (x, y) = sample_in_band(&path, config.ephemeral_offset, config.area, &mut rng, |x, y| {
            clear(&placed, x, y)
        })
        .ok_or_else(too_small)?;
        placed.push((x, y));
        raw.push((x, y, false));
    }

    // ids carry no information about persistence
    raw.shuffle(&mut rng);
    let lifetime = config.ephemeral_lifetime.min(config.n_sessions).max(1);
    let mut landmarks = Vec::with_capacity(total);
    let mut schedule = BTreeMap::new();
    for (i, (x, y, persistent)) in raw.into_iter().enumerate() {
        let id = LandmarkId(i as u32);
        let class = if rng.random_bool(0.5) {
            LandmarkClass::Pole
        } else {
            LandmarkClass::Corner
        };
        if !persistent {
            schedule.insert(id, rng.random_range(0..lifetime));
        }
        landmarks.push(Landmark {
            id,
            x,
            y,
            class,
            persistent: Some(persistent),
        });
    }
    Ok(World {
        map: FeatureMap::new("sim", landmarks)?,
        ephemeral_schedule: schedule,
    })
}

/// One lap of the loop with this session's lateral deviation.
pub fn generate_trajectory(config: &WorldConfig, session_index: u32) -> Vec<VehiclePose> {
    let path = LoopPath::new(config.loop_length);
    let n = ((config.loop_length / config.pose_spacing).round() as usize).max(3);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        TAG_TRAJECTORY,
        u64::from(session_index),
    ));

    let mut freqs: Vec<f64> = (2..=12).map(f64::from).collect();
    freqs.shuffle(&mut rng);
    // each harmonic contributes amp^2/2 of variance over a full lap
    let amp = config.trajectory_jitter * (2.0 / JITTER_HARMONICS as f64).sqrt();
    let harmonics: Vec<(f64, f64)> = freqs[..JITTER_HARMONICS]
        .iter()
        .map(|&f| (f, rng.random_range(0.0..TAU)))
        .collect();
    let lateral = |s: f64| -> f64 {
        harmonics
            .iter()
            .map(|&(f, phase)| amp * (TAU * f * s / config.loop_length + phase).sin())
            .sum()
    };

    let step = config.loop_length / n as f64;
    let xy: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let s = i as f64 * step;
            let (x, y, h) = path.point(s);
            let off = lateral(s);
            (x - off * h.sin(), y + off * h.cos())
        })
        .collect();
    (0..n)
        .map(|i| {
            let (x, y) = xy[i];
            let (xn, yn) = xy[(i + 1) % n];
            let (xp, yp) = xy[(i + n - 1) % n];
            let heading = wrap_angle((yn - yp).atan2(xn - xp));
            VehiclePose::new(i as f64 * step / SPEED, x, y, heading)
        })
        .collect()
}

pub fn simulate_session(world: &World, config: &WorldConfig, session_index: u32) -> Result<SessionLog> {
    if session_index >= config.n_sessions {
        return Err(Error::InvalidInput(format!(
            "session {session_index} out of range for {} sessions",
            config.n_sessions
        )));
    }
    let poses = generate_trajectory(config, session_index);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        TAG_DETECTIONS,
        u64::from(session_index),
    ));
    let range_noise = Normal::new(0.0, config.range_noise).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let bearing_noise = Normal::new(0.0, config.bearing_noise).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let present: Vec<&Landmark> = world
        .map
        .landmarks()
        .iter()
        .filter(|lm| world.is_present(lm.id, session_index))
        .collect();

    let mut events = Vec::new();
    for (i, pose) in poses.iter().enumerate() {
        for lm in &present {
            let dx = lm.x - pose.x;
            let dy = lm.y - pose.y;
            let d = dx.hypot(dy);
            if d > config.sensor_range || d == 0.0 {
                continue;
            }
            if !rng.random_bool(config.detection_prob) {
                continue;
            }
            let range = (d + range_noise.sample(&mut rng)).max(0.0);
            let bearing = wrap_angle(dy.atan2(dx) - pose.heading + bearing_noise.sample(&mut rng));
            events.push(DetectionEvent {
                pose_index: i,
                landmark_id: lm.id,
                range,
                bearing,
            });
        }
    }
    SessionLog::new(session_index, poses, events)
}

/// The world plus every session, generated in parallel from per-session seeds.
pub fn simulate_dataset(config: &WorldConfig) -> Result<(World, Vec<SessionLog>)> {
    let world = generate_world(config)?;
    let sessions = (0..config.n_sessions)
        .into_par_iter()
        .map(|s| simulate_session(&world, config, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((world, sessions))
}
