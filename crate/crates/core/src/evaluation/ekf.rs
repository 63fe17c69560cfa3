//! Range-bearing EKF localisation against a known landmark map.

use std::collections::HashMap;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::simulator::derive_seed;
use crate::types::{wrap_angle, FeatureMap, SessionLog, VehiclePose};

/// 0.99 quantile of the chi-square distribution with 2 degrees of freedom.
pub const CHI2_GATE_2DOF: f64 = 9.21;
/// Variance floor keeping the filter well conditioned when a noise term is zero.
const MIN_VARIANCE: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-9;
const TAG_ODOMETRY: u64 = 11;
/// Side of the buckets used to shortlist association candidates.
const CELL: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionNoise {
    /// SD of each body-frame translation component, metres per step.
    pub sigma_v: f64,
    /// SD of the heading increment, radians per step.
    pub sigma_omega: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        MotionNoise {
            sigma_v: 0.1,
            sigma_omega: 0.5_f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    pub sigma_range: f64,
    pub sigma_bearing: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            sigma_range: 0.05,
            sigma_bearing: 0.5_f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfParams {
    pub motion: MotionNoise,
    pub sensor: SensorNoise,
    pub gate: f64,
    /// Position covariance trace above which the run counts as failed, m^2.
    pub max_position_trace: f64,
    /// Minimum fraction of detections that must associate.
    pub min_association: f64,
    /// Initial position and heading SDs.
    pub initial_sigma: (f64, f64),
    /// Skip detections with more than one landmark inside the gate.
    pub reject_ambiguous: bool,
    /// Seeds the odometry corruption; the session id is mixed in.
    pub seed: u64,
}

impl Default for EkfParams {
    fn default() -> Self {
        EkfParams {
            motion: MotionNoise::default(),
            sensor: SensorNoise::default(),
            gate: CHI2_GATE_2DOF,
            max_position_trace: 25.0,
            min_association: 0.1,
            initial_sigma: (0.1, 0.5_f64.to_radians()),
            reject_ambiguous: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState {
    /// (x, y, heading)
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

impl EkfState {
    pub fn position_block(&self) -> Matrix2<f64> {
        self.covariance.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn position_trace(&self) -> f64 {
        self.covariance[(0, 0)] + self.covariance[(1, 1)]
    }

    /// Largest eigenvalue of the position block.
    pub fn max_position_eigenvalue(&self) -> f64 {
        max_eigenvalue_2x2(&self.position_block())
    }

    pub fn is_symmetric_positive_definite(&self) -> bool {
        let p = &self.covariance;
        let symmetric = (0..3).all(|i| (0..3).all(|j| (p[(i, j)] - p[(j, i)]).abs() <= SYMMETRY_TOL));
        symmetric && p.cholesky().is_some()
    }
}

pub fn max_eigenvalue_2x2(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let half_tr = 0.5 * (a + d);
    half_tr + (0.25 * (a - d) * (a - d) + b * b).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfRun {
    /// One state per pose, after that pose's updates.
    pub states: Vec<EkfState>,
    pub failed: bool,
    pub detections: usize,
    pub associated: usize,
    /// Associations that picked the landmark that produced the detection.
    pub correct_associations: usize,
    pub max_position_trace: f64,
    /// Steps at which the covariance was not symmetric positive definite.
    pub spd_violations: usize,
}

impl EkfRun {
    pub fn association_rate(&self) -> f64 {
        if self.detections == 0 {
            0.0
        } else {
            self.associated as f64 / self.detections as f64
        }
    }

    /// Largest position eigenvalue over the run.
    pub fn max_cov(&self) -> f64 {
        max_cov_magnitude(&self.states).unwrap_or(f64::NAN)
    }
}

pub fn max_cov_magnitude(states: &[EkfState]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidInput("no filter states".into()));
    }
    Ok(states
        .iter()
        .map(EkfState::max_position_eigenvalue)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Relative motion between two poses in the frame of the first.
pub fn odometry(from: &VehiclePose, to: &VehiclePose) -> Vector3<f64> {
    let (s, c) = from.heading.sin_cos();
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    Vector3::new(c * dx + s * dy, -s * dx + c * dy, wrap_angle(to.heading - from.heading))
}

fn predict(state: &mut EkfState, u: &Vector3<f64>, q: &Matrix3<f64>) {
    let theta = state.mean[2];
    let (s, c) = theta.sin_cos();
    let f = Matrix3::new(
        1.0, 0.0, -s * u[0] - c * u[1],
        0.0, 1.0, c * u[0] - s * u[1],
        0.0, 0.0, 1.0,
    );
    let g = Matrix3::new(
        c, -s, 0.0,
        s, c, 0.0,
        0.0, 0.0, 1.0,
    );
    state.mean = Vector3::new(
        state.mean[0] + c * u[0] - s * u[1],
        state.mean[1] + s * u[0] + c * u[1],
        wrap_angle(theta + u[2]),
    );
    let p = f * state.covariance * f.transpose() + g * q * g.transpose();
    state.covariance = 0.5 * (p + p.transpose());
}

/// Expected measurement and its Jacobian for a landmark at `(lx, ly)`.
fn observe(mean: &Vector3<f64>, lx: f64, ly: f64) -> Option<(Vector2<f64>, Matrix2x3<f64>)> {
    let dx = lx - mean[0];
    let dy = ly - mean[1];
    let q = dx * dx + dy * dy;
    if q < 1e-12 {
        return None;
    }
    let r = q.sqrt();
    let z = Vector2::new(r, wrap_angle(dy.atan2(dx) - mean[2]));
    let h = Matrix2x3::new(
        -dx / r, -dy / r, 0.0,
        dy / q, -dx / q, -1.0,
    );
    Some((z, h))
}

/// Best gated association so far for one detection.
struct Candidate {
    d2: f64,
    index: usize,
    innovation: Vector2<f64>,
    jacobian: Matrix2x3<f64>,
    s_inv: Matrix2<f64>,
}

/// Buckets landmark indices on a square grid for candidate lookup.
struct LandmarkGrid {
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl LandmarkGrid {
    fn new(map: &FeatureMap) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, lm) in map.landmarks().iter().enumerate() {
            cells.entry(Self::key(lm.x, lm.y)).or_default().push(i);
        }
        LandmarkGrid { cells }
    }

    fn key(x: f64, y: f64) -> (i64, i64) {
        ((x / CELL).floor() as i64, (y / CELL).floor() as i64)
    }

    /// Indices of landmarks possibly within `radius` of `(x, y)`, ascending.
    fn near(&self, x: f64, y: f64, radius: f64) -> Vec<usize> {
        let reach = (radius / CELL).ceil() as i64;
        let (cx, cy) = Self::key(x, y);
        let mut out = Vec::new();
        for i in cx - reach..=cx + reach {
            for j in cy - reach..=cy + reach {
                if let Some(v) = self.cells.get(&(i, j)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Runs the filter over one session. Odometry comes from consecutive
/// ground-truth poses plus motion noise; detections are associated to the
/// nearest landmark by Mahalanobis distance, ignoring their recorded ids.
pub fn ekf_localize(map: &FeatureMap, session: &SessionLog, params: &EkfParams) -> Result<EkfRun> {
    if map.is_empty() {
        return Err(Error::InvalidInput("cannot localise against an empty map".into()));
    }
    if session.poses.is_empty() {
        return Err(Error::InvalidInput(format!("session {} has no poses", session.session_id)));
    }
    let m = &params.motion;
    let sn = &params.sensor;
    let q = Matrix3::from_diagonal(&Vector3::new(
        (m.sigma_v * m.sigma_v).max(MIN_VARIANCE),
        (m.sigma_v * m.sigma_v).max(MIN_VARIANCE),
        (m.sigma_omega * m.sigma_omega).max(MIN_VARIANCE),
    ));
    let r = Matrix2::from_diagonal(&Vector2::new(
        (sn.sigma_range * sn.sigma_range).max(MIN_VARIANCE),
        (sn.sigma_bearing * sn.sigma_bearing).max(MIN_VARIANCE),
    ));
    let trans_noise = Normal::new(0.0, m.sigma_v).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let rot_noise = Normal::new(0.0, m.sigma_omega).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        params.seed,
        TAG_ODOMETRY,
        u64::from(session.session_id.0),
    ));

    let grid = LandmarkGrid::new(map);
    let landmarks = map.landmarks();
    let mut by_pose: Vec<Vec<usize>> = vec![Vec::new(); session.poses.len()];
    for (k, ev) in session.events.iter().enumerate() {
        by_pose[ev.pose_index].push(k);
    }
    // near detections constrain the pose best and are the least ambiguous
    for list in &mut by_pose {
        list.sort_by(|&a, &b| session.events[a].range.total_cmp(&session.events[b].range).then(a.cmp(&b)));
    }

    let p0 = &session.poses[0];
    let (sp, sh) = params.initial_sigma;
    let mut state = EkfState {
        mean: Vector3::new(p0.x, p0.y, p0.heading),
        covariance: Matrix3::from_diagonal(&Vector3::new(
            (sp * sp).max(MIN_VARIANCE),
            (sp * sp).max(MIN_VARIANCE),
            (sh * sh).max(MIN_VARIANCE),
        )),
    };

    let mut run = EkfRun {
        states: Vec::with_capacity(session.poses.len()),
        failed: false,
        detections: session.events.len(),
        associated: 0,
        correct_associations: 0,
        max_position_trace: 0.0,
        spd_violations: 0,
    };

    for (i, pose) in session.poses.iter().enumerate() {
        if i > 0 {
            let mut u = odometry(&session.poses[i - 1], pose);
            // draw all three every step so the noise stream is map independent
            let noise = Vector3::new(
                trans_noise.sample(&mut rng),
                trans_noise.sample(&mut rng),
                rot_noise.sample(&mut rng),
            );
            u += noise;
            predict(&mut state, &u, &q);
        }
        for &k in &by_pose[i] {
            let ev = &session.events[k];
            let z = Vector2::new(ev.range, ev.bearing);
            let angle = state.mean[2] + ev.bearing;
            let gx = state.mean[0] + ev.range * angle.cos();
            let gy = state.mean[1] + ev.range * angle.sin();
            let search = 3.0 * state.position_trace().sqrt() + 3.0;

            let mut best: Option<Candidate> = None;
            let mut in_gate = 0;
            for j in grid.near(gx, gy, search) {
                let lm = &landmarks[j];
                let Some((zhat, h)) = observe(&state.mean, lm.x, lm.y) else {
                    continue;
                };
                let s = h * state.covariance * h.transpose() + r;
                let Some(s_inv) = s.try_inverse() else {
                    continue;
                };
                let mut nu = z - zhat;
                nu[1] = wrap_angle(nu[1]);
                let d2 = (nu.transpose() * s_inv * nu)[(0, 0)];
                if d2 > params.gate {
                    continue;
                }
                in_gate += 1;
                if best.as_ref().is_none_or(|b| d2 < b.d2) {
                    best = Some(Candidate { d2, index: j, innovation: nu, jacobian: h, s_inv });
                }
            }
            // two landmarks inside the gate: a wrong pick would corrupt the
            // estimate, so skip the detection instead
            if in_gate > 1 && params.reject_ambiguous {
                continue;
            }
            let Some(Candidate { index: j, innovation: nu, jacobian: h, s_inv, .. }) = best else {
                continue;
            };
            run.associated += 1;
            if landmarks[j].id == ev.landmark_id {
                run.correct_associations += 1;
            }
            let gain = state.covariance * h.transpose() * s_inv;
            state.mean += gain * nu;
            state.mean[2] = wrap_angle(state.mean[2]);
            // Joseph form keeps the covariance symmetric positive definite
            let ikh = Matrix3::identity() - gain * h;
            let p = ikh * state.covariance * ikh.transpose() + gain * r * gain.transpose();
            state.covariance = 0.5 * (p + p.transpose());
        }
        let spd = state.is_symmetric_positive_definite();
        debug_assert!(spd, "covariance lost positive definiteness at pose {i}");
        if !spd {
            run.spd_violations += 1;
        }
        run.max_position_trace = run.max_position_trace.max(state.position_trace());
        run.states.push(state);
    }

    run.failed = run.max_position_trace > params.max_position_trace
        || run.association_rate() < params.min_association;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{DetectionEvent, Landmark, LandmarkClass, LandmarkId};

    fn straight_poses(n: usize) -> Vec<VehiclePose> {
        (0..n).map(|i| VehiclePose::new(i as f64, i as f64, 0.0, 0.0)).collect()
    }

    fn lane_map() -> FeatureMap {
        let lms = (0..20)
            .flat_map(|i| {
                let x = i as f64 * 5.0;
                [
                    Landmark::new(2 * i, x, 6.0, LandmarkClass::Pole),
                    Landmark::new(2 * i + 1, x + 2.5, -7.0, LandmarkClass::Corner),
                ]
            })
            .collect();
        FeatureMap::new("lane", lms).unwrap()
    }

    fn exact_session(map: &FeatureMap, poses: Vec<VehiclePose>) -> SessionLog {
        let mut events = Vec::new();
        for (i, p) in poses.iter().enumerate() {
            for lm in map.landmarks() {
                let dx = lm.x - p.x;
                let dy = lm.y - p.y;
                if dx.hypot(dy) <= 30.0 {
                    events.push(DetectionEvent {
                        pose_index: i,
                        landmark_id: lm.id,
                        range: dx.hypot(dy),
                        bearing: wrap_angle(dy.atan2(dx) - p.heading),
                    });
                }
            }
        }
        SessionLog::new(0, poses, events).unwrap()
    }

    fn noiseless() -> EkfParams {
        EkfParams {
            motion: MotionNoise {
                sigma_v: 0.0,
                sigma_omega: 0.0,
            },
            sensor: SensorNoise {
                sigma_range: 0.0,
                sigma_bearing: 0.0,
            },
            ..EkfParams::default()
        }
    }

    #[test]
    fn eigenvalue_read_off() {
        let st = EkfState {
            mean: Vector3::zeros(),
            covariance: Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 0.1)),
        };
        assert_eq!(max_cov_magnitude(&[st]).unwrap(), 4.0);
        let sym = Matrix2::new(2.0, 1.0, 1.0, 2.0);
        assert!((max_eigenvalue_2x2(&sym) - 3.0).abs() < 1e-12);
        assert!(max_cov_magnitude(&[]).is_err());
    }

    #[test]
    fn constant_diagonal() {
        let st = EkfState {
            mean: Vector3::zeros(),
            covariance: Matrix3::from_diagonal(&Vector3::new(0.25, 0.25, 1.0)),
        };
        assert_eq!(max_cov_magnitude(&[st, st, st]).unwrap(), 0.25);
    }

    #[test]
    fn odometry_round_trip() {
        let a = VehiclePose::new(0.0, 1.0, 2.0, 0.7);
        let b = VehiclePose::new(1.0, 1.5, 3.1, 1.1);
        let u = odometry(&a, &b);
        let mut st = EkfState {
            mean: Vector3::new(a.x, a.y, a.heading),
            covariance: Matrix3::identity(),
        };
        predict(&mut st, &u, &Matrix3::zeros());
        assert!((st.mean - Vector3::new(b.x, b.y, b.heading)).norm() < 1e-12);
    }

    #[test]
    fn noiseless_run_tracks_truth() {
        let map = lane_map();
        let poses = straight_poses(90);
        let session = exact_session(&map, poses.clone());
        let run = ekf_localize(&map, &session, &noiseless()).unwrap();
        assert_eq!(run.spd_violations, 0);
        assert!(!run.failed);
        assert_eq!(run.associated, run.detections);
        for (st, p) in run.states.iter().zip(&poses) {
            assert!((st.mean[0] - p.x).hypot(st.mean[1] - p.y) < 1e-6);
        }
    }

    #[test]
    fn dead_reckoning_covariance_grows() {
        let map = lane_map();
        let session = SessionLog::new(0, straight_poses(60), vec![]).unwrap();
        let run = ekf_localize(&map, &session, &EkfParams::default()).unwrap();
        for w in run.states.windows(2) {
            assert!(w[1].position_trace() > w[0].position_trace());
        }
        let last = run.states.last().unwrap().max_position_eigenvalue();
        assert_eq!(run.max_cov(), last);
        // no detections means nothing associates
        assert!(run.failed);
    }

    #[test]
    fn empty_map_is_an_error() {
        let session = SessionLog::new(0, straight_poses(3), vec![]).unwrap();
        assert!(ekf_localize(&FeatureMap::empty("x"), &session, &EkfParams::default()).is_err());
    }

    #[test]
    fn far_landmark_does_not_associate() {
        let map = FeatureMap::new("m", vec![Landmark::new(0, 500.0, 500.0, LandmarkClass::Pole)]).unwrap();
        let poses = straight_poses(2);
        let ev = DetectionEvent {
            pose_index: 1,
            landmark_id: LandmarkId(0),
            range: 5.0,
            bearing: 0.3,
        };
        let session = SessionLog::new(0, poses, vec![ev]).unwrap();
        let run = ekf_localize(&map, &session, &EkfParams::default()).unwrap();
        assert_eq!(run.associated, 0);
        assert!(run.failed);
    }
}
