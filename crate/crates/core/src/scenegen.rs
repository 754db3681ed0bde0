//! Synthetic scenes with known ground truth.
//!
//! An ego camera drives along a piecewise-linear path while pedestrians walk
//! their own paths. Each pedestrian is a 17-keypoint stick figure with a
//! walking limb swing; keypoints are projected through the camera, perturbed
//! with Gaussian pixel noise and given distance-dependent probabilities.
//! Pedestrians outside the view or hidden behind a nearer pedestrian produce
//! no detection.

use std::collections::HashSet;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CameraModel;
use crate::harness::io::{CameraConfig, DetectionRecord, EgoRecord, FrameRecord, GtRecord};
use crate::skeleton::{Keypoint, NUM_KEYPOINTS};
use crate::tracker::EgoPose;

/// 50 km/h.
pub const MAX_EGO_SPEED: f64 = 50.0 / 3.6;
/// Radius of the cylinder a pedestrian occupies for occlusion tests.
pub const OCCLUDER_RADIUS: f64 = 0.3;
/// Walk cycle frequency, Hz.
pub const WALK_FREQUENCY: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid scene config field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

fn config_err(field: impl Into<String>, reason: impl Into<String>) -> SceneError {
    SceneError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Seconds.
    pub duration: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default = "CameraConfig::default_sensor")]
    pub camera: CameraConfig,
    /// Height of the camera above the ground, metres.
    #[serde(default = "default_camera_height")]
    pub camera_height: f64,
    pub ego: EgoPath,
    #[serde(default)]
    pub pedestrians: Vec<PedestrianSpec>,
    /// Keypoint pixel noise standard deviation.
    #[serde(default)]
    pub noise_px: f64,
    #[serde(default)]
    pub prob: ProbModel,
    #[serde(default)]
    pub seed: u64,
}

fn default_frame_rate() -> f64 {
    10.0
}

fn default_camera_height() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoPath {
    /// Ground-plane `[x, y]` points.
    pub waypoints: Vec<[f64; 2]>,
    /// m/s.
    #[serde(default)]
    pub speed: f64,
    /// Fixed heading in radians. Defaults to the direction of travel.
    #[serde(default)]
    pub yaw: Option<f64>,
    /// Added to the heading, rad/s.
    #[serde(default)]
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedestrianSpec {
    pub id: u64,
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub speed: f64,
    /// Vertical extent of the keypoints (ankles to eyes), metres.
    #[serde(default = "default_ped_height")]
    pub height: f64,
    /// Facing direction while standing still, radians.
    #[serde(default)]
    pub heading: f64,
}

fn default_ped_height() -> f64 {
    1.7
}

/// `p = clamp(base - distance * falloff + N(0, sigma), 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbModel {
    pub base: f64,
    /// Per metre.
    pub falloff: f64,
    pub sigma: f64,
}

impl Default for ProbModel {
    fn default() -> Self {
        Self {
            base: 0.95,
            falloff: 1.0 / 200.0,
            sigma: 0.02,
        }
    }
}

fn check_waypoints(field: &str, pts: &[[f64; 2]]) -> Result<(), SceneError> {
    if pts.is_empty() {
        return Err(config_err(field, "needs at least one point"));
    }
    if !pts.iter().flatten().all(|x| x.is_finite()) {
        return Err(config_err(field, "non-finite coordinate"));
    }
    Ok(())
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(config_err("duration", "must be positive"));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(config_err("frame_rate", "must be positive"));
        }
        if !self.camera_height.is_finite() {
            return Err(config_err("camera_height", "must be finite"));
        }
        self.camera
            .to_camera()
            .map_err(|e| config_err("camera", e.to_string()))?;
        check_waypoints("ego.waypoints", &self.ego.waypoints)?;
        if !(self.ego.speed >= 0.0 && self.ego.speed <= MAX_EGO_SPEED + 1e-9) {
            return Err(config_err("ego.speed", "must lie in [0, 50 km/h]"));
        }
        if !self.ego.yaw.is_none_or(f64::is_finite) {
            return Err(config_err("ego.yaw", "must be finite"));
        }
        if !self.ego.yaw_rate.is_finite() {
            return Err(config_err("ego.yaw_rate", "must be finite"));
        }
        let mut ids = HashSet::new();
        for (i, p) in self.pedestrians.iter().enumerate() {
            let field = |name: &str| format!("pedestrians[{i}].{name}");
            if !ids.insert(p.id) {
                return Err(config_err(field("id"), "duplicate id"));
            }
            check_waypoints(&field("waypoints"), &p.waypoints)?;
            if !(p.speed >= 0.0 && p.speed.is_finite()) {
                return Err(config_err(field("speed"), "must be non-negative"));
            }
            if !(p.height > 0.0 && p.height.is_finite()) {
                return Err(config_err(field("height"), "must be positive"));
            }
            if !p.heading.is_finite() {
                return Err(config_err(field("heading"), "must be finite"));
            }
        }
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return Err(config_err("noise_px", "must be non-negative"));
        }
        let pm = &self.prob;
        if !(0.0..=1.0).contains(&pm.base) {
            return Err(config_err("prob.base", "must lie in [0, 1]"));
        }
        if !(pm.falloff >= 0.0 && pm.falloff.is_finite()) {
            return Err(config_err("prob.falloff", "must be non-negative"));
        }
        if !(pm.sigma >= 0.0 && pm.sigma.is_finite()) {
            return Err(config_err("prob.sigma", "must be non-negative"));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }
}

/// Arc-length parametrized polyline.
#[derive(Debug, Clone)]
struct Polyline {
    points: Vec<Vector2<f64>>,
    cumulative: Vec<f64>,
}

impl Polyline {
    fn new(pts: &[[f64; 2]]) -> Self {
        let points: Vec<_> = pts.iter().map(|p| Vector2::new(p[0], p[1])).collect();
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + (w[1] - w[0]).norm());
        }
        Self { points, cumulative }
    }

    /// Position at arc length `s` (clamped to the ends) and the direction of
    /// the segment it lies on, if the path has any length.
    fn at(&self, s: f64) -> (Vector2<f64>, Option<Vector2<f64>>) {
        let total = *self.cumulative.last().unwrap();
        if self.points.len() == 1 || total == 0.0 {
            return (self.points[0], None);
        }
        let s = s.clamp(0.0, total);
        let mut seg = self.cumulative.partition_point(|&c| c <= s).saturating_sub(1);
        seg = seg.min(self.points.len() - 2);
        // skip zero-length segments
        while self.cumulative[seg + 1] - self.cumulative[seg] == 0.0 && seg > 0 {
            seg -= 1;
        }
        let a = self.points[seg];
        let b = self.points[seg + 1];
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        if len == 0.0 {
            return (a, None);
        }
        let dir = (b - a) / len;
        (a + dir * (s - self.cumulative[seg]), Some(dir))
    }
}

/// Compass heading of a ground-plane direction.
fn heading_of(dir: &Vector2<f64>) -> f64 {
    dir.x.atan2(dir.y)
}

/// Body template: (forward, left, up) as fractions of stature.
const TEMPLATE: [[f64; 3]; NUM_KEYPOINTS] = [
    [0.05, 0.0, 0.91],
    [0.04, 0.018, 0.93],
    [0.04, -0.018, 0.93],
    [0.0, 0.04, 0.92],
    [0.0, -0.04, 0.92],
    [0.0, 0.10, 0.82],
    [0.0, -0.10, 0.82],
    [0.0, 0.12, 0.63],
    [0.0, -0.12, 0.63],
    [0.0, 0.12, 0.48],
    [0.0, -0.12, 0.48],
    [0.0, 0.055, 0.53],
    [0.0, -0.055, 0.53],
    [0.0, 0.05, 0.29],
    [0.0, -0.05, 0.29],
    [0.0, 0.035, 0.05],
    [0.0, -0.035, 0.05],
];

/// Vertical keypoint extent of the template as a fraction of stature.
pub const TEMPLATE_SPAN: f64 = 0.93 - 0.05;

/// Walking speed at which the limb swing reaches full amplitude, m/s.
const FULL_SWING_SPEED: f64 = 1.4;

/// World-space body of one pedestrian at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPose {
    pub keypoints: [Vector3<f64>; NUM_KEYPOINTS],
    /// Keypoint centroid; the ground-truth position.
    pub center: Vector3<f64>,
    /// Point on the ground below the body axis.
    pub ground: Vector2<f64>,
    /// Full stature, the height of the occluding cylinder.
    pub stature: f64,
}

/// Places the template at `ground` facing `heading`. `keypoint_height` is the
/// ankle-to-eye extent; `swing` in [-1, 1] drives the limbs.
pub fn body_pose(ground: Vector2<f64>, heading: f64, keypoint_height: f64, swing: f64) -> BodyPose {
    let stature = keypoint_height / TEMPLATE_SPAN;
    let forward = Vector2::new(heading.sin(), heading.cos());
    let left = Vector2::new(-forward.y, forward.x);
    let mut keypoints = [Vector3::zeros(); NUM_KEYPOINTS];
    for (i, t) in TEMPLATE.iter().enumerate() {
        let mut f = t[0];
        // arms swing opposite to the legs on the same side
        let side = if t[1] > 0.0 { 1.0 } else { -1.0 };
        match i {
            i if i == Keypoint::LeftElbow.index() || i == Keypoint::RightElbow.index() => {
                f += 0.04 * swing * side
            }
            i if i == Keypoint::LeftWrist.index() || i == Keypoint::RightWrist.index() => {
                f += 0.08 * swing * side
            }
            i if i == Keypoint::LeftKnee.index() || i == Keypoint::RightKnee.index() => {
                f -= 0.06 * swing * side
            }
            i if i == Keypoint::LeftAnkle.index() || i == Keypoint::RightAnkle.index() => {
                f -= 0.12 * swing * side
            }
            _ => {}
        }
        let xy = ground + (forward * f + left * t[1]) * stature;
        keypoints[i] = Vector3::new(xy.x, xy.y, t[2] * stature);
    }
    let center = keypoints.iter().sum::<Vector3<f64>>() / NUM_KEYPOINTS as f64;
    BodyPose {
        keypoints,
        center,
        ground,
        stature,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Occluded,
    OutOfView,
}

/// Whether the segment from `from` to `to` passes through the vertical
/// cylinder of radius `radius` standing on `base` with height `height`.
fn segment_hits_cylinder(
    from: &Vector3<f64>,
    to: &Vector3<f64>,
    base: &Vector2<f64>,
    radius: f64,
    height: f64,
) -> bool {
    let d = to - from;
    let dxy = Vector2::new(d.x, d.y);
    let rel = Vector2::new(from.x, from.y) - base;
    let a = dxy.norm_squared();
    let b = 2.0 * dxy.dot(&rel);
    let c = rel.norm_squared() - radius * radius;
    let (s0, s1) = if a == 0.0 {
        if c > 0.0 {
            return false;
        }
        (0.0, 1.0)
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return false;
        }
        let sq = disc.sqrt();
        ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a))
    };
    let lo = s0.max(0.0);
    let hi = s1.min(1.0);
    if lo > hi {
        return false;
    }
    let z_lo = from.z + d.z * lo;
    let z_hi = from.z + d.z * hi;
    z_lo.min(z_hi) <= height && z_lo.max(z_hi) >= 0.0
}

/// Classifies `target` as seen by a posed `camera`.
///
/// A keypoint behind the camera makes the whole body out of view, as does
/// every keypoint falling outside the image. Otherwise the body is occluded
/// when the cylinder of a nearer pedestrian crosses the line of sight to its
/// centre.
pub fn visibility(target: &BodyPose, others: &[&BodyPose], camera: &CameraModel<f64>) -> Visibility {
    let mut any_inside = false;
    for k in &target.keypoints {
        match camera.project(k) {
            Ok(px) => any_inside |= camera.contains(&px),
            Err(_) => return Visibility::OutOfView,
        }
    }
    if !any_inside {
        return Visibility::OutOfView;
    }
    let origin = camera.translation();
    let depth = camera.depth(&target.center);
    for other in others {
        if std::ptr::eq(*other, target) || camera.depth(&other.center) >= depth {
            continue;
        }
        if segment_hits_cylinder(origin, &target.center, &other.ground, OCCLUDER_RADIUS, other.stature) {
            return Visibility::Occluded;
        }
    }
    Visibility::Visible
}

/// Ego pose at time `t`.
fn ego_pose(cfg: &SceneConfig, path: &Polyline, t: f64) -> EgoPose<f64> {
    let (xy, dir) = path.at(cfg.ego.speed * t);
    let base = cfg
        .ego
        .yaw
        .or_else(|| dir.map(|d| heading_of(&d)))
        .unwrap_or(0.0);
    EgoPose::new(t, Vector3::new(xy.x, xy.y, cfg.camera_height), base + cfg.ego.yaw_rate * t)
}

fn pedestrian_at(spec: &PedestrianSpec, path: &Polyline, t: f64, phase: f64) -> BodyPose {
    let s = spec.speed * t;
    let (xy, dir) = path.at(s);
    let total = *path.cumulative.last().unwrap();
    let walking = spec.speed > 0.0 && s < total;
    let heading = dir.map_or(spec.heading, |d| heading_of(&d));
    let swing = if walking {
        (spec.speed / FULL_SWING_SPEED).min(1.0)
            * (2.0 * std::f64::consts::PI * WALK_FREQUENCY * t + phase).sin()
    } else {
        0.0
    };
    body_pose(xy, heading, spec.height, swing)
}

/// Generates all frames of a scene. Output depends only on `cfg`.
pub fn generate(cfg: &SceneConfig) -> Result<Vec<FrameRecord>, SceneError> {
    cfg.validate()?;
    let camera = cfg
        .camera
        .to_camera()
        .map_err(|e| config_err("camera", e.to_string()))?;
    let ego_path = Polyline::new(&cfg.ego.waypoints);
    let ped_paths: Vec<_> = cfg.pedestrians.iter().map(|p| Polyline::new(&p.waypoints)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pixel_noise = Normal::new(0.0, cfg.noise_px).expect("validated sigma");
    let prob_noise = Normal::new(0.0, cfg.prob.sigma).expect("validated sigma");
    // fixed per-pedestrian walk phases, drawn first
    let phases: Vec<f64> = cfg
        .pedestrians
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
        .collect();

    let mut frames = Vec::with_capacity(cfg.frame_count());
    for k in 0..cfg.frame_count() {
        let t = k as f64 / cfg.frame_rate;
        let ego = ego_pose(cfg, &ego_path, t);
        let posed = ego
            .pose_camera(&camera)
            .map_err(|e| config_err("camera", e.to_string()))?;
        let bodies: Vec<BodyPose> = cfg
            .pedestrians
            .iter()
            .zip(&ped_paths)
            .zip(&phases)
            .map(|((spec, path), &phase)| pedestrian_at(spec, path, t, phase))
            .collect();
        let refs: Vec<&BodyPose> = bodies.iter().collect();

        let mut det = Vec::new();
        let mut gt = Vec::new();
        for (spec, body) in cfg.pedestrians.iter().zip(&bodies) {
            let vis = visibility(body, &refs, &posed);
            if vis == Visibility::OutOfView {
                continue;
            }
            let exact: Vec<Vector2<f64>> = body
                .keypoints
                .iter()
                .map(|k| posed.project(k).expect("checked in front of the camera"))
                .collect();
            let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in &exact {
                u0 = u0.min(p.x);
                v0 = v0.min(p.y);
                u1 = u1.max(p.x);
                v1 = v1.max(p.y);
            }
            gt.push(GtRecord {
                id: spec.id,
                pos: [body.center.x, body.center.y, body.center.z],
                bbox: [u0, v0, u1, v1],
                occ: vis == Visibility::Occluded,
            });
            if vis == Visibility::Occluded {
                continue;
            }
            let distance = (body.center - posed.translation()).norm();
            let kp = exact
                .iter()
                .map(|p| {
                    let du = pixel_noise.sample(&mut rng);
                    let dv = pixel_noise.sample(&mut rng);
                    [p.x + du, p.y + dv]
                })
                .collect();
            let p = (0..NUM_KEYPOINTS)
                .map(|_| {
                    let raw = cfg.prob.base - distance * cfg.prob.falloff + prob_noise.sample(&mut rng);
                    raw.clamp(0.0, 1.0)
                })
                .collect();
            det.push(DetectionRecord { kp, p });
        }
        frames.push(FrameRecord {
            t,
            ego: EgoRecord::from_pose(&ego),
            det,
            gt: Some(gt),
        });
    }
    Ok(frames)
}

/// Straight-drive scene: ego along +y at `ego_speed`, standing pedestrians
/// at the given ground positions. The first pedestrian gets id 1.
pub fn straight_drive(
    ego_speed: f64,
    duration: f64,
    pedestrians: &[[f64; 2]],
    noise_px: f64,
    seed: u64,
) -> SceneConfig {
    SceneConfig {
        duration,
        frame_rate: default_frame_rate(),
        camera: CameraConfig::default_sensor(),
        camera_height: default_camera_height(),
        ego: EgoPath {
            waypoints: vec![[0.0, 0.0], [0.0, 1000.0]],
            speed: ego_speed,
            yaw: None,
            yaw_rate: 0.0,
        },
        pedestrians: pedestrians
            .iter()
            .enumerate()
            .map(|(i, p)| PedestrianSpec {
                id: i as u64 + 1,
                waypoints: vec![*p],
                speed: 0.0,
                height: default_ped_height(),
                heading: 0.0,
            })
            .collect(),
        noise_px,
        prob: ProbModel::default(),
        seed,
    }
}

/// `n` pedestrians on both sides of a road running along +y, 3 to 10 m from
/// its centre line with `y` drawn from `y_range`. Every third one stands
/// still; the others walk 30 m along the road in either direction. Ids start
/// at 1.
pub fn roadside_pedestrians(n: usize, y_range: (f64, f64), seed: u64) -> Vec<PedestrianSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let x = side * rng.random_range(3.0..10.0);
            let y = rng.random_range(y_range.0..y_range.1);
            let (waypoints, speed) = if i % 3 == 0 {
                (vec![[x, y]], 0.0)
            } else {
                let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (vec![[x, y], [x, y + dir * 30.0]], rng.random_range(1.0..1.5))
            };
            PedestrianSpec {
                id: i as u64 + 1,
                waypoints,
                speed,
                height: rng.random_range(1.5..1.8),
                heading: 0.0,
            }
        })
        .collect()
}
