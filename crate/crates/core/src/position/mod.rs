//! World position estimation for tracked pedestrians.
//!
//! A position is built in three stages: keypoint-wise triangulation between
//! the last two observations of a track, iterative refinement of the
//! distance against the expected pixel height of a person, and
//! constant-velocity Kalman smoothing.

mod initial;
mod kalman;
mod refine;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use initial::{height_px, initial_position, mean_direction, InitialEstimate};
pub use kalman::{KalmanCV, KalmanParams, KalmanStep};
pub use refine::{refine, rescale_distance, step_gain, Refined};

use crate::geometry::{CameraModel, GeometryError};
use crate::scalar::{cast, Real};
use crate::skeleton::{BBox, Skeleton3D};
use crate::tracker::Track;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PositionError {
    #[error("no keypoint could be triangulated (no parallax between frames)")]
    NoParallax,
    #[error("track has too little history for an estimate")]
    InsufficientHistory,
    #[error("non-finite value in position estimate")]
    NonFinite,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Gain schedule for the distance refinement at step `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `r + c`.
    PaperGain,
    /// `1 / (r + c)`.
    Damped,
}

impl std::str::FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-gain" => Ok(Schedule::PaperGain),
            "damped" => Ok(Schedule::Damped),
            other => Err(format!("unknown schedule `{other}` (expected paper-gain or damped)")),
        }
    }
}

/// Keypoints whose viewing directions are averaged into the refinement
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionSubset {
    All,
    Confident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + DeserializeOwned")]
pub struct RefineConfig<T: Real> {
    pub steps: usize,
    pub scale_const: T,
    pub schedule: Schedule,
    /// Assumed person height in metres.
    pub person_height: T,
    pub refinement_enabled: bool,
    /// Initialize from the hip midpoint instead of the keypoint mean.
    pub single_point_init: bool,
    /// Fraction of least probable keypoints left out of the position mean.
    pub drop_fraction: T,
    pub direction_subset: DirectionSubset,
    /// Camera displacement between frames below which triangulation is
    /// skipped, metres.
    pub min_baseline: T,
    /// Starting distance along the mean viewing direction for a track with
    /// neither triangulation nor filter state, metres.
    pub prior_distance: T,
    pub kalman: KalmanParams<T>,
}

impl<T: Real> Default for RefineConfig<T> {
    fn default() -> Self {
        Self {
            steps: 15,
            scale_const: cast(5.0),
            schedule: Schedule::Damped,
            person_height: cast(1.7),
            refinement_enabled: true,
            single_point_init: false,
            drop_fraction: cast(0.3),
            direction_subset: DirectionSubset::All,
            min_baseline: cast(0.05),
            prior_distance: cast(20.0),
            kalman: KalmanParams::default(),
        }
    }
}

impl<T: Real> RefineConfig<T> {
    /// Checks the invariants, naming the offending field.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.person_height > T::zero()) || !self.person_height.is_finite() {
            return Err("person_height must be positive".into());
        }
        if !(self.drop_fraction >= T::zero() && self.drop_fraction < T::one()) {
            return Err("drop_fraction must lie in [0, 1)".into());
        }
        if !(self.min_baseline >= T::zero()) || !self.min_baseline.is_finite() {
            return Err("min_baseline must be non-negative".into());
        }
        if !(self.prior_distance > T::zero()) || !self.prior_distance.is_finite() {
            return Err("prior_distance must be positive".into());
        }
        if !self.scale_const.is_finite() {
            return Err("scale_const must be finite".into());
        }
        if self.schedule == Schedule::Damped && !(self.scale_const + T::one() > T::zero()) {
            return Err("scale_const must exceed -1 for the damped schedule".into());
        }
        let k = &self.kalman;
        for (name, v) in [
            ("kalman.accel_sigma", k.accel_sigma),
            ("kalman.meas_sigma", k.meas_sigma),
            ("kalman.init_pos_var", k.init_pos_var),
            ("kalman.init_vel_var", k.init_vel_var),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Position estimate of one track at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianEstimate<T: Real> {
    pub track_id: u64,
    pub timestamp: T,
    /// Two-frame triangulation; `None` when the frame had no parallax and
    /// refinement started from the filter prediction.
    pub position_initial: Option<Vector3<T>>,
    pub position_refined: Vector3<T>,
    pub position_filtered: Vector3<T>,
    pub skeleton3d: Skeleton3D<T>,
    pub mean_direction: Vector3<T>,
    /// Box of the current observation.
    pub bbox: BBox<T>,
}

/// Runs triangulation, refinement and filtering for the latest observation
/// of `track` and appends the result to it.
///
/// The camera poses come from the ego poses stored with the track's last two
/// observations. When the camera barely moved or no keypoint triangulates,
/// refinement starts from the Kalman prediction, or for a fresh track from
/// `prior_distance` along the mean viewing direction.
pub fn estimate<T: Real>(
    track: &mut Track<T>,
    camera: &CameraModel<T>,
    cfg: &RefineConfig<T>,
) -> Result<PedestrianEstimate<T>, PositionError> {
    let history = track.history();
    let curr = history.back().expect("tracks hold at least one observation").clone();
    let prev = history
        .len()
        .checked_sub(2)
        .map(|i| history[i].clone())
        .ok_or(PositionError::InsufficientHistory)?;
    let posed = curr.ego.pose_camera(camera)?;

    let initial = if (curr.ego.origin - prev.ego.origin).norm() < cfg.min_baseline {
        None
    } else {
        match initial_position(&prev.skeleton, &curr.skeleton, &prev.ego, &curr.ego, camera, cfg) {
            Ok(init) => Some(init),
            Err(PositionError::NoParallax) => None,
            Err(e) => return Err(e),
        }
    };

    let (start, skeleton3d, direction, position_initial) = match initial {
        Some(init) => (init.position, init.skeleton3d, init.mean_direction, Some(init.position)),
        None => {
            let indices = initial::direction_indices(&curr.skeleton, cfg);
            let direction = mean_direction(&curr.skeleton, &posed, &indices)?;
            let start = track
                .kalman()
                .and_then(|kf| kf.predicted_position(curr.timestamp()))
                .unwrap_or_else(|| posed.translation() + direction * cfg.prior_distance);
            (start, Skeleton3D::empty(), direction, None)
        }
    };

    let refined = refine(&start, &direction, curr.bbox.height(), &posed, cfg)?.position;
    if !refined.iter().all(|x| x.is_finite()) {
        return Err(PositionError::NonFinite);
    }
    let kf = track.kalman.get_or_insert_with(|| KalmanCV::new(cfg.kalman));
    let filtered = kf.update_at(&refined, curr.timestamp())?.position;

    let estimate = PedestrianEstimate {
        track_id: track.id(),
        timestamp: curr.timestamp(),
        position_initial,
        position_refined: refined,
        position_filtered: filtered,
        skeleton3d,
        mean_direction: direction,
        bbox: curr.bbox,
    };
    track.push_estimate(estimate.clone());
    Ok(estimate)
}
