//! 2D/3D skeletons in COCO keypoint order and skeleton-derived boxes.

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::scalar::{cast, to_f64, Real};

pub const NUM_KEYPOINTS: usize = 17;

/// COCO keypoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keypoint {
    Nose = 0,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Keypoint {
    pub const ALL: [Keypoint; NUM_KEYPOINTS] = [
        Keypoint::Nose,
        Keypoint::LeftEye,
        Keypoint::RightEye,
        Keypoint::LeftEar,
        Keypoint::RightEar,
        Keypoint::LeftShoulder,
        Keypoint::RightShoulder,
        Keypoint::LeftElbow,
        Keypoint::RightElbow,
        Keypoint::LeftWrist,
        Keypoint::RightWrist,
        Keypoint::LeftHip,
        Keypoint::RightHip,
        Keypoint::LeftKnee,
        Keypoint::RightKnee,
        Keypoint::LeftAnkle,
        Keypoint::RightAnkle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Keypoint::Nose => "nose",
            Keypoint::LeftEye => "left_eye",
            Keypoint::RightEye => "right_eye",
            Keypoint::LeftEar => "left_ear",
            Keypoint::RightEar => "right_ear",
            Keypoint::LeftShoulder => "left_shoulder",
            Keypoint::RightShoulder => "right_shoulder",
            Keypoint::LeftElbow => "left_elbow",
            Keypoint::RightElbow => "right_elbow",
            Keypoint::LeftWrist => "left_wrist",
            Keypoint::RightWrist => "right_wrist",
            Keypoint::LeftHip => "left_hip",
            Keypoint::RightHip => "right_hip",
            Keypoint::LeftKnee => "left_knee",
            Keypoint::RightKnee => "right_knee",
            Keypoint::LeftAnkle => "left_ankle",
            Keypoint::RightAnkle => "right_ankle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkeletonError {
    #[error("expected {NUM_KEYPOINTS} keypoints, got {0}")]
    KeypointCount(usize),
    #[error("expected {NUM_KEYPOINTS} probabilities, got {0}")]
    ProbabilityCount(usize),
    #[error("keypoint {0} is not finite")]
    NonFiniteKeypoint(usize),
    #[error("probability of keypoint {0} is outside [0, 1]")]
    Probability(usize),
    #[error("box corners out of order")]
    BoxOrder,
}

/// Axis-aligned pixel box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T: Real> {
    pub u_min: T,
    pub v_min: T,
    pub u_max: T,
    pub v_max: T,
}

impl<T: Real> BBox<T> {
    pub fn new(u_min: T, v_min: T, u_max: T, v_max: T) -> Result<Self, SkeletonError> {
        if !(u_min <= u_max && v_min <= v_max) {
            return Err(SkeletonError::BoxOrder);
        }
        Ok(Self {
            u_min,
            v_min,
            u_max,
            v_max,
        })
    }

    pub fn width(&self) -> T {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> T {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn shift_u(&self, du: T) -> Self {
        Self {
            u_min: self.u_min + du,
            u_max: self.u_max + du,
            ..*self
        }
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = (self.u_max.min(other.u_max) - self.u_min.max(other.u_min)).max(T::zero());
        let h = (self.v_max.min(other.v_max) - self.v_min.max(other.v_min)).max(T::zero());
        w * h
    }

    /// Smallest box enclosing both.
    pub fn hull(&self, other: &Self) -> Self {
        Self {
            u_min: self.u_min.min(other.u_min),
            v_min: self.v_min.min(other.v_min),
            u_max: self.u_max.max(other.u_max),
            v_max: self.v_max.max(other.v_max),
        }
    }

    pub fn iou(&self, other: &Self) -> T {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union > T::zero() {
            inter / union
        } else {
            T::zero()
        }
    }

    pub fn contains(&self, p: &Vector2<T>) -> bool {
        p.x >= self.u_min && p.x <= self.u_max && p.y >= self.v_min && p.y <= self.v_max
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.u_min, self.v_min, self.u_max, self.v_max]
    }
}

/// 17 image keypoints with their detection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton2D<T: Real> {
    keypoints: [Vector2<T>; NUM_KEYPOINTS],
    probs: [T; NUM_KEYPOINTS],
}

impl<T: Real> Skeleton2D<T> {
    pub fn new(
        keypoints: [Vector2<T>; NUM_KEYPOINTS],
        probs: [T; NUM_KEYPOINTS],
    ) -> Result<Self, SkeletonError> {
        for (i, k) in keypoints.iter().enumerate() {
            if !(k.x.is_finite() && k.y.is_finite()) {
                return Err(SkeletonError::NonFiniteKeypoint(i));
            }
        }
        for (i, p) in probs.iter().enumerate() {
            if !(*p >= T::zero() && *p <= T::one()) {
                return Err(SkeletonError::Probability(i));
            }
        }
        Ok(Self { keypoints, probs })
    }

    pub fn from_slices(keypoints: &[[T; 2]], probs: &[T]) -> Result<Self, SkeletonError> {
        if keypoints.len() != NUM_KEYPOINTS {
            return Err(SkeletonError::KeypointCount(keypoints.len()));
        }
        if probs.len() != NUM_KEYPOINTS {
            return Err(SkeletonError::ProbabilityCount(probs.len()));
        }
        let kp = std::array::from_fn(|i| Vector2::new(keypoints[i][0], keypoints[i][1]));
        let pr = std::array::from_fn(|i| probs[i]);
        Self::new(kp, pr)
    }

    pub fn keypoints(&self) -> &[Vector2<T>; NUM_KEYPOINTS] {
        &self.keypoints
    }

    pub fn keypoint(&self, k: Keypoint) -> &Vector2<T> {
        &self.keypoints[k.index()]
    }

    pub fn probs(&self) -> &[T; NUM_KEYPOINTS] {
        &self.probs
    }

    /// Tight box around all 17 keypoints.
    pub fn bbox(&self) -> BBox<T> {
        let first = self.keypoints[0];
        let mut b = BBox {
            u_min: first.x,
            v_min: first.y,
            u_max: first.x,
            v_max: first.y,
        };
        for k in &self.keypoints[1..] {
            b.u_min = b.u_min.min(k.x);
            b.v_min = b.v_min.min(k.y);
            b.u_max = b.u_max.max(k.x);
            b.v_max = b.v_max.max(k.y);
        }
        b
    }

    /// Copy with every `u` shifted by `du`; `v` untouched.
    pub fn shift_u(&self, du: T) -> Self {
        let mut out = self.clone();
        for k in out.keypoints.iter_mut() {
            k.x += du;
        }
        out
    }

    /// Indices kept after dropping the `floor(drop_fraction * 17)` least
    /// probable keypoints. Equal probabilities drop the lower index first.
    /// The result is sorted ascending.
    pub fn select_confident(&self, drop_fraction: T) -> Vec<usize> {
        select_confident(&self.probs, drop_fraction)
    }
}

pub(crate) fn select_confident<T: Real>(probs: &[T; NUM_KEYPOINTS], drop_fraction: T) -> Vec<usize> {
    let frac = to_f64(drop_fraction).clamp(0.0, 1.0);
    // tolerance guards products like 0.3 * 17 landing just under an integer
    let n_drop = ((frac * NUM_KEYPOINTS as f64) + 1e-9).floor() as usize;
    let n_drop = n_drop.min(NUM_KEYPOINTS - 1);
    let mut order: Vec<usize> = (0..NUM_KEYPOINTS).collect();
    // stable sort keeps ascending index among ties
    order.sort_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<usize> = order[n_drop..].to_vec();
    kept.sort_unstable();
    kept
}

/// Triangulated skeleton in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton3D<T: Real> {
    pub keypoints: [Vector3<T>; NUM_KEYPOINTS],
    pub valid: [bool; NUM_KEYPOINTS],
}

impl<T: Real> Skeleton3D<T> {
    pub fn empty() -> Self {
        Self {
            keypoints: [Vector3::zeros(); NUM_KEYPOINTS],
            valid: [false; NUM_KEYPOINTS],
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Mean of the valid keypoints among `indices`.
    pub fn mean_of(&self, indices: &[usize]) -> Option<Vector3<T>> {
        let mut sum = Vector3::zeros();
        let mut n = 0usize;
        for &i in indices {
            if self.valid[i] {
                sum += self.keypoints[i];
                n += 1;
            }
        }
        (n > 0).then(|| sum / cast::<T>(n as f64))
    }
}
