use nalgebra::Vector3;

use super::{DirectionSubset, PositionError, RefineConfig};
use crate::geometry::{triangulate, CameraModel};
use crate::scalar::Real;
use crate::skeleton::{Keypoint, Skeleton2D, Skeleton3D, NUM_KEYPOINTS};
use crate::tracker::EgoPose;

/// Two-frame position estimate before refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimate<T: Real> {
    pub position: Vector3<T>,
    pub skeleton3d: Skeleton3D<T>,
    pub mean_direction: Vector3<T>,
}

/// Normalized mean of the world directions through the keypoints `indices`
/// of `skeleton`, seen from the posed `camera`.
pub fn mean_direction<T: Real>(
    skeleton: &Skeleton2D<T>,
    camera: &CameraModel<T>,
    indices: &[usize],
) -> Result<Vector3<T>, PositionError> {
    let mut sum = Vector3::zeros();
    for &i in indices {
        sum += camera.pixel_to_ray(&skeleton.keypoints()[i])?.direction;
    }
    let norm = sum.norm();
    if !(norm > T::zero()) {
        return Err(PositionError::InvalidInput(
            "keypoint directions cancel out".into(),
        ));
    }
    Ok(sum / norm)
}

pub(crate) fn direction_indices<T: Real>(skeleton: &Skeleton2D<T>, cfg: &RefineConfig<T>) -> Vec<usize> {
    match cfg.direction_subset {
        DirectionSubset::All => (0..NUM_KEYPOINTS).collect(),
        DirectionSubset::Confident => skeleton.select_confident(cfg.drop_fraction),
    }
}

/// Triangulates every keypoint between the previous and the current frame and
/// averages the confident ones into a position.
pub fn initial_position<T: Real>(
    skel_prev: &Skeleton2D<T>,
    skel_curr: &Skeleton2D<T>,
    ego_prev: &EgoPose<T>,
    ego_curr: &EgoPose<T>,
    camera: &CameraModel<T>,
    cfg: &RefineConfig<T>,
) -> Result<InitialEstimate<T>, PositionError> {
    let cam_prev = ego_prev.pose_camera(camera)?;
    let cam_curr = ego_curr.pose_camera(camera)?;

    let mut skeleton3d = Skeleton3D::empty();
    for i in 0..NUM_KEYPOINTS {
        let ray_prev = cam_prev.pixel_to_ray(&skel_prev.keypoints()[i])?;
        let ray_curr = cam_curr.pixel_to_ray(&skel_curr.keypoints()[i])?;
        // parallel or behind-camera pairs leave the keypoint invalid
        if let Ok(t) = triangulate(&ray_prev, &ray_curr) {
            skeleton3d.keypoints[i] = t.point;
            skeleton3d.valid[i] = true;
        }
    }

    let position = if cfg.single_point_init {
        skeleton3d.mean_of(&[Keypoint::LeftHip.index(), Keypoint::RightHip.index()])
    } else {
        skeleton3d.mean_of(&skel_curr.select_confident(cfg.drop_fraction))
    }
    .ok_or(PositionError::NoParallax)?;

    let mean_direction = mean_direction(skel_curr, &cam_curr, &direction_indices(skel_curr, cfg))?;
    Ok(InitialEstimate {
        position,
        skeleton3d,
        mean_direction,
    })
}

/// Pixel height of an upright person of `person_height` metres standing on
/// `ground_point`, seen from the posed `camera`.
pub fn height_px<T: Real>(
    camera: &CameraModel<T>,
    ground_point: &Vector3<T>,
    person_height: T,
) -> Result<T, PositionError> {
    let top = ground_point + Vector3::z() * person_height;
    let v_bottom = camera.project(ground_point)?.y;
    let v_top = camera.project(&top)?.y;
    Ok(v_bottom - v_top)
}

pub(crate) fn ground_below<T: Real>(p: &Vector3<T>) -> Vector3<T> {
    Vector3::new(p.x, p.y, T::zero())
}
