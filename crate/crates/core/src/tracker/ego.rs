use nalgebra::{Matrix3, Vector3};

use crate::geometry::{yaw_rotation, CameraModel, GeometryError};
use crate::scalar::{wrap_angle, Real};

/// Vehicle (camera) pose at one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoPose<T: Real> {
    pub timestamp: T,
    pub origin: Vector3<T>,
    /// Heading in radians, clockwise seen from above; see [`yaw_rotation`].
    pub yaw: T,
    /// Full camera-to-world rotation, overriding the yaw-only extrinsic.
    pub rotation: Option<Matrix3<T>>,
}

impl<T: Real> EgoPose<T> {
    pub fn new(timestamp: T, origin: Vector3<T>, yaw: T) -> Self {
        Self {
            timestamp,
            origin,
            yaw: wrap_angle(yaw),
            rotation: None,
        }
    }

    pub fn camera_rotation(&self) -> Matrix3<T> {
        self.rotation.unwrap_or_else(|| yaw_rotation(self.yaw))
    }

    /// `camera` placed at this pose.
    pub fn pose_camera(&self, camera: &CameraModel<T>) -> Result<CameraModel<T>, GeometryError> {
        camera.with_extrinsics(self.camera_rotation(), self.origin)
    }
}

/// Signed yaw change from `prev` to `curr`, wrapped to `(-pi, pi]`.
pub fn delta_yaw<T: Real>(prev: &EgoPose<T>, curr: &EgoPose<T>) -> T {
    wrap_angle(curr.yaw - prev.yaw)
}

/// Linear yaw compensation of an image column:
/// `u_comp = u - (delta_yaw / aperture) * width`.
#[inline]
pub fn compensate_yaw<T: Real>(u: T, delta_yaw: T, aperture: T, width: T) -> T {
    u - yaw_shift(delta_yaw, aperture, width)
}

#[inline]
pub(crate) fn yaw_shift<T: Real>(delta_yaw: T, aperture: T, width: T) -> T {
    delta_yaw / aperture * width
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    #[test]
    fn compensation_values() {
        let alpha = 64.5f64.to_radians();
        assert_eq!(compensate_yaw(400.0, 0.0, alpha, 1600.0), 400.0);
        assert_relative_eq!(compensate_yaw(400.0, alpha, alpha, 1600.0), -1200.0, epsilon = 1e-9);
        let shift = 400.0 - compensate_yaw(400.0, 0.1, alpha, 1600.0);
        assert_relative_eq!(shift, 0.1 / alpha * 1600.0, epsilon = 1e-9);
        assert!((shift - 142.15).abs() < 0.05);
    }

    #[test]
    fn delta_yaw_wraps() {
        let a = EgoPose::new(0.0, Vector3::zeros(), 3.1);
        let b = EgoPose::new(0.1, Vector3::zeros(), -3.1);
        assert_relative_eq!(delta_yaw(&a, &b), 2.0 * std::f64::consts::PI - 6.2, epsilon = 1e-12);
        assert_relative_eq!(delta_yaw(&b, &a), -(2.0 * std::f64::consts::PI - 6.2), epsilon = 1e-12);
    }

    proptest! {
        // For a small pure rotation the linear model tracks the true pixel
        // motion of a static point to within 2% of the image width.
        #[test]
        fn compensation_matches_geometry(
            yaw in -3.0..3.0f64, dyaw in -0.1..0.1f64,
            u in 200.0..1400.0f64, v in 100.0..800.0f64, depth in 2.0..80.0f64,
        ) {
            let cam = CameraModel::from_aperture(1600.0, 900.0, 64.5f64.to_radians()).unwrap();
            let prev = EgoPose::new(0.0, Vector3::new(0.0, 0.0, 1.5), yaw);
            let curr = EgoPose::new(0.1, Vector3::new(0.0, 0.0, 1.5), yaw + dyaw);
            let c0 = prev.pose_camera(&cam).unwrap();
            let c1 = curr.pose_camera(&cam).unwrap();
            let point = c0.pixel_to_ray(&Vector2::new(u, v)).unwrap().at(depth);
            let observed = c1.project(&point);
            prop_assume!(observed.is_ok());
            let predicted = compensate_yaw(u, delta_yaw(&prev, &curr), cam.aperture(), cam.width());
            prop_assert!((predicted - observed.unwrap().x).abs() < 0.02 * 1600.0);
        }
    }
}
