//! Pinhole camera model and ray geometry.
//!
//! Frames used throughout the crate:
//!
//! * world: right-handed, z up, ground plane at z = 0;
//! * camera: x right, y down, z forward (optical axis);
//! * image: u right, v down, origin at the top-left pixel corner.
//!
//! The camera rotation is stored camera-to-world. The intrinsic matrix kept
//! by [`CameraModel`] maps a homogeneous pixel `[u, v, 1]` to an unnormalized
//! camera-frame direction; its inverse is the usual calibration matrix and is
//! what [`CameraModel::project`] applies.

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

use crate::scalar::{cast, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point lies at or behind the camera plane")]
    BehindCamera,
    #[error("rays are parallel, closest point is not unique")]
    Degenerate,
}

/// Camera-to-world rotation of a level, forward-looking camera.
///
/// `yaw` is the vehicle heading measured clockwise seen from above: zero looks
/// along world +y, a quarter turn looks along world +x. With this sign a
/// positive yaw change moves static scenery towards smaller `u`, which is the
/// direction the linear yaw compensation in the tracker removes.
pub fn yaw_rotation<T: Real>(yaw: T) -> Matrix3<T> {
    let (s, c) = yaw.sin_cos();
    let z = T::zero();
    let one = T::one();
    // columns: camera x (right), camera y (down), camera z (forward)
    Matrix3::new(
        c, z, s, //
        -s, z, c, //
        z, -one, z,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T: Real> {
    pub origin: Vector3<T>,
    pub direction: Vector3<T>,
}

impl<T: Real> Ray<T> {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vector3<T>, direction: Vector3<T>) -> Result<Self, GeometryError> {
        let norm = direction.norm();
        if !(norm > T::zero()) || !norm.is_finite() || !origin.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidInput(
                "ray needs a finite origin and a non-zero direction".into(),
            ));
        }
        Ok(Self {
            origin,
            direction: direction / norm,
        })
    }

    pub fn at(&self, distance: T) -> Vector3<T> {
        self.origin + self.direction * distance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel<T: Real> {
    intrinsic: Matrix3<T>,
    projection: Matrix3<T>,
    rotation: Matrix3<T>,
    translation: Vector3<T>,
    width: T,
    height: T,
    aperture: T,
}

fn rotation_tolerance<T: Real>() -> T {
    // 1e-9 for f64; single precision cannot resolve that.
    (T::default_epsilon() * cast(1e3)).max(cast(1e-9))
}

impl<T: Real> CameraModel<T> {
    /// Square-pixel camera with the principal point at the image centre and
    /// focal length `(width / 2) / tan(aperture / 2)`. The pose is identity.
    pub fn from_aperture(width: T, height: T, aperture: T) -> Result<Self, GeometryError> {
        check_size(width, height)?;
        if !(aperture > T::zero() && aperture < T::pi()) {
            return Err(GeometryError::InvalidInput(
                "aperture must lie in (0, pi)".into(),
            ));
        }
        let two: T = cast(2.0);
        let f = (width / two) / (aperture / two).tan();
        let (cx, cy) = (width / two, height / two);
        let z = T::zero();
        let one = T::one();
        let projection = Matrix3::new(f, z, cx, z, f, cy, z, z, one);
        let intrinsic = Matrix3::new(one / f, z, -cx / f, z, one / f, -cy / f, z, z, one);
        Ok(Self {
            intrinsic,
            projection,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            width,
            height,
            aperture,
        })
    }

    /// Camera from a conventional calibration matrix (camera direction to
    /// homogeneous pixel). The horizontal aperture is derived from `fx`.
    pub fn from_calibration(
        calibration: Matrix3<T>,
        width: T,
        height: T,
    ) -> Result<Self, GeometryError> {
        check_size(width, height)?;
        if !calibration.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidInput(
                "calibration matrix has non-finite entries".into(),
            ));
        }
        let intrinsic = calibration.try_inverse().ok_or_else(|| {
            GeometryError::InvalidInput("calibration matrix is singular".into())
        })?;
        let fx = calibration[(0, 0)];
        if !(fx > T::zero()) {
            return Err(GeometryError::InvalidInput(
                "calibration matrix needs a positive fx".into(),
            ));
        }
        let two: T = cast(2.0);
        let aperture = two * (width / (two * fx)).atan();
        Ok(Self {
            intrinsic,
            projection: calibration,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            width,
            height,
            aperture,
        })
    }

    /// Returns a copy of this camera placed at `translation` with the
    /// camera-to-world `rotation`.
    pub fn with_extrinsics(
        &self,
        rotation: Matrix3<T>,
        translation: Vector3<T>,
    ) -> Result<Self, GeometryError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if !(ortho < rotation_tolerance()) || !(rotation.determinant() > T::zero()) {
            return Err(GeometryError::InvalidInput(
                "rotation must be orthonormal with determinant +1".into(),
            ));
        }
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidInput(
                "translation must be finite".into(),
            ));
        }
        Ok(Self {
            rotation,
            translation,
            ..self.clone()
        })
    }

    pub fn intrinsic(&self) -> &Matrix3<T> {
        &self.intrinsic
    }

    /// Inverse of [`Self::intrinsic`], the usual calibration matrix.
    pub fn calibration(&self) -> &Matrix3<T> {
        &self.projection
    }

    pub fn rotation(&self) -> &Matrix3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn height(&self) -> T {
        self.height
    }

    /// Horizontal opening angle in radians.
    pub fn aperture(&self) -> T {
        self.aperture
    }

    pub fn focal_length(&self) -> T {
        self.projection[(0, 0)]
    }

    pub fn principal_point(&self) -> Vector2<T> {
        Vector2::new(self.projection[(0, 2)], self.projection[(1, 2)])
    }

    /// World ray through `pixel`: `R * normalize(intrinsic * [u, v, 1])`.
    pub fn pixel_to_ray(&self, pixel: &Vector2<T>) -> Result<Ray<T>, GeometryError> {
        if !pixel.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidInput("pixel is not finite".into()));
        }
        let cam = self.intrinsic * Vector3::new(pixel.x, pixel.y, T::one());
        let dir = self.rotation * cam.normalize();
        Ok(Ray {
            origin: self.translation,
            direction: dir,
        })
    }

    /// Point in the camera frame.
    pub fn world_to_camera(&self, point: &Vector3<T>) -> Vector3<T> {
        self.rotation.transpose() * (point - self.translation)
    }

    /// Depth of `point` along the optical axis.
    pub fn depth(&self, point: &Vector3<T>) -> T {
        self.world_to_camera(point).z
    }

    /// Projects a world point to pixel coordinates.
    pub fn project(&self, point: &Vector3<T>) -> Result<Vector2<T>, GeometryError> {
        if !point.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidInput("point is not finite".into()));
        }
        let cam = self.world_to_camera(point);
        if !(cam.z > T::zero()) {
            return Err(GeometryError::BehindCamera);
        }
        let p = self.projection * (cam / cam.z);
        Ok(Vector2::new(p.x, p.y))
    }

    pub fn contains(&self, pixel: &Vector2<T>) -> bool {
        pixel.x >= T::zero() && pixel.x <= self.width && pixel.y >= T::zero() && pixel.y <= self.height
    }
}

fn check_size<T: Real>(width: T, height: T) -> Result<(), GeometryError> {
    if !(width > T::zero() && height > T::zero()) || !width.is_finite() || !height.is_finite() {
        return Err(GeometryError::InvalidInput(
            "image width and height must be positive".into(),
        ));
    }
    Ok(())
}

/// Closest approach of two rays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation<T: Real> {
    /// Midpoint between the closest points on both rays.
    pub point: Vector3<T>,
    pub l_prev: T,
    pub l_curr: T,
    /// Shortest distance between the rays.
    pub gap: T,
}

/// Minimum `|d_prev x d_curr|` accepted by [`triangulate`].
pub const PARALLEL_TOLERANCE: f64 = 1e-9;

/// Triangulates the closest point between two rays.
///
/// Solves `o_c + l_c d_c + l_s n = o_p + l_p d_p` with `n` the unit common
/// normal, then returns the midpoint of the two foot points.
pub fn triangulate<T: Real>(
    ray_prev: &Ray<T>,
    ray_curr: &Ray<T>,
) -> Result<Triangulation<T>, GeometryError> {
    let (dp, dc) = (&ray_prev.direction, &ray_curr.direction);
    let cross = dp.cross(dc);
    let cross_norm = cross.norm();
    if !cross_norm.is_finite() {
        return Err(GeometryError::InvalidInput("ray is not finite".into()));
    }
    if cross_norm < cast(PARALLEL_TOLERANCE) {
        return Err(GeometryError::Degenerate);
    }
    let normal = cross / cross_norm;
    let a = Matrix3::from_columns(&[*dc, normal, -dp]);
    let rhs = ray_prev.origin - ray_curr.origin;
    let x = a.lu().solve(&rhs).ok_or(GeometryError::Degenerate)?;
    let (l_curr, l_gap, l_prev) = (x[0], x[1], x[2]);
    if l_curr < T::zero() || l_prev < T::zero() {
        return Err(GeometryError::BehindCamera);
    }
    let point = (ray_curr.at(l_curr) + ray_prev.at(l_prev)) * cast::<T>(0.5);
    Ok(Triangulation {
        point,
        l_prev,
        l_curr,
        gap: l_gap.abs(),
    })
}
