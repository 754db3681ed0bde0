use nalgebra::Vector3;

use super::initial::{ground_below, height_px};
use super::{PositionError, RefineConfig, Schedule};
use crate::geometry::CameraModel;
use crate::scalar::{cast, Real};

/// Gain applied at refinement step `r` (1-based).
pub fn step_gain<T: Real>(schedule: Schedule, r: usize, scale_const: T) -> T {
    let lambda = cast::<T>(r as f64) + scale_const;
    match schedule {
        Schedule::PaperGain => lambda,
        Schedule::Damped => T::one() / lambda,
    }
}

/// One distance update: `l * (1 + (h_est / h_orig - 1) * gain)`.
#[inline]
pub fn rescale_distance<T: Real>(distance: T, h_est: T, h_orig: T, gain: T) -> T {
    distance * (T::one() + (h_est / h_orig - T::one()) * gain)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined<T: Real> {
    pub position: Vector3<T>,
    /// Steps completed before the loop ended.
    pub steps: usize,
}

/// Height-reprojection refinement of `position`.
///
/// Each step reprojects a `person_height` tall person standing below the
/// current position, rescales the distance from the camera by the ratio of
/// reprojected to observed pixel height, and places the position on
/// `mean_direction` at that distance. `camera` must be posed at the current
/// frame. A step whose reprojection fails ends the loop early.
pub fn refine<T: Real>(
    position: &Vector3<T>,
    mean_direction: &Vector3<T>,
    h_orig: T,
    camera: &CameraModel<T>,
    cfg: &RefineConfig<T>,
) -> Result<Refined<T>, PositionError> {
    if !cfg.refinement_enabled {
        return Ok(Refined {
            position: *position,
            steps: 0,
        });
    }
    if !(h_orig > T::zero()) || !h_orig.is_finite() {
        return Err(PositionError::InvalidInput(
            "observed pixel height must be positive".into(),
        ));
    }
    if !position.iter().all(|x| x.is_finite()) {
        return Err(PositionError::NonFinite);
    }
    let origin = *camera.translation();
    let mut current = *position;
    for r in 1..=cfg.steps {
        let h_est = match height_px(camera, &ground_below(&current), cfg.person_height) {
            Ok(h) => h,
            Err(_) => {
                return Ok(Refined {
                    position: current,
                    steps: r - 1,
                })
            }
        };
        let distance = (current - origin).norm();
        let gain = step_gain(cfg.schedule, r, cfg.scale_const);
        let refined = rescale_distance(distance, h_est, h_orig, gain);
        current = origin + mean_direction * refined;
    }
    Ok(Refined {
        position: current,
        steps: cfg.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::EgoPose;
    use approx::assert_relative_eq;

    fn posed() -> CameraModel<f64> {
        let cam = CameraModel::from_aperture(1600.0, 900.0, 64.5f64.to_radians()).unwrap();
        EgoPose::new(0.0, Vector3::new(2.0, -3.0, 1.5), 0.3).pose_camera(&cam).unwrap()
    }

    #[test]
    fn gain_schedules() {
        assert_eq!(step_gain(Schedule::PaperGain, 1, 5.0), 6.0);
        assert_eq!(step_gain(Schedule::Damped, 1, 5.0), 1.0 / 6.0);
        assert_eq!(step_gain(Schedule::Damped, 15, 5.0), 1.0 / 20.0);
    }

    #[test]
    fn distance_update_values() {
        assert_eq!(rescale_distance(10.0, 1.2, 1.0, 1.0), 12.0);
        assert_eq!(rescale_distance(10.0, 3.0, 3.0, 6.0), 10.0);
    }

    #[test]
    fn fixed_point_when_heights_agree() {
        let cam = posed();
        let dir = Vector3::new(0.3, 1.0, -0.02).normalize();
        let start = cam.translation() + dir * 17.0;
        let h = height_px(&cam, &ground_below(&start), 1.7).unwrap();
        let out = refine(&start, &dir, h, &cam, &RefineConfig::default()).unwrap();
        assert_eq!(out.steps, 15);
        assert_relative_eq!(out.position, start, epsilon = 1e-9);
    }

    #[test]
    fn equal_heights_keep_distance_for_any_gain() {
        for gain in [0.0, 1.0 / 6.0, 1.0, 6.0, 20.0, -3.5] {
            assert_eq!(rescale_distance(12.5, 140.0, 140.0, gain), 12.5);
        }
    }

    #[test]
    fn position_snaps_to_mean_direction() {
        let cam = posed();
        let dir = Vector3::new(0.3, 1.0, -0.02).normalize();
        // off-direction start at the right distance
        let start = cam.translation() + Vector3::new(0.5, 1.0, 0.0).normalize() * 17.0;
        let h_truth = height_px(&cam, &ground_below(&(cam.translation() + dir * 17.0)), 1.7).unwrap();
        let cfg = RefineConfig {
            steps: 1,
            ..RefineConfig::default()
        };
        let out = refine(&start, &dir, h_truth, &cam, &cfg).unwrap();
        let on_ray = (out.position - cam.translation()).normalize();
        assert_relative_eq!(on_ray, dir, epsilon = 1e-12);
    }

    #[test]
    fn disabled_and_zero_steps_are_identity() {
        let cam = posed();
        let dir = Vector3::new(0.0, 1.0, 0.0);
        let start = Vector3::new(1.0, 9.0, 0.9);
        let off = RefineConfig {
            refinement_enabled: false,
            ..RefineConfig::default()
        };
        assert_eq!(refine(&start, &dir, 100.0, &cam, &off).unwrap().position, start);
        let zero = RefineConfig {
            steps: 0,
            ..RefineConfig::default()
        };
        let once = refine(&start, &dir, 100.0, &cam, &zero).unwrap().position;
        let twice = refine(&once, &dir, 100.0, &cam, &zero).unwrap().position;
        assert_eq!(once, start);
        assert_eq!(twice, once);
    }

    #[test]
    fn rejects_bad_height() {
        let cam = posed();
        let p = Vector3::new(1.0, 9.0, 0.9);
        assert!(refine(&p, &Vector3::y(), 0.0, &cam, &RefineConfig::default()).is_err());
    }

    #[test]
    fn behind_camera_stops_loop() {
        let cam = posed();
        // the paper gain overshoots through the camera
        let dir = (Vector3::new(2.0, 30.0, 0.9) - cam.translation()).normalize();
        let start = cam.translation() + dir * 20.0;
        let h_truth = height_px(&cam, &ground_below(&(cam.translation() + dir * 10.0)), 1.7).unwrap();
        let cfg = RefineConfig {
            schedule: Schedule::PaperGain,
            ..RefineConfig::default()
        };
        let out = refine(&start, &dir, h_truth, &cam, &cfg).unwrap();
        assert!(out.steps < 15);
    }
}
