//! Constant-velocity Kalman filter on 3D world position.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::PositionError;
use crate::scalar::{cast, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + DeserializeOwned")]
pub struct KalmanParams<T: Real> {
    /// White acceleration noise, m/s^2.
    pub accel_sigma: T,
    /// Position measurement noise, m.
    pub meas_sigma: T,
    /// Initial position variance, m^2.
    pub init_pos_var: T,
    /// Initial velocity variance, m^2/s^2.
    pub init_vel_var: T,
}

impl<T: Real> Default for KalmanParams<T> {
    fn default() -> Self {
        Self {
            accel_sigma: cast(2.0),
            meas_sigma: cast(1.0),
            init_pos_var: cast(4.0),
            init_vel_var: cast(25.0),
        }
    }
}

/// Result of one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanStep<T: Real> {
    pub position: Vector3<T>,
    /// Measurement minus predicted position; `None` on the initializing or a
    /// skipped step.
    pub innovation: Option<Vector3<T>>,
    /// The measurement was not finite and only the prediction ran.
    pub skipped: bool,
}

/// State `[x, y, z, vx, vy, vz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanCV<T: Real> {
    params: KalmanParams<T>,
    state: Vector6<T>,
    covariance: Matrix6<T>,
    timestamp: Option<T>,
    initialized: bool,
}

impl<T: Real> KalmanCV<T> {
    pub fn new(params: KalmanParams<T>) -> Self {
        Self {
            params,
            state: Vector6::zeros(),
            covariance: Matrix6::identity(),
            timestamp: None,
            initialized: false,
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn position(&self) -> Vector3<T> {
        self.state.fixed_rows::<3>(0).into()
    }

    pub fn velocity(&self) -> Vector3<T> {
        self.state.fixed_rows::<3>(3).into()
    }

    pub fn covariance(&self) -> &Matrix6<T> {
        &self.covariance
    }

    pub fn timestamp(&self) -> Option<T> {
        self.timestamp
    }

    fn transition(dt: T) -> Matrix6<T> {
        let mut f = Matrix6::identity();
        for i in 0..3 {
            f[(i, i + 3)] = dt;
        }
        f
    }

    fn process_noise(&self, dt: T) -> Matrix6<T> {
        let q = self.params.accel_sigma * self.params.accel_sigma;
        let dt2 = dt * dt;
        let half: T = cast(0.5);
        let quarter: T = cast(0.25);
        let mut m = Matrix6::zeros();
        for i in 0..3 {
            m[(i, i)] = quarter * dt2 * dt2 * q;
            m[(i, i + 3)] = half * dt2 * dt * q;
            m[(i + 3, i)] = half * dt2 * dt * q;
            m[(i + 3, i + 3)] = dt2 * q;
        }
        m
    }

    /// Position predicted for `timestamp` without touching the filter.
    pub fn predicted_position(&self, timestamp: T) -> Option<Vector3<T>> {
        let last = self.timestamp.filter(|_| self.initialized)?;
        let dt = timestamp - last;
        Some(self.position() + self.velocity() * dt)
    }

    fn predict(&mut self, dt: T) {
        let f = Self::transition(dt);
        self.state = f * self.state;
        self.covariance = f * self.covariance * f.transpose() + self.process_noise(dt);
        self.symmetrize();
    }

    fn symmetrize(&mut self) {
        let half: T = cast(0.5);
        self.covariance = (self.covariance + self.covariance.transpose()) * half;
    }

    /// Predicts over `dt` seconds and corrects with `measurement`. The first
    /// finite measurement initializes the state with zero velocity.
    pub fn update(&mut self, measurement: &Vector3<T>, dt: T) -> Result<KalmanStep<T>, PositionError> {
        if !(dt >= T::zero()) {
            return Err(PositionError::InvalidInput(
                "kalman time step must be non-negative".into(),
            ));
        }
        let finite = measurement.iter().all(|x| x.is_finite());
        let t = self.timestamp.unwrap_or_else(T::zero) + dt;
        if !self.initialized {
            if !finite {
                return Err(PositionError::NonFinite);
            }
            self.state = Vector6::new(
                measurement.x,
                measurement.y,
                measurement.z,
                T::zero(),
                T::zero(),
                T::zero(),
            );
            let mut p = Matrix6::zeros();
            for i in 0..3 {
                p[(i, i)] = self.params.init_pos_var;
                p[(i + 3, i + 3)] = self.params.init_vel_var;
            }
            self.covariance = p;
            self.initialized = true;
            self.timestamp = Some(t);
            return Ok(KalmanStep {
                position: *measurement,
                innovation: None,
                skipped: false,
            });
        }

        self.predict(dt);
        self.timestamp = Some(t);
        if !finite {
            return Ok(KalmanStep {
                position: self.position(),
                innovation: None,
                skipped: true,
            });
        }
        let mut h = Matrix3x6::zeros();
        for i in 0..3 {
            h[(i, i)] = T::one();
        }
        let r = Matrix3::identity() * (self.params.meas_sigma * self.params.meas_sigma);
        let innovation = measurement - h * self.state;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or(PositionError::NonFinite)?;
        let gain = self.covariance * h.transpose() * s_inv;
        self.state += gain * innovation;
        // Joseph form keeps the covariance positive semidefinite
        let i_kh = Matrix6::identity() - gain * h;
        self.covariance = i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        self.symmetrize();
        Ok(KalmanStep {
            position: self.position(),
            innovation: Some(innovation),
            skipped: false,
        })
    }

    /// [`Self::update`] with `dt` taken from the previous step's timestamp.
    pub fn update_at(&mut self, measurement: &Vector3<T>, timestamp: T) -> Result<KalmanStep<T>, PositionError> {
        let dt = match self.timestamp {
            Some(last) if self.initialized => timestamp - last,
            _ => {
                self.timestamp = Some(timestamp);
                T::zero()
            }
        };
        let step = self.update(measurement, dt)?;
        self.timestamp = Some(timestamp);
        Ok(step)
    }
}
