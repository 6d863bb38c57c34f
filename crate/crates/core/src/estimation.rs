//! Complementary attitude filter and ultrasonic altitude recovery.
//!
//! Roll and pitch blend the gyro integration path (trusted short-term) with
//! accelerometer gravity angles (trusted long-term) through the coefficient
//! `alpha`. Samples whose specific-force magnitude falls outside a
//! plausibility window around gravity are treated as pure disturbance and
//! the accelerometer path is dropped entirely for that update. Yaw has no
//! reference on this platform and is gyro-only; its drift is accepted.

use nalgebra::Vector3;

use crate::sensors::{EchoSample, ImuSample, UltrasonicModel};
use crate::{wrap_angle, SimError};

/// Filter output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeEstimate {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Filtered altitude above ground \[m\].
    pub altitude: f64,
    pub time: f64,
}

impl AttitudeEstimate {
    pub fn level_on_ground() -> Self {
        AttitudeEstimate {
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
            altitude: 0.0,
            time: 0.0,
        }
    }
}

/// Blend and gating configuration.
#[derive(Debug, Clone, Copy)]
pub struct FilterParams {
    /// Weight on the gyro path, in [0, 1].
    pub alpha: f64,
    /// Lower edge of the accepted specific-force magnitude window \[m/s^2\].
    pub accel_mag_min: f64,
    /// Upper edge of the window \[m/s^2\].
    pub accel_mag_max: f64,
    /// Low-pass coefficient for raw ultrasonic altitude, in [0, 1].
    pub altitude_lpf_coeff: f64,
    /// Filter update interval \[s\].
    pub dt: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            alpha: 0.98,
            accel_mag_min: 0.5 * 9.81,
            accel_mag_max: 1.5 * 9.81,
            altitude_lpf_coeff: 0.4,
            dt: 1.0 / 250.0,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SimError::invalid(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.accel_mag_min > 0.0 && self.accel_mag_min < self.accel_mag_max) {
            return Err(SimError::invalid(
                "accel plausibility window requires 0 < min < max",
            ));
        }
        if !(0.0..=1.0).contains(&self.altitude_lpf_coeff) {
            return Err(SimError::invalid("altitude_lpf_coeff must be in [0, 1]"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::invalid("filter dt must be > 0"));
        }
        Ok(())
    }
}

/// Roll and pitch implied by a specific-force reading, under the
/// level-at-rest-reads-(0, 0, -g) convention.
pub fn accel_to_angles(accel: &Vector3<f64>) -> Result<(f64, f64), SimError> {
    if accel.norm() == 0.0 {
        return Err(SimError::invalid(
            "zero-magnitude accelerometer sample has no attitude",
        ));
    }
    let roll = (-accel.y).atan2(-accel.z);
    let pitch = accel.x.atan2(accel.y.hypot(accel.z));
    Ok((roll, pitch))
}

/// One complementary-filter update. The altitude channel is untouched; see
/// [`altitude_update`].
pub fn complementary_update(
    prev: &AttitudeEstimate,
    imu: &ImuSample,
    params: &FilterParams,
) -> AttitudeEstimate {
    let dt = params.dt;
    let gyro_roll = prev.roll + imu.gyro.x * dt;
    let gyro_pitch = prev.pitch + imu.gyro.y * dt;
    let yaw = wrap_angle(prev.yaw + imu.gyro.z * dt);

    let mag = imu.accel.norm();
    let (roll, pitch) = if mag >= params.accel_mag_min && mag <= params.accel_mag_max {
        // accel_to_angles cannot fail here: the window excludes zero.
        let (accel_roll, accel_pitch) = accel_to_angles(&imu.accel).expect("gated magnitude");
        (
            params.alpha * gyro_roll + (1.0 - params.alpha) * accel_roll,
            params.alpha * gyro_pitch + (1.0 - params.alpha) * accel_pitch,
        )
    } else {
        // Complete disturbance: remove the accelerometer's influence.
        (gyro_roll, gyro_pitch)
    };

    AttitudeEstimate {
        roll: wrap_angle(roll),
        pitch: wrap_angle(pitch),
        yaw,
        altitude: prev.altitude,
        time: imu.time,
    }
}

/// Low-pass the altitude implied by an echo sample into the running
/// estimate; dropouts hold the previous value.
pub fn altitude_update(
    prev_altitude: f64,
    echo: &EchoSample,
    model: &UltrasonicModel,
    params: &FilterParams,
) -> f64 {
    match echo.echo_time {
        None => prev_altitude,
        Some(t) => {
            let raw = model.sound_speed * t / 2.0;
            let k = params.altitude_lpf_coeff;
            ((1.0 - k) * prev_altitude + k * raw).max(0.0)
        }
    }
}
