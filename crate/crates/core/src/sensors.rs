//! Sensor models: a 6-DOF IMU with drifting gyro bias and motor-vibration
//! contamination on the accelerometer, and an ultrasonic ranger reporting
//! round-trip echo time.
//!
//! The accelerometer reports the gravity reference rotated into the body
//! frame (`(0, 0, -g)` when level), which is what the complementary filter
//! inverts; thrust-induced linear acceleration is not modelled. None of the
//! noise magnitudes come from the reference platform — all defaults are
//! invented desk-scale values and are configurable.

use nalgebra::Vector3;

use crate::dynamics::QuadState;
use crate::rng::{stream, CounterRng};

/// One IMU reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Body rates \[rad/s\].
    pub gyro: Vector3<f64>,
    /// Specific force \[m/s^2\]; (0, 0, -g) when level at rest.
    pub accel: Vector3<f64>,
    /// Sample time \[s\].
    pub time: f64,
}

/// Gyro error model: initial bias, bias random walk, white noise.
#[derive(Debug, Clone, Copy)]
pub struct GyroModel {
    /// Initial bias \[rad/s\].
    pub bias0: Vector3<f64>,
    /// Bias random-walk intensity \[rad/s per sqrt(s)\].
    pub bias_random_walk_std: f64,
    /// Per-sample white noise \[rad/s\].
    pub white_noise_std: f64,
}

impl Default for GyroModel {
    fn default() -> Self {
        GyroModel {
            bias0: Vector3::zeros(),
            bias_random_walk_std: 2e-5,
            white_noise_std: 2e-3,
        }
    }
}

impl GyroModel {
    /// Noise-free, bias-free gyro.
    pub fn ideal() -> Self {
        GyroModel {
            bias0: Vector3::zeros(),
            bias_random_walk_std: 0.0,
            white_noise_std: 0.0,
        }
    }
}

/// Accelerometer error model: white noise, throttle-proportional sinusoidal
/// motor vibration, and rare large-magnitude spikes.
#[derive(Debug, Clone, Copy)]
pub struct AccelModel {
    /// Per-sample white noise \[m/s^2\].
    pub white_noise_std: f64,
    /// Vibration amplitude per unit mean throttle \[m/s^2\].
    pub vibration_amplitude_per_throttle: f64,
    /// Vibration frequency \[Hz\].
    pub vibration_freq: f64,
    /// Per-sample probability of an additive outlier.
    pub spike_probability: f64,
    /// Outlier magnitude \[m/s^2\].
    pub spike_scale: f64,
}

impl Default for AccelModel {
    fn default() -> Self {
        AccelModel {
            white_noise_std: 0.05,
            vibration_amplitude_per_throttle: 0.6,
            vibration_freq: 120.0,
            spike_probability: 0.002,
            spike_scale: 3.0 * 9.81,
        }
    }
}

impl AccelModel {
    pub fn ideal() -> Self {
        AccelModel {
            white_noise_std: 0.0,
            vibration_amplitude_per_throttle: 0.0,
            vibration_freq: 0.0,
            spike_probability: 0.0,
            spike_scale: 0.0,
        }
    }
}

/// Ultrasonic ranger model.
#[derive(Debug, Clone, Copy)]
pub struct UltrasonicModel {
    /// Speed of sound \[m/s\], fixed-temperature.
    pub sound_speed: f64,
    /// Echo-time noise \[s\].
    pub echo_noise_std: f64,
    /// Beyond this altitude the ping never returns \[m\].
    pub max_range: f64,
    /// Per-ping dropout probability.
    pub dropout_probability: f64,
}

impl Default for UltrasonicModel {
    fn default() -> Self {
        UltrasonicModel {
            sound_speed: 343.0,
            echo_noise_std: 2e-5,
            max_range: 15.0,
            dropout_probability: 0.02,
        }
    }
}

impl UltrasonicModel {
    pub fn ideal() -> Self {
        UltrasonicModel {
            sound_speed: 343.0,
            echo_noise_std: 0.0,
            max_range: f64::INFINITY,
            dropout_probability: 0.0,
        }
    }
}

/// One ultrasonic reading; `echo_time` is absent on dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoSample {
    pub echo_time: Option<f64>,
    pub time: f64,
}

/// Stateful IMU: owns the evolving gyro bias and the per-sample counter
/// keying its draws. Two sensors built from the same seed produce bit-equal
/// streams.
#[derive(Debug, Clone)]
pub struct ImuSensor {
    pub gyro_model: GyroModel,
    pub accel_model: AccelModel,
    seed: u64,
    sample_index: u64,
    gyro_bias: Vector3<f64>,
}

impl ImuSensor {
    pub fn new(gyro_model: GyroModel, accel_model: AccelModel, seed: u64) -> Self {
        ImuSensor {
            gyro_model,
            accel_model,
            seed,
            sample_index: 0,
            gyro_bias: gyro_model.bias0,
        }
    }

    /// Current gyro bias \[rad/s\]; exposed for diagnostics.
    pub fn gyro_bias(&self) -> Vector3<f64> {
        self.gyro_bias
    }

    /// Sample the IMU against the true state. `mean_throttle` scales the
    /// vibration term; `dt` is the sampling interval driving the bias walk.
    pub fn sample(&mut self, true_state: &QuadState, mean_throttle: f64, dt: f64) -> ImuSample {
        let mut gyro_rng = CounterRng::keyed(self.seed, stream::GYRO, &[self.sample_index]);
        let mut accel_rng = CounterRng::keyed(self.seed, stream::ACCEL, &[self.sample_index]);
        self.sample_index += 1;

        let walk = self.gyro_model.bias_random_walk_std * dt.sqrt();
        if walk > 0.0 {
            self.gyro_bias += Vector3::new(
                walk * gyro_rng.gaussian(),
                walk * gyro_rng.gaussian(),
                walk * gyro_rng.gaussian(),
            );
        }
        let mut gyro = true_state.rates + self.gyro_bias;
        if self.gyro_model.white_noise_std > 0.0 {
            gyro += Vector3::new(
                self.gyro_model.white_noise_std * gyro_rng.gaussian(),
                self.gyro_model.white_noise_std * gyro_rng.gaussian(),
                self.gyro_model.white_noise_std * gyro_rng.gaussian(),
            );
        }

        // Gravity reference rotated into the body frame.
        let g = 9.81;
        let mut accel = true_state.rotation().inverse() * Vector3::new(0.0, 0.0, -g);
        if self.accel_model.white_noise_std > 0.0 {
            accel += Vector3::new(
                self.accel_model.white_noise_std * accel_rng.gaussian(),
                self.accel_model.white_noise_std * accel_rng.gaussian(),
                self.accel_model.white_noise_std * accel_rng.gaussian(),
            );
        }
        let vibration = self.accel_model.vibration_amplitude_per_throttle
            * mean_throttle
            * (std::f64::consts::TAU * self.accel_model.vibration_freq * true_state.time).sin();
        accel += Vector3::repeat(vibration);
        if accel_rng.bernoulli(self.accel_model.spike_probability) {
            let axis = accel_rng.below(3) as usize;
            let sign = if accel_rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            accel[axis] += sign * self.accel_model.spike_scale;
        }

        ImuSample {
            gyro,
            accel,
            time: true_state.time,
        }
    }
}

/// Stateful ultrasonic ranger keyed like [`ImuSensor`].
#[derive(Debug, Clone)]
pub struct UltrasonicSensor {
    pub model: UltrasonicModel,
    seed: u64,
    ping_index: u64,
}

impl UltrasonicSensor {
    pub fn new(model: UltrasonicModel, seed: u64) -> Self {
        UltrasonicSensor {
            model,
            seed,
            ping_index: 0,
        }
    }

    /// Ping the ground from `true_altitude` (>= 0) at time `time`.
    pub fn sample(&mut self, true_altitude: f64, time: f64) -> EchoSample {
        let mut rng = CounterRng::keyed(self.seed, stream::ULTRASONIC, &[self.ping_index]);
        self.ping_index += 1;

        if true_altitude > self.model.max_range || rng.bernoulli(self.model.dropout_probability) {
            return EchoSample {
                echo_time: None,
                time,
            };
        }
        let mut echo = 2.0 * true_altitude / self.model.sound_speed;
        if self.model.echo_noise_std > 0.0 {
            echo += self.model.echo_noise_std * rng.gaussian();
        }
        EchoSample {
            echo_time: Some(echo.max(0.0)),
            time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hover_state(z: f64) -> QuadState {
        let mut s = QuadState::grounded();
        s.position.z = z;
        s
    }

    #[test]
    fn noise_free_imu_passes_truth_through() {
        let mut imu = ImuSensor::new(GyroModel::ideal(), AccelModel::ideal(), 1);
        let s = imu.sample(&hover_state(2.0), 0.5, 0.004);
        assert_eq!(s.gyro, Vector3::zeros());
        assert_relative_eq!(s.accel.x, 0.0);
        assert_relative_eq!(s.accel.y, 0.0);
        assert_relative_eq!(s.accel.z, -9.81);
    }

    #[test]
    fn constant_bias_shows_on_every_sample() {
        let gyro = GyroModel {
            bias0: Vector3::new(0.01, 0.0, 0.0),
            ..GyroModel::ideal()
        };
        let mut imu = ImuSensor::new(gyro, AccelModel::ideal(), 1);
        for _ in 0..100 {
            let s = imu.sample(&hover_state(2.0), 0.5, 0.004);
            assert_eq!(s.gyro, Vector3::new(0.01, 0.0, 0.0));
        }
    }

    #[test]
    fn vibration_term_at_sine_peak() {
        let accel = AccelModel {
            vibration_amplitude_per_throttle: 2.0,
            vibration_freq: 1.0,
            ..AccelModel::ideal()
        };
        let mut imu = ImuSensor::new(GyroModel::ideal(), accel, 1);
        let mut state = hover_state(2.0);
        state.time = 0.25; // sin(2*pi*1*0.25) = 1
        let s = imu.sample(&state, 0.5, 0.004);
        // 2.0 * 0.5 * 1 on each axis.
        assert_relative_eq!(s.accel.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.accel.y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.accel.z, -9.81 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tilted_body_sees_rotated_gravity() {
        let mut imu = ImuSensor::new(GyroModel::ideal(), AccelModel::ideal(), 1);
        let mut state = hover_state(2.0);
        state.pitch = std::f64::consts::FRAC_PI_4;
        let s = imu.sample(&state, 0.5, 0.004);
        let g = 9.81 / std::f64::consts::SQRT_2;
        assert_relative_eq!(s.accel.x, g, epsilon = 1e-9);
        assert_relative_eq!(s.accel.z, -g, epsilon = 1e-9);
    }

    #[test]
    fn echo_closed_form_and_degenerate_cases() {
        let mut sonar = UltrasonicSensor::new(UltrasonicModel::ideal(), 1);
        let s = sonar.sample(1.0, 0.0);
        assert_relative_eq!(s.echo_time.unwrap(), 2.0 / 343.0, epsilon = 1e-15);
        assert_relative_eq!(s.echo_time.unwrap(), 5.831e-3, epsilon = 1e-6);

        let s = sonar.sample(0.0, 0.05);
        assert_eq!(s.echo_time, Some(0.0));

        let mut limited = UltrasonicSensor::new(
            UltrasonicModel {
                max_range: 4.0,
                ..UltrasonicModel::ideal()
            },
            1,
        );
        let s = limited.sample(5.0, 0.1);
        assert_eq!(s.echo_time, None);
    }

    #[test]
    fn noise_free_round_trip_altitude_echo() {
        let model = UltrasonicModel::ideal();
        let mut sonar = UltrasonicSensor::new(model, 9);
        for alt in [0.01, 0.5, 1.0, 3.7, 12.0] {
            let echo = sonar.sample(alt, 0.0).echo_time.unwrap();
            let recovered = model.sound_speed * echo / 2.0;
            assert!((recovered - alt).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let gyro = GyroModel::default();
        let accel = AccelModel::default();
        let mut a = ImuSensor::new(gyro, accel, 123);
        let mut b = ImuSensor::new(gyro, accel, 123);
        let state = hover_state(2.0);
        for _ in 0..500 {
            assert_eq!(a.sample(&state, 0.5, 0.004), b.sample(&state, 0.5, 0.004));
        }
    }

    #[test]
    fn bias_random_walk_variance_matches_model() {
        let dt = 0.004;
        let std = 1e-3;
        let gyro = GyroModel {
            bias0: Vector3::zeros(),
            bias_random_walk_std: std,
            white_noise_std: 0.0,
        };
        let mut imu = ImuSensor::new(gyro, AccelModel::ideal(), 7);
        let state = hover_state(2.0);
        let n = 100_000;
        let mut prev = 0.0;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            // With zero rotation and zero white noise the gyro reads the bias.
            let g = imu.sample(&state, 0.5, dt).gyro.x;
            let inc = g - prev;
            prev = g;
            sum += inc;
            sq += inc * inc;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        let expected = std * std * dt;
        assert!(
            (var - expected).abs() < 0.1 * expected,
            "var {var:.3e} vs expected {expected:.3e}"
        );
    }

    #[test]
    fn spike_rate_within_binomial_bounds() {
        let p = 0.01;
        let accel = AccelModel {
            spike_probability: p,
            spike_scale: 5.0 * 9.81,
            ..AccelModel::ideal()
        };
        let mut imu = ImuSensor::new(GyroModel::ideal(), accel, 11);
        let state = hover_state(2.0);
        let n = 100_000u32;
        let mut spikes = 0u32;
        for _ in 0..n {
            let a = imu.sample(&state, 0.5, 0.004).accel;
            let clean = Vector3::new(0.0, 0.0, -9.81);
            if (a - clean).norm() > 1.0 {
                spikes += 1;
            }
        }
        let phat = spikes as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (phat - p).abs() < 3.0 * sigma,
            "spike rate {phat} vs {p} (3 sigma {:.2e})",
            3.0 * sigma
        );
    }
}
