//! PID flight control: one controller per axis (roll, pitch, yaw) plus an
//! altitude loop, composed into motor commands through the X mixer.
//!
//! The attitude loops run at the control rate; the altitude loop steps only
//! when a fresh ultrasonic-derived altitude arrives and its output is held
//! between pings.

use crate::dynamics::{motor_mixer, MotorCommands};
use crate::estimation::AttitudeEstimate;
use crate::wrap_angle;

/// Gains and clamps for one PID loop.
#[derive(Debug, Clone, Copy)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Magnitude clamp on the accumulated integral \[error*s\].
    pub integral_limit: f64,
    /// Magnitude clamp on the controller output.
    pub output_limit: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), crate::SimError> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(crate::SimError::invalid(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("integral_limit", self.integral_limit),
            ("output_limit", self.output_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::SimError::invalid(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Mutable controller state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    /// Set after the first call; the first derivative is taken as zero.
    pub initialized: bool,
}

/// One PID update: clamped integral, derivative on error (zero on the first
/// call), clamped output.
pub fn pid_step(gains: &PidGains, state: &PidState, error: f64, dt: f64) -> (f64, PidState) {
    debug_assert!(dt > 0.0);
    let integral = (state.integral + error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        0.0
    };
    let output = (gains.kp * error + gains.ki * integral + gains.kd * derivative)
        .clamp(-gains.output_limit, gains.output_limit);
    (
        output,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    )
}

/// Reference inputs for the four loops.
#[derive(Debug, Clone, Copy, Default)]
pub struct Setpoints {
    pub roll_sp: f64,
    pub pitch_sp: f64,
    pub yaw_sp: f64,
    pub altitude_sp: f64,
}

/// Envelope guard on attitude setpoints \[rad\].
pub const MAX_TILT_SETPOINT: f64 = 0.5;

impl Setpoints {
    /// Clamp roll/pitch references into the supported envelope.
    pub fn clamped(mut self) -> Self {
        self.roll_sp = self.roll_sp.clamp(-MAX_TILT_SETPOINT, MAX_TILT_SETPOINT);
        self.pitch_sp = self.pitch_sp.clamp(-MAX_TILT_SETPOINT, MAX_TILT_SETPOINT);
        self
    }
}

/// Gains for the four loops. The defaults were hand-tuned against the
/// default plant (see the `tune` example, which replays the step responses
/// they were chosen on).
#[derive(Debug, Clone, Copy)]
pub struct PidSet {
    pub roll: PidGains,
    pub pitch: PidGains,
    pub yaw: PidGains,
    pub altitude: PidGains,
}

impl Default for PidSet {
    fn default() -> Self {
        let attitude = PidGains {
            kp: 0.52,
            ki: 0.05,
            kd: 0.074,
            integral_limit: 0.2,
            output_limit: 0.4,
        };
        PidSet {
            roll: attitude,
            pitch: attitude,
            yaw: PidGains {
                kp: 1.0,
                ki: 0.0,
                kd: 0.42,
                integral_limit: 0.5,
                output_limit: 0.3,
            },
            altitude: PidGains {
                kp: 0.25,
                ki: 0.05,
                kd: 0.2,
                integral_limit: 0.3,
                output_limit: 0.5,
            },
        }
    }
}

/// Gains plus state for the four loops, and the held output of the
/// slower altitude loop.
#[derive(Debug, Clone)]
pub struct PidBank {
    pub roll_gains: PidGains,
    pub pitch_gains: PidGains,
    pub yaw_gains: PidGains,
    pub altitude_gains: PidGains,
    pub roll: PidState,
    pub pitch: PidState,
    pub yaw: PidState,
    pub altitude: PidState,
    /// Step used for the altitude loop when a fresh measurement arrives.
    pub altitude_dt: f64,
    held_altitude_output: f64,
}

impl Default for PidBank {
    fn default() -> Self {
        Self::with_default_gains(1.0 / 20.0)
    }
}

impl PidBank {
    pub fn new(gains: &PidSet, altitude_dt: f64) -> Self {
        PidBank {
            roll_gains: gains.roll,
            pitch_gains: gains.pitch,
            yaw_gains: gains.yaw,
            altitude_gains: gains.altitude,
            roll: PidState::default(),
            pitch: PidState::default(),
            yaw: PidState::default(),
            altitude: PidState::default(),
            altitude_dt,
            held_altitude_output: 0.0,
        }
    }

    pub fn with_default_gains(altitude_dt: f64) -> Self {
        Self::new(&PidSet::default(), altitude_dt)
    }

    pub fn held_altitude_output(&self) -> f64 {
        self.held_altitude_output
    }
}

/// Run the four loops on the current estimate and compose motor commands.
///
/// Roll/pitch/yaw step every call at `dt`; the yaw error is wrapped into
/// `(-pi, pi]` first. The altitude loop steps at `bank.altitude_dt` only
/// when `altitude_fresh` is set, holding its last output otherwise, and its
/// output shifts the base throttle of all four motors.
pub fn control_step(
    estimate: &AttitudeEstimate,
    setpoints: &Setpoints,
    bank: &mut PidBank,
    hover_throttle: f64,
    dt: f64,
    altitude_fresh: bool,
) -> MotorCommands {
    let sp = setpoints.clamped();

    let (roll_u, roll_state) =
        pid_step(&bank.roll_gains, &bank.roll, sp.roll_sp - estimate.roll, dt);
    bank.roll = roll_state;
    let (pitch_u, pitch_state) = pid_step(
        &bank.pitch_gains,
        &bank.pitch,
        sp.pitch_sp - estimate.pitch,
        dt,
    );
    bank.pitch = pitch_state;
    let yaw_error = wrap_angle(sp.yaw_sp - estimate.yaw);
    let (yaw_u, yaw_state) = pid_step(&bank.yaw_gains, &bank.yaw, yaw_error, dt);
    bank.yaw = yaw_state;

    if altitude_fresh {
        let (alt_u, alt_state) = pid_step(
            &bank.altitude_gains,
            &bank.altitude,
            sp.altitude_sp - estimate.altitude,
            bank.altitude_dt,
        );
        bank.altitude = alt_state;
        bank.held_altitude_output = alt_u;
    }

    motor_mixer(
        hover_throttle + bank.held_altitude_output,
        roll_u,
        pitch_u,
        yaw_u,
    )
}
