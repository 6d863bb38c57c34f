//! Rigid-body quadcopter plant.
//!
//! Four normalized motor throttles map to thrust and body torques on an
//! X-configuration airframe; the state is integrated with semi-implicit
//! Euler at a fixed sub-10 ms step. World frame is ENU (x east, y north,
//! z up); attitude is Z-Y-X Euler (yaw, pitch, roll) with the body frame
//! z-up, matching an accelerometer that reads `(0, 0, -g)` when level at
//! rest.

use nalgebra::{Rotation3, Vector3};

use crate::{wrap_angle, SimError};

/// Pitch magnitude beyond which the small-angle Euler kinematics are no
/// longer meaningful and the step reports divergence.
pub const PITCH_ENVELOPE_RAD: f64 = 80.0 * std::f64::consts::PI / 180.0;

/// Largest accepted integration step.
pub const MAX_DT: f64 = 0.01;

/// Full vehicle state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    /// World position \[m\], z up.
    pub position: Vector3<f64>,
    /// World velocity \[m/s\].
    pub velocity: Vector3<f64>,
    /// Roll about body x \[rad\], in (-pi, pi].
    pub roll: f64,
    /// Pitch about body y \[rad\], in (-pi, pi].
    pub pitch: f64,
    /// Yaw about body z \[rad\], in (-pi, pi].
    pub yaw: f64,
    /// Body angular rates (p, q, r) \[rad/s\].
    pub rates: Vector3<f64>,
    /// Simulation time \[s\].
    pub time: f64,
}

impl QuadState {
    /// At rest on the ground, level, at the world origin.
    pub fn grounded() -> Self {
        QuadState {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
            rates: Vector3::zeros(),
            time: 0.0,
        }
    }

    /// Body-to-world rotation for the current attitude.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.rates.iter().all(|v| v.is_finite())
            && self.roll.is_finite()
            && self.pitch.is_finite()
            && self.yaw.is_finite()
            && self.time.is_finite()
    }
}

/// Normalized throttles, indexed front-left, front-right, rear-left,
/// rear-right. Always in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorCommands {
    pub front_left: f64,
    pub front_right: f64,
    pub rear_left: f64,
    pub rear_right: f64,
}

impl MotorCommands {
    pub fn uniform(throttle: f64) -> Self {
        let t = throttle.clamp(0.0, 1.0);
        MotorCommands {
            front_left: t,
            front_right: t,
            rear_left: t,
            rear_right: t,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [
            self.front_left,
            self.front_right,
            self.rear_left,
            self.rear_right,
        ]
    }

    pub fn mean(&self) -> f64 {
        self.as_array().iter().sum::<f64>() / 4.0
    }
}

/// Physical plant constants. The paper's airframe ships no masses or
/// coefficients; these defaults are desk-scale inventions chosen so the
/// vehicle hovers at 0.5 throttle.
#[derive(Debug, Clone, Copy)]
pub struct QuadParams {
    /// Vehicle mass \[kg\].
    pub mass: f64,
    /// Center-to-motor arm length \[m\].
    pub arm_length: f64,
    /// Thrust per unit throttle per motor \[N\].
    pub thrust_coeff: f64,
    /// Yaw reaction torque per unit throttle \[N*m\].
    pub torque_coeff: f64,
    /// Diagonal inertia (Ixx, Iyy, Izz) \[kg*m^2\].
    pub inertia: Vector3<f64>,
    /// Gravitational acceleration \[m/s^2\].
    pub gravity: f64,
    /// Airframe speed capability \[m/s\]; missions validate cruise speed
    /// against it.
    pub max_speed: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        QuadParams {
            mass: 1.2,
            arm_length: 0.25,
            thrust_coeff: 5.886, // 4 motors at 0.5 throttle balance 1.2 kg
            torque_coeff: 0.1,
            inertia: Vector3::new(0.015, 0.015, 0.025),
            gravity: 9.81,
            max_speed: 3.0,
        }
    }
}

impl QuadParams {
    /// Throttle at which total thrust balances weight.
    pub fn hover_throttle(&self) -> f64 {
        self.mass * self.gravity / (4.0 * self.thrust_coeff)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("mass", self.mass),
            ("arm_length", self.arm_length),
            ("thrust_coeff", self.thrust_coeff),
            ("torque_coeff", self.torque_coeff),
            ("inertia.x", self.inertia.x),
            ("inertia.y", self.inertia.y),
            ("inertia.z", self.inertia.z),
            ("gravity", self.gravity),
            ("max_speed", self.max_speed),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::invalid(format!(
                    "QuadParams.{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Combine a base throttle with roll/pitch/yaw corrections into the four
/// motor commands of the X mixer, clamping each to [0, 1].
///
/// Sign convention: positive `roll_u`, `pitch_u`, `yaw_u` each produce a
/// positive body rate of the matching axis in closed loop (paired with the
/// torque model in [`step_dynamics`]).
pub fn motor_mixer(base_throttle: f64, roll_u: f64, pitch_u: f64, yaw_u: f64) -> MotorCommands {
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    MotorCommands {
        front_left: clamp(base_throttle + roll_u + pitch_u - yaw_u),
        front_right: clamp(base_throttle - roll_u + pitch_u + yaw_u),
        rear_left: clamp(base_throttle + roll_u - pitch_u + yaw_u),
        rear_right: clamp(base_throttle - roll_u - pitch_u - yaw_u),
    }
}

/// Advance the state by one semi-implicit Euler step: body rates and
/// velocities from forces first, then angles and positions from the new
/// rates. Ground contact clamps z to 0 and zeroes downward velocity.
pub fn step_dynamics(
    state: &QuadState,
    cmds: &MotorCommands,
    params: &QuadParams,
    dt: f64,
) -> Result<QuadState, SimError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(SimError::invalid(format!(
            "dt must be in (0, {MAX_DT}], got {dt}"
        )));
    }
    if !state.is_finite() {
        return Err(SimError::invalid("non-finite input state"));
    }

    let u = cmds.as_array().map(|v| v.clamp(0.0, 1.0));
    let thrust = u.map(|v| params.thrust_coeff * v);
    let total_thrust = thrust.iter().sum::<f64>();

    // Differential thrust torques. Signs pair with `motor_mixer` so each
    // positive mixer input yields a positive rate on its axis.
    let lever = params.arm_length / std::f64::consts::SQRT_2;
    let tau_roll = lever * ((thrust[0] + thrust[2]) - (thrust[1] + thrust[3]));
    let tau_pitch = lever * ((thrust[0] + thrust[1]) - (thrust[2] + thrust[3]));
    let tau_yaw = params.torque_coeff * ((u[1] + u[2]) - (u[0] + u[3]));

    // Euler's equations with diagonal inertia.
    let (p, q, r) = (state.rates.x, state.rates.y, state.rates.z);
    let (ixx, iyy, izz) = (params.inertia.x, params.inertia.y, params.inertia.z);
    let rate_dot = Vector3::new(
        (tau_roll + (iyy - izz) * q * r) / ixx,
        (tau_pitch + (izz - ixx) * p * r) / iyy,
        (tau_yaw + (ixx - iyy) * p * q) / izz,
    );
    let rates = state.rates + rate_dot * dt;

    let accel = state.rotation() * Vector3::new(0.0, 0.0, total_thrust / params.mass)
        - Vector3::new(0.0, 0.0, params.gravity);
    let mut velocity = state.velocity + accel * dt;
    let mut position = state.position + velocity * dt;

    // Small-angle rate-to-Euler kinematics, valid inside the pitch envelope.
    let roll = wrap_angle(state.roll + rates.x * dt);
    let pitch = wrap_angle(state.pitch + rates.y * dt);
    let yaw = wrap_angle(state.yaw + rates.z * dt);

    if position.z <= 0.0 {
        position.z = 0.0;
        velocity.z = velocity.z.max(0.0);
    }

    let next = QuadState {
        position,
        velocity,
        roll,
        pitch,
        yaw,
        rates,
        time: state.time + dt,
    };

    if !next.is_finite() {
        return Err(SimError::Diverged {
            tick: 0,
            reason: "non-finite state".into(),
        });
    }
    if next.pitch.abs() > PITCH_ENVELOPE_RAD {
        return Err(SimError::Diverged {
            tick: 0,
            reason: format!("pitch {:.3} rad outside Euler envelope", next.pitch),
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hover_commands(params: &QuadParams) -> MotorCommands {
        MotorCommands::uniform(params.hover_throttle())
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let params = QuadParams::default();
        let mut state = QuadState::grounded();
        state.position.z = 5.0;
        let next = step_dynamics(&state, &hover_commands(&params), &params, 0.001).unwrap();
        assert_eq!(next.position, state.position);
        assert_eq!(next.velocity, state.velocity);
        assert_eq!(next.rates, state.rates);
        assert_eq!(next.time, state.time + 0.001);
    }

    #[test]
    fn hover_thrust_per_motor() {
        let params = QuadParams::default();
        // 1.2 kg at 9.81 needs 11.772 N total, 2.943 N per motor.
        let per_motor = params.hover_throttle() * params.thrust_coeff;
        assert_relative_eq!(per_motor, 2.943, epsilon = 1e-12);
        assert_relative_eq!(4.0 * per_motor, 11.772, epsilon = 1e-12);
    }

    #[test]
    fn free_fall_single_step() {
        let params = QuadParams::default();
        let mut state = QuadState::grounded();
        state.position.z = 10.0;
        let next = step_dynamics(&state, &MotorCommands::uniform(0.0), &params, 0.01).unwrap();
        // Semi-implicit: v first, then z from the new v.
        assert_relative_eq!(next.velocity.z, -0.0981, epsilon = 1e-12);
        assert_relative_eq!(next.position.z, 10.0 - 0.000981, epsilon = 1e-12);
    }

    #[test]
    fn ground_clamp_zeroes_descent() {
        let params = QuadParams::default();
        let state = QuadState::grounded();
        // From rest on the ground with motors off the vehicle stays put.
        let next = step_dynamics(&state, &MotorCommands::uniform(0.0), &params, 0.01).unwrap();
        assert_eq!(next.position.z, 0.0);
        assert_eq!(next.velocity.z, 0.0);
    }

    #[test]
    fn rejects_bad_dt_and_state() {
        let params = QuadParams::default();
        let state = QuadState::grounded();
        let cmds = MotorCommands::uniform(0.5);
        assert!(matches!(
            step_dynamics(&state, &cmds, &params, 0.0),
            Err(SimError::InvalidArgument(_))
        ));
        assert!(matches!(
            step_dynamics(&state, &cmds, &params, 0.011),
            Err(SimError::InvalidArgument(_))
        ));
        let mut bad = state;
        bad.velocity.x = f64::NAN;
        assert!(matches!(
            step_dynamics(&bad, &cmds, &params, 0.001),
            Err(SimError::InvalidArgument(_))
        ));
    }

    #[test]
    fn leaving_pitch_envelope_reports_divergence() {
        let params = QuadParams::default();
        let mut state = QuadState::grounded();
        state.position.z = 50.0;
        state.pitch = 79.9_f64.to_radians();
        state.rates.y = 5.0; // still pitching up hard
        let err = step_dynamics(&state, &MotorCommands::uniform(0.5), &params, 0.01).unwrap_err();
        assert!(matches!(err, SimError::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn symmetric_commands_keep_rates_zero() {
        let params = QuadParams::default();
        let mut state = QuadState::grounded();
        state.position.z = 3.0;
        for _ in 0..5000 {
            state = step_dynamics(&state, &MotorCommands::uniform(0.62), &params, 0.001).unwrap();
        }
        assert_eq!(state.rates, Vector3::zeros());
        assert_eq!(state.roll, 0.0);
        assert_eq!(state.pitch, 0.0);
        assert_eq!(state.yaw, 0.0);
    }

    #[test]
    fn step_is_pure() {
        let params = QuadParams::default();
        let mut state = QuadState::grounded();
        state.position = Vector3::new(1.0, -2.0, 7.0);
        state.velocity = Vector3::new(0.3, 0.1, -0.2);
        state.rates = Vector3::new(0.01, -0.02, 0.03);
        state.roll = 0.05;
        let cmds = motor_mixer(0.55, 0.02, -0.01, 0.005);
        let a = step_dynamics(&state, &cmds, &params, 0.001).unwrap();
        let b = step_dynamics(&state, &cmds, &params, 0.001).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn free_fall_energy_drift_per_step() {
        let params = QuadParams::default();
        let mut state = QuadState::grounded();
        state.position.z = 200.0;
        state.velocity = Vector3::new(1.5, -0.5, 0.0);
        let dt = 0.001;
        let energy = |s: &QuadState| {
            0.5 * params.mass * s.velocity.norm_squared()
                + params.mass * params.gravity * s.position.z
        };
        for _ in 0..5000 {
            let next = step_dynamics(&state, &MotorCommands::uniform(0.0), &params, dt).unwrap();
            assert!(next.position.z > 0.0, "stay clear of the ground clamp");
            let rel = ((energy(&next) - energy(&state)) / energy(&state)).abs();
            assert!(rel < 1e-6, "relative energy drift {rel} in one step");
            state = next;
        }
    }

    #[test]
    fn mixer_examples() {
        let m = motor_mixer(0.5, 0.0, 0.0, 0.0);
        assert_eq!(m.as_array(), [0.5, 0.5, 0.5, 0.5]);

        let m = motor_mixer(0.5, 0.1, 0.0, 0.0);
        assert_relative_eq!(m.front_left, 0.6);
        assert_relative_eq!(m.front_right, 0.4);
        assert_relative_eq!(m.rear_left, 0.6);
        assert_relative_eq!(m.rear_right, 0.4);

        // Clamped at zero base throttle.
        let m = motor_mixer(0.0, -0.3, 0.0, 0.0);
        assert_eq!(m.as_array(), [0.0, 0.3, 0.0, 0.3]);
    }

    #[test]
    fn positive_mixer_inputs_make_positive_rates() {
        let params = QuadParams::default();
        let hover = params.hover_throttle();
        let mut state = QuadState::grounded();
        state.position.z = 5.0;
        for (axis, cmds) in [
            (0, motor_mixer(hover, 0.05, 0.0, 0.0)),
            (1, motor_mixer(hover, 0.0, 0.05, 0.0)),
            (2, motor_mixer(hover, 0.0, 0.0, 0.05)),
        ] {
            let next = step_dynamics(&state, &cmds, &params, 0.001).unwrap();
            assert!(next.rates[axis] > 0.0, "axis {axis} rate {:?}", next.rates);
        }
    }

    proptest! {
        #[test]
        fn mixer_output_always_in_unit_range(
            t in -1.0f64..2.0,
            r in -1.0f64..1.0,
            p in -1.0f64..1.0,
            y in -1.0f64..1.0,
        ) {
            let m = motor_mixer(t, r, p, y);
            for v in m.as_array() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
