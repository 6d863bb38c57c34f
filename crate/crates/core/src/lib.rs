//! Deterministic desk-scale simulation of a quadcopter search-and-rescue
//! system: rigid-body flight dynamics, noisy IMU/ultrasonic sensing, a
//! complementary attitude filter with disturbance gating, PID flight control,
//! a profile-driven human detector with SSD-style box post-processing, and a
//! mission loop that ties it all together.
//!
//! Every stochastic draw is keyed by `(seed, subsystem, counter)` through a
//! counter-based generator, so a mission replays bit-identically and detector
//! profiles can be compared under common random numbers.

pub mod control;
pub mod dynamics;
pub mod estimation;
pub mod mission;
pub mod perception;
pub mod rng;
pub mod sensors;

// Public types carry nalgebra vectors; re-export so downstream crates can
// name them without pinning their own copy.
pub use nalgebra;

use thiserror::Error;

/// Errors surfaced by the simulation layers.
#[derive(Debug, Error)]
pub enum SimError {
    /// An operation was called with an argument outside its contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The integrator left the valid flight envelope (non-finite state or
    /// pitch beyond the Euler-kinematics region).
    #[error("simulation diverged at tick {tick}: {reason}")]
    Diverged { tick: u64, reason: String },

    /// A mission configuration value violated an invariant.
    #[error("invalid config: {key}: {reason}")]
    Config { key: String, reason: String },
}

impl SimError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SimError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Wrap an angle into `(-pi, pi]`. In-range values pass through unchanged,
/// bit-exactly.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -std::f64::consts::PI && angle <= std::f64::consts::PI {
        return angle;
    }
    let tau = std::f64::consts::TAU;
    let mut a = angle.rem_euclid(tau);
    if a > std::f64::consts::PI {
        a -= tau;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::wrap_angle;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12); // -pi maps to +pi
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-6.2) - (2.0 * PI - 6.2)).abs() < 1e-12);
        for k in -7..7 {
            let a = wrap_angle(0.37 + k as f64 * 2.0 * PI);
            assert!((a - 0.37).abs() < 1e-9);
        }
    }
}
