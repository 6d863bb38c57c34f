//! Gain tuning harness: replays the closed-loop step responses the default
//! PID constants were chosen against, printing rise/settling behaviour so a
//! gain change can be judged quickly.
//!
//!     cargo run --release -p sarquad-core --example tune

use sarquad_core::control::{control_step, PidBank, PidSet, Setpoints};
use sarquad_core::dynamics::{step_dynamics, MotorCommands, QuadParams, QuadState};
use sarquad_core::estimation::{
    altitude_update, complementary_update, AttitudeEstimate, FilterParams,
};
use sarquad_core::sensors::{AccelModel, GyroModel, ImuSensor, UltrasonicModel, UltrasonicSensor};

const PHYSICS_DT: f64 = 0.001;
const IMU_EVERY: u64 = 4; // 250 Hz
const ULTRA_EVERY: u64 = 50; // 20 Hz

struct Loop {
    state: QuadState,
    estimate: AttitudeEstimate,
    imu: ImuSensor,
    sonar: UltrasonicSensor,
    bank: PidBank,
    params: QuadParams,
    filter: FilterParams,
    cmds: MotorCommands,
    altitude_fresh: bool,
    tick: u64,
}

impl Loop {
    fn new(initial: QuadState, gains: PidSet) -> Self {
        let params = QuadParams::default();
        let mut estimate = AttitudeEstimate::level_on_ground();
        estimate.altitude = initial.position.z;
        Loop {
            state: initial,
            estimate,
            imu: ImuSensor::new(GyroModel::ideal(), AccelModel::ideal(), 0),
            sonar: UltrasonicSensor::new(UltrasonicModel::ideal(), 0),
            bank: PidBank::new(&gains, ULTRA_EVERY as f64 * PHYSICS_DT),
            params,
            filter: FilterParams::default(),
            cmds: MotorCommands::uniform(0.0),
            altitude_fresh: false,
            tick: 0,
        }
    }

    fn step(&mut self, setpoints: &Setpoints) {
        if self.tick.is_multiple_of(IMU_EVERY) {
            let sample = self
                .imu
                .sample(&self.state, self.cmds.mean(), self.filter.dt);
            self.estimate = complementary_update(&self.estimate, &sample, &self.filter);
        }
        if self.tick.is_multiple_of(ULTRA_EVERY) {
            let echo = self.sonar.sample(self.state.position.z, self.state.time);
            self.estimate.altitude = altitude_update(
                self.estimate.altitude,
                &echo,
                &self.sonar.model,
                &self.filter,
            );
            self.altitude_fresh = true;
        }
        if self.tick.is_multiple_of(IMU_EVERY) {
            self.cmds = control_step(
                &self.estimate,
                setpoints,
                &mut self.bank,
                self.params.hover_throttle(),
                IMU_EVERY as f64 * PHYSICS_DT,
                self.altitude_fresh,
            );
            self.altitude_fresh = false;
        }
        self.state = step_dynamics(&self.state, &self.cmds, &self.params, PHYSICS_DT)
            .expect("inside envelope");
        self.tick += 1;
    }
}

fn report_step(name: &str, target: f64, trace: &[(f64, f64)], band: f64) {
    let rise = trace
        .iter()
        .find(|(_, v)| (v - target).abs() <= band * target.abs().max(1.0))
        .map(|(t, _)| *t);
    let overshoot = trace
        .iter()
        .map(|(_, v)| (v - target) * target.signum())
        .fold(f64::MIN, f64::max);
    let settled = trace
        .iter()
        .rev()
        .take_while(|(_, v)| (v - target).abs() <= band * target.abs().max(1.0))
        .last()
        .map(|(t, _)| *t);
    println!(
        "{name:>10}: target {target:+.2}  enters band at {rise:?} s  overshoot {overshoot:+.4}  settled from {settled:?} s",
    );
}

fn main() {
    let gains = PidSet::default();
    println!("attitude gains: {:?}", gains.roll);
    println!("yaw gains:      {:?}", gains.yaw);
    println!("altitude gains: {:?}", gains.altitude);
    println!();

    // Altitude step from the ground, the mission takeoff case.
    let mut sim = Loop::new(QuadState::grounded(), gains);
    let sp = Setpoints {
        altitude_sp: 1.0,
        ..Setpoints::default()
    };
    let mut trace = Vec::new();
    while sim.state.time < 15.0 {
        sim.step(&sp);
        if sim.tick.is_multiple_of(50) {
            trace.push((sim.state.time, sim.state.position.z));
        }
    }
    report_step("altitude", 1.0, &trace, 0.05);

    // Attitude steps from a steady hover.
    for (name, sp, probe) in [
        (
            "roll",
            Setpoints {
                roll_sp: 0.1,
                altitude_sp: 5.0,
                ..Setpoints::default()
            },
            0usize,
        ),
        (
            "pitch",
            Setpoints {
                pitch_sp: 0.1,
                altitude_sp: 5.0,
                ..Setpoints::default()
            },
            1,
        ),
        (
            "yaw",
            Setpoints {
                yaw_sp: 0.5,
                altitude_sp: 5.0,
                ..Setpoints::default()
            },
            2,
        ),
    ] {
        let mut hover = QuadState::grounded();
        hover.position.z = 5.0;
        let mut sim = Loop::new(hover, gains);
        let mut trace = Vec::new();
        while sim.state.time < 6.0 {
            sim.step(&sp);
            if sim.tick.is_multiple_of(10) {
                let v = [sim.state.roll, sim.state.pitch, sim.state.yaw][probe];
                trace.push((sim.state.time, v));
            }
        }
        let target = [sp.roll_sp, sp.pitch_sp, sp.yaw_sp][probe];
        report_step(name, target, &trace, 0.05);
    }
}
