//! End-to-end search missions: boustrophedon coverage paths, the fixed-step
//! loop wiring dynamics -> sensors -> estimation -> control, camera frame
//! scheduling under detector latency, detection event collection, and the
//! aggregate metrics used to compare detector profiles.
//!
//! A mission is fully determined by `(config, seed)`: physics is pure, every
//! random draw is counter-keyed, and frame pickup times follow a precomputed
//! schedule, so repeated runs are bit-identical.

use std::collections::VecDeque;

use nalgebra::{Rotation2, Vector2, Vector3};

use crate::control::{control_step, PidBank, PidSet, Setpoints};
use crate::dynamics::{step_dynamics, MotorCommands, QuadParams, QuadState};
use crate::estimation::{altitude_update, complementary_update, AttitudeEstimate, FilterParams};
use crate::perception::{
    default_boxes, ground_footprint, iou, nms, project_target, simulate_detector, BBox,
    CameraModel, Detection, DetectorProfile, GroundTarget, Sighting,
};
use crate::sensors::{AccelModel, GyroModel, ImuSensor, UltrasonicModel, UltrasonicSensor};
use crate::SimError;

/// A target counts as detected once a surviving post-NMS detection matches
/// it at or above these thresholds.
pub const DETECTED_MIN_CONFIDENCE: f64 = 0.5;
pub const DETECTED_MIN_IOU: f64 = 0.5;

/// Ground impact above this speed ends the mission as a crash \[m/s\].
pub const CRASH_SPEED: f64 = 1.0;

/// Detection post-processing knobs and the default box layout.
#[derive(Debug, Clone)]
pub struct DetectionConfig {
    /// Expected false positives per processed frame.
    pub false_positive_rate: f64,
    /// Detections below this confidence are dropped before NMS.
    pub confidence_floor: f64,
    /// NMS suppression threshold.
    pub nms_iou: f64,
    /// Default box grid sizes, one scale per grid.
    pub grids: Vec<u32>,
    pub scales: Vec<f64>,
    pub aspect_ratios: Vec<f64>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            false_positive_rate: 0.0,
            confidence_floor: 0.5,
            nms_iou: 0.45,
            // Sized so a person-scale footprint seen from the default search
            // altitude overlaps some default box at IoU >= 0.5 in both row
            // directions.
            grids: vec![64, 48, 32],
            scales: vec![0.09, 0.12, 0.18],
            aspect_ratios: vec![0.25, 1.0, 3.0],
        }
    }
}

/// Declarative mission description. `MissionConfig::new` fills every field
/// except the world extent with desk-scale defaults.
#[derive(Debug, Clone)]
pub struct MissionConfig {
    /// Search area extent \[m\].
    pub world_width: f64,
    pub world_height: f64,
    /// Launch point \[m\].
    pub spawn: Vector2<f64>,
    /// Altitude flown while searching \[m\].
    pub search_altitude: f64,
    /// Commanded ground speed along rows \[m/s\]; capped by the airframe.
    pub cruise_speed: f64,
    /// Flight-time budget \[s\].
    pub endurance: f64,
    /// Fractional swath overlap between adjacent rows.
    pub swath_overlap: f64,
    pub seed: u64,
    pub physics_dt: f64,
    pub imu_rate: f64,
    pub control_rate: f64,
    pub ultrasonic_rate: f64,
    pub targets: Vec<GroundTarget>,
    pub detector: DetectorProfile,
    pub camera: CameraModel,
    pub quad: QuadParams,
    pub filter: FilterParams,
    pub gyro_model: GyroModel,
    pub accel_model: AccelModel,
    pub ultrasonic_model: UltrasonicModel,
    pub pid: PidSet,
    pub detection: DetectionConfig,
}

impl MissionConfig {
    pub fn new(world_width: f64, world_height: f64) -> Self {
        MissionConfig {
            world_width,
            world_height,
            spawn: Vector2::new(2.0, 2.0),
            search_altitude: 10.0,
            cruise_speed: 2.0,
            endurance: 600.0,
            swath_overlap: 0.0,
            seed: 42,
            physics_dt: 0.001,
            imu_rate: 250.0,
            control_rate: 250.0,
            ultrasonic_rate: 20.0,
            targets: Vec::new(),
            detector: DetectorProfile::ssd(),
            camera: CameraModel::default(),
            quad: QuadParams::default(),
            filter: FilterParams::default(),
            gyro_model: GyroModel::default(),
            accel_model: AccelModel::default(),
            ultrasonic_model: UltrasonicModel::default(),
            pid: PidSet::default(),
            detection: DetectionConfig::default(),
        }
    }

    /// Check every invariant, naming the offending config key.
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("world.width", self.world_width),
            ("world.height", self.world_height),
            ("search_altitude", self.search_altitude),
            ("endurance", self.endurance),
            ("imu_rate", self.imu_rate),
            ("control_rate", self.control_rate),
            ("ultrasonic_rate", self.ultrasonic_rate),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::config(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.cruise_speed > 0.0 && self.cruise_speed <= self.quad.max_speed) {
            return Err(SimError::config(
                "cruise_speed",
                format!(
                    "must be in (0, {}] (airframe max_speed), got {}",
                    self.quad.max_speed, self.cruise_speed
                ),
            ));
        }
        if !(0.0..1.0).contains(&self.swath_overlap) {
            return Err(SimError::config(
                "swath_overlap",
                format!("must be in [0, 1), got {}", self.swath_overlap),
            ));
        }
        if !(self.physics_dt > 0.0 && self.physics_dt <= crate::dynamics::MAX_DT) {
            return Err(SimError::config(
                "physics_dt",
                format!(
                    "must be in (0, {}], got {}",
                    crate::dynamics::MAX_DT,
                    self.physics_dt
                ),
            ));
        }
        let max_rate = 1.0 / self.physics_dt;
        for (key, rate) in [
            ("imu_rate", self.imu_rate),
            ("control_rate", self.control_rate),
            ("ultrasonic_rate", self.ultrasonic_rate),
            ("camera.frame_rate", self.camera.frame_rate_hz),
        ] {
            if rate > max_rate + 1e-9 {
                return Err(SimError::config(
                    key,
                    format!("exceeds the physics rate {max_rate} Hz"),
                ));
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(0.0..=self.world_width).contains(&t.position.x) {
                return Err(SimError::config(
                    format!("target.{i}.x"),
                    format!(
                        "{} is outside the world [0, {}]",
                        t.position.x, self.world_width
                    ),
                ));
            }
            if !(0.0..=self.world_height).contains(&t.position.y) {
                return Err(SimError::config(
                    format!("target.{i}.y"),
                    format!(
                        "{} is outside the world [0, {}]",
                        t.position.y, self.world_height
                    ),
                ));
            }
            if !(t.width.is_finite() && t.width > 0.0 && t.length.is_finite() && t.length > 0.0) {
                return Err(SimError::config(
                    format!("target.{i}.width"),
                    "footprint dimensions must be > 0".to_string(),
                ));
            }
            if !(t.max_visibility > 0.0 && t.max_visibility <= 1.0) {
                return Err(SimError::config(
                    format!("target.{i}.max_visibility"),
                    format!("must be in (0, 1], got {}", t.max_visibility),
                ));
            }
            if self.targets.iter().filter(|o| o.id == t.id).count() > 1 {
                return Err(SimError::config(
                    format!("target.{i}"),
                    format!("duplicate target id {}", t.id),
                ));
            }
        }
        for (key, v) in [
            (
                "detection.confidence_floor",
                self.detection.confidence_floor,
            ),
            ("detection.nms_iou", self.detection.nms_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::config(key, format!("must be in [0, 1], got {v}")));
            }
        }
        if !(self.detection.false_positive_rate.is_finite()
            && self.detection.false_positive_rate >= 0.0)
        {
            return Err(SimError::config(
                "detection.false_positive_rate",
                "must be >= 0".to_string(),
            ));
        }
        let named = |key: &str, e: SimError| match e {
            SimError::InvalidArgument(msg) => SimError::config(key, msg),
            other => other,
        };
        for (axis, gains) in [
            ("roll", &self.pid.roll),
            ("pitch", &self.pid.pitch),
            ("yaw", &self.pid.yaw),
            ("altitude", &self.pid.altitude),
        ] {
            gains
                .validate()
                .map_err(|e| named(&format!("pid.{axis}"), e))?;
        }
        self.detector.validate().map_err(|e| named("detector", e))?;
        self.camera.validate().map_err(|e| named("camera", e))?;
        self.quad.validate().map_err(|e| named("quad", e))?;
        self.filter.validate().map_err(|e| named("filter", e))?;
        default_boxes(
            &self.detection.grids,
            &self.detection.scales,
            &self.detection.aspect_ratios,
            self.camera.width_px as f64,
            self.camera.height_px as f64,
        )
        .map_err(|e| named("detection.grids", e))?;
        Ok(())
    }
}

/// Aggregate outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionMetrics {
    pub targets_total: u32,
    pub targets_detected: u32,
    pub time_to_first_detection: Option<f64>,
    pub detections_emitted: u64,
    pub frames_captured: u64,
    pub frames_processed: u64,
    pub coverage_fraction: f64,
    pub flight_time: f64,
    pub crashed: bool,
    pub mean_confidence: f64,
}

/// One logged control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRow {
    pub time_s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub est_roll: f64,
    pub est_pitch: f64,
    pub est_yaw: f64,
    pub est_alt: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub u4: f64,
}

/// One surviving post-NMS detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    /// Index of the camera frame the detector ran on.
    pub frame_index: u64,
    /// Time the result became available (capture + latency) \[s\].
    pub time_s: f64,
    /// Ground-truth identity; `None` for false positives.
    pub target_id: Option<u32>,
    pub bbox: BBox,
    pub confidence: f64,
    /// Visibility of the matched sighting; `None` for false positives.
    pub visibility: Option<f64>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct MissionOutput {
    pub metrics: MissionMetrics,
    pub telemetry: Vec<TelemetryRow>,
    pub detections: Vec<DetectionEvent>,
}

/// Boustrophedon waypoints covering the world rectangle: rows parallel to
/// the x axis, spaced by `swath * (1 - overlap)` where the swath is the
/// across-track ground footprint width at `altitude`. A footprint wider
/// than the world degenerates to a single centre row.
pub fn generate_lawnmower(
    world_width: f64,
    world_height: f64,
    camera: &CameraModel,
    altitude: f64,
    overlap: f64,
) -> Result<Vec<Vector2<f64>>, SimError> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(SimError::invalid(format!(
            "overlap must be in [0, 1), got {overlap}"
        )));
    }
    let (swath, _) = ground_footprint(camera, altitude)?;
    let spacing = swath * (1.0 - overlap);
    let rows = if spacing >= world_height {
        1
    } else {
        (world_height / spacing).ceil() as usize
    };

    let mut waypoints = Vec::with_capacity(rows * 2);
    for i in 0..rows {
        let y = if rows == 1 {
            world_height / 2.0
        } else {
            (i as f64 + 0.5) * spacing
        };
        if i % 2 == 0 {
            waypoints.push(Vector2::new(0.0, y));
            waypoints.push(Vector2::new(world_width, y));
        } else {
            waypoints.push(Vector2::new(world_width, y));
            waypoints.push(Vector2::new(0.0, y));
        }
    }
    Ok(waypoints)
}

/// One detector slot: the frame it consumed and when its result lands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSlot {
    pub capture_index: u64,
    pub capture_time: f64,
    pub completion_time: f64,
}

/// Detector pickup schedule over `duration`: the camera emits frames at
/// `camera_rate`; whenever the detector frees up it takes the newest unseen
/// frame (older ones are dropped) and is busy for the profile latency. Only
/// frames whose result completes within `duration` are listed.
pub fn frame_schedule(
    camera_rate: f64,
    profile: &DetectorProfile,
    duration: f64,
) -> Vec<FrameSlot> {
    let mut slots = Vec::new();
    let mut free_at = 0.0_f64;
    let mut last_picked: Option<u64> = None;
    loop {
        let mut newest = (free_at * camera_rate + 1e-9).floor() as u64;
        let mut pickup = free_at;
        if let Some(last) = last_picked {
            if newest <= last {
                newest = last + 1;
                pickup = newest as f64 / camera_rate;
            }
        }
        let completion = pickup + profile.seconds_per_image;
        if completion > duration + 1e-9 {
            return slots;
        }
        slots.push(FrameSlot {
            capture_index: newest,
            capture_time: newest as f64 / camera_rate,
            completion_time: completion,
        });
        free_at = completion;
        last_picked = Some(newest);
    }
}

/// Proportional guidance onto the lawnmower path: cross-track and speed
/// errors map to tilt setpoints (capped well inside the envelope), yaw
/// aligns to the row heading. Consumes ground-truth position and velocity,
/// standing in for a navigation source the platform does not model.
struct Follower {
    waypoints: Vec<Vector2<f64>>,
    segment_start: Vector2<f64>,
    index: usize,
}

const FOLLOWER_TILT_CAP: f64 = 0.3;
const FOLLOWER_VEL_GAIN: f64 = 1.5;
const FOLLOWER_CROSS_GAIN: f64 = 0.8;
const FOLLOWER_CROSS_SPEED_CAP: f64 = 1.5;
const WAYPOINT_CAPTURE_RADIUS: f64 = 0.6;

impl Follower {
    fn new(spawn: Vector2<f64>, waypoints: Vec<Vector2<f64>>) -> Self {
        Follower {
            waypoints,
            segment_start: spawn,
            index: 0,
        }
    }

    fn first_heading(&self, spawn: Vector2<f64>) -> f64 {
        match self.waypoints.first() {
            Some(wp) => {
                let d = wp - spawn;
                if d.norm() > 1e-9 {
                    d.y.atan2(d.x)
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }

    /// `None` once the final waypoint is reached.
    fn setpoints(
        &mut self,
        state: &QuadState,
        cruise: f64,
        altitude_sp: f64,
        gravity: f64,
    ) -> Option<Setpoints> {
        let pos = Vector2::new(state.position.x, state.position.y);
        loop {
            let target = *self.waypoints.get(self.index)?;
            let seg = target - self.segment_start;
            let seg_len = seg.norm();
            let along_dir = if seg_len > 1e-9 {
                seg / seg_len
            } else {
                self.segment_start = target;
                self.index += 1;
                continue;
            };
            let rel = pos - self.segment_start;
            let remaining = seg_len - rel.dot(&along_dir);
            if remaining < WAYPOINT_CAPTURE_RADIUS {
                self.segment_start = target;
                self.index += 1;
                continue;
            }

            let left = Vector2::new(-along_dir.y, along_dir.x);
            let cross = rel.dot(&left);

            let speed = cruise.min(FOLLOWER_VEL_GAIN * remaining.max(0.0) + 0.2);
            let correction = (-FOLLOWER_CROSS_GAIN * cross)
                .clamp(-FOLLOWER_CROSS_SPEED_CAP, FOLLOWER_CROSS_SPEED_CAP);
            let vel_des = along_dir * speed + left * correction;
            let vel = Vector2::new(state.velocity.x, state.velocity.y);
            let accel_world = (vel_des - vel) * FOLLOWER_VEL_GAIN;
            let accel_body = Rotation2::new(-state.yaw) * accel_world;

            return Some(Setpoints {
                roll_sp: (-accel_body.y / gravity).clamp(-FOLLOWER_TILT_CAP, FOLLOWER_TILT_CAP),
                pitch_sp: (accel_body.x / gravity).clamp(-FOLLOWER_TILT_CAP, FOLLOWER_TILT_CAP),
                yaw_sp: along_dir.y.atan2(along_dir.x),
                altitude_sp,
            });
        }
    }
}

/// 1 m occupancy grid accumulating the swept camera footprint.
struct CoverageGrid {
    cells: Vec<bool>,
    width: usize,
    height: usize,
    marked: usize,
}

impl CoverageGrid {
    fn new(world_width: f64, world_height: f64) -> Self {
        let width = world_width.ceil().max(1.0) as usize;
        let height = world_height.ceil().max(1.0) as usize;
        CoverageGrid {
            cells: vec![false; width * height],
            width,
            height,
            marked: 0,
        }
    }

    /// Stamp the yaw-rotated footprint rectangle centred under the vehicle.
    fn stamp(&mut self, position: &Vector3<f64>, yaw: f64, footprint: (f64, f64)) {
        let (swath_w, swath_h) = footprint; // across-track, along-track [m]
        let (half_y_body, half_x_body) = (swath_w / 2.0, swath_h / 2.0);
        let half_x = half_x_body * yaw.cos().abs() + half_y_body * yaw.sin().abs();
        let half_y = half_x_body * yaw.sin().abs() + half_y_body * yaw.cos().abs();
        let to_body = Rotation2::new(-yaw);
        let center = Vector2::new(position.x, position.y);

        let x_lo = ((center.x - half_x).floor().max(0.0)) as usize;
        let x_hi = ((center.x + half_x).ceil().min(self.width as f64)) as usize;
        let y_lo = ((center.y - half_y).floor().max(0.0)) as usize;
        let y_hi = ((center.y + half_y).ceil().min(self.height as f64)) as usize;
        for cy in y_lo..y_hi {
            for cx in x_lo..x_hi {
                let idx = cy * self.width + cx;
                if self.cells[idx] {
                    continue;
                }
                let cell_center = Vector2::new(cx as f64 + 0.5, cy as f64 + 0.5);
                let body = to_body * (cell_center - center);
                if body.x.abs() <= half_x_body && body.y.abs() <= half_y_body {
                    self.cells[idx] = true;
                    self.marked += 1;
                }
            }
        }
    }

    fn fraction(&self) -> f64 {
        self.marked as f64 / self.cells.len() as f64
    }
}

struct PendingFrame {
    capture_index: u64,
    completion_time: f64,
    detections: Vec<Detection>,
    /// (target_id, truth box, visibility) for the detected-target check.
    truths: Vec<(u32, BBox, f64)>,
}

enum Phase {
    Takeoff,
    Search,
}

/// Fly the configured mission to completion (path done, endurance spent, or
/// crash) and collect metrics, telemetry and detection events.
pub fn run_mission(config: &MissionConfig) -> Result<MissionOutput, SimError> {
    config.validate()?;

    let dt = config.physics_dt;
    let n_ticks = (config.endurance / dt).round() as u64;
    let every = |rate: f64| ((1.0 / (rate * dt)).round() as u64).max(1);
    let imu_every = every(config.imu_rate);
    let control_every = every(config.control_rate);
    let ultra_every = every(config.ultrasonic_rate);

    let mut filter_params = config.filter;
    filter_params.dt = imu_every as f64 * dt;
    let control_dt = control_every as f64 * dt;
    let altitude_dt = ultra_every as f64 * dt;

    let boxes = default_boxes(
        &config.detection.grids,
        &config.detection.scales,
        &config.detection.aspect_ratios,
        config.camera.width_px as f64,
        config.camera.height_px as f64,
    )?;
    let slots = frame_schedule(
        config.camera.frame_rate_hz,
        &config.detector,
        config.endurance,
    );
    let mut next_slot = 0usize;

    let waypoints = generate_lawnmower(
        config.world_width,
        config.world_height,
        &config.camera,
        config.search_altitude,
        config.swath_overlap,
    )?;
    let mut follower = Follower::new(config.spawn, waypoints);
    let takeoff_yaw = follower.first_heading(config.spawn);
    let footprint = ground_footprint(&config.camera, config.search_altitude)?;

    let mut state = QuadState::grounded();
    state.position.x = config.spawn.x;
    state.position.y = config.spawn.y;
    state.yaw = takeoff_yaw;

    let mut imu = ImuSensor::new(config.gyro_model, config.accel_model, config.seed);
    let mut sonar = UltrasonicSensor::new(config.ultrasonic_model, config.seed);
    let mut estimate = AttitudeEstimate {
        yaw: takeoff_yaw,
        ..AttitudeEstimate::level_on_ground()
    };
    let mut bank = PidBank::new(&config.pid, altitude_dt);
    let hover_throttle = config.quad.hover_throttle();
    let mut cmds = MotorCommands::uniform(0.0);
    let mut altitude_fresh = false;
    let mut phase = Phase::Takeoff;

    let mut coverage = CoverageGrid::new(config.world_width, config.world_height);
    let mut telemetry = Vec::new();
    let mut detections_log = Vec::new();
    let mut pending: VecDeque<PendingFrame> = VecDeque::new();

    let mut frames_captured = 0u64;
    let mut frames_processed = 0u64;
    let mut next_capture_index = 0u64;
    let mut detected = vec![false; config.targets.len()];
    let mut first_detection: Option<f64> = None;
    let mut confidence_sum = 0.0;
    let mut crashed = false;
    let mut flight_time = 0.0;

    'flight: for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        flight_time = t;

        if tick % imu_every == 0 {
            let sample = imu.sample(&state, cmds.mean(), filter_params.dt);
            estimate = complementary_update(&estimate, &sample, &filter_params);
        }
        if tick % ultra_every == 0 {
            let echo = sonar.sample(state.position.z, t);
            estimate.altitude = altitude_update(
                estimate.altitude,
                &echo,
                &config.ultrasonic_model,
                &filter_params,
            );
            altitude_fresh = true;
        }

        if tick % control_every == 0 {
            let setpoints = match phase {
                Phase::Takeoff => {
                    if (estimate.altitude - config.search_altitude).abs() < 0.5 {
                        phase = Phase::Search;
                    }
                    Some(Setpoints {
                        roll_sp: 0.0,
                        pitch_sp: 0.0,
                        yaw_sp: takeoff_yaw,
                        altitude_sp: config.search_altitude,
                    })
                }
                Phase::Search => follower.setpoints(
                    &state,
                    config.cruise_speed,
                    config.search_altitude,
                    config.quad.gravity,
                ),
            };
            let Some(sp) = setpoints else {
                break 'flight; // path complete
            };
            cmds = control_step(
                &estimate,
                &sp,
                &mut bank,
                hover_throttle,
                control_dt,
                altitude_fresh,
            );
            altitude_fresh = false;

            telemetry.push(TelemetryRow {
                time_s: t,
                x: state.position.x,
                y: state.position.y,
                z: state.position.z,
                roll: state.roll,
                pitch: state.pitch,
                yaw: state.yaw,
                est_roll: estimate.roll,
                est_pitch: estimate.pitch,
                est_yaw: estimate.yaw,
                est_alt: estimate.altitude,
                u1: cmds.front_left,
                u2: cmds.front_right,
                u3: cmds.rear_left,
                u4: cmds.rear_right,
            });
        }

        if t + 1e-9 >= next_capture_index as f64 / config.camera.frame_rate_hz {
            let capture_index = next_capture_index;
            next_capture_index += 1;
            frames_captured += 1;
            if state.position.z > 0.0 {
                coverage.stamp(&state.position, state.yaw, footprint);
            }

            if next_slot < slots.len() && slots[next_slot].capture_index == capture_index {
                let slot = slots[next_slot];
                next_slot += 1;

                let mut sightings = Vec::new();
                let mut truths = Vec::new();
                for target in &config.targets {
                    if let Some((bbox, vis)) = project_target(&state, &config.camera, target) {
                        let visibility = vis.min(target.max_visibility);
                        sightings.push(Sighting {
                            bbox,
                            visibility,
                            target_id: target.id,
                        });
                        truths.push((target.id, bbox, visibility));
                    }
                }
                let raw = simulate_detector(
                    &sightings,
                    &config.detector,
                    &boxes,
                    capture_index,
                    config.seed,
                    config.detection.false_positive_rate,
                );
                let confident: Vec<Detection> = raw
                    .into_iter()
                    .filter(|d| d.confidence >= config.detection.confidence_floor)
                    .collect();
                let kept = nms(&confident, config.detection.nms_iou);
                pending.push_back(PendingFrame {
                    capture_index,
                    completion_time: slot.completion_time,
                    detections: kept,
                    truths,
                });
            }
        }

        let altitude_before = state.position.z;
        let sink_before = state.velocity.z;
        state = match step_dynamics(&state, &cmds, &config.quad, dt) {
            Ok(next) => next,
            Err(SimError::Diverged { reason, .. }) => {
                return Err(SimError::Diverged { tick, reason });
            }
            Err(e) => return Err(e),
        };
        flight_time = state.time;

        if altitude_before > 0.0 && state.position.z == 0.0 {
            // The clamp erased the vertical speed; the pre-step value is
            // within one g*dt of the true impact speed.
            let impact = Vector3::new(state.velocity.x, state.velocity.y, sink_before);
            if impact.norm() > CRASH_SPEED {
                crashed = true;
                break 'flight;
            }
        }

        while let Some(frame) = pending.front() {
            if frame.completion_time > state.time + 1e-9 {
                break;
            }
            let frame = pending.pop_front().expect("checked front");
            frames_processed += 1;
            for det in &frame.detections {
                let matched = det
                    .target_id
                    .and_then(|id| frame.truths.iter().find(|(tid, _, _)| *tid == id));
                let visibility = matched.map(|(_, _, v)| *v);
                detections_log.push(DetectionEvent {
                    frame_index: frame.capture_index,
                    time_s: frame.completion_time,
                    target_id: det.target_id,
                    bbox: det.bbox,
                    confidence: det.confidence,
                    visibility,
                });
                confidence_sum += det.confidence;

                if let Some((id, truth, _)) = matched {
                    if det.confidence >= DETECTED_MIN_CONFIDENCE
                        && iou(&det.bbox, truth) >= DETECTED_MIN_IOU
                    {
                        if let Some(idx) = config.targets.iter().position(|t| t.id == *id) {
                            if !detected[idx] {
                                detected[idx] = true;
                                first_detection =
                                    Some(first_detection.map_or(frame.completion_time, |cur| {
                                        cur.min(frame.completion_time)
                                    }));
                            }
                        }
                    }
                }
            }
        }
    }

    let detections_emitted = detections_log.len() as u64;
    let metrics = MissionMetrics {
        targets_total: config.targets.len() as u32,
        targets_detected: detected.iter().filter(|&&d| d).count() as u32,
        time_to_first_detection: first_detection,
        detections_emitted,
        frames_captured,
        frames_processed,
        coverage_fraction: coverage.fraction(),
        flight_time,
        crashed,
        mean_confidence: if detections_emitted > 0 {
            confidence_sum / detections_emitted as f64
        } else {
            0.0
        },
    };
    Ok(MissionOutput {
        metrics,
        telemetry,
        detections: detections_log,
    })
}

/// Run the identical mission once per profile (same seed, common random
/// numbers) and return the outputs side by side.
pub fn compare_profiles(
    config: &MissionConfig,
    profiles: &[DetectorProfile],
) -> Result<Vec<(DetectorProfile, MissionOutput)>, SimError> {
    if profiles.len() < 2 {
        return Err(SimError::invalid(
            "profile comparison needs at least 2 profiles",
        ));
    }
    profiles
        .iter()
        .map(|p| {
            let mut cfg = config.clone();
            cfg.detector = p.clone();
            run_mission(&cfg).map(|out| (p.clone(), out))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lawnmower_row_counts() {
        let cam = CameraModel::default();
        // Swath at 10 m is 11.547 m: ceil(100 / 11.547) = 9 rows.
        let wps = generate_lawnmower(100.0, 100.0, &cam, 10.0, 0.0).unwrap();
        assert_eq!(wps.len(), 18);
        let mut rows: Vec<f64> = wps.iter().map(|w| w.y).collect();
        rows.dedup();
        assert_eq!(rows.len(), 9);

        // 50% overlap halves the spacing: 18 rows.
        let wps = generate_lawnmower(100.0, 100.0, &cam, 10.0, 0.5).unwrap();
        let mut rows: Vec<f64> = wps.iter().map(|w| w.y).collect();
        rows.dedup();
        assert_eq!(rows.len(), 18);
        assert_relative_eq!(rows[1] - rows[0], 11.547 * 0.5, epsilon = 1e-3);

        // World narrower than the swath: one centre row.
        let wps = generate_lawnmower(100.0, 8.0, &cam, 10.0, 0.0).unwrap();
        assert_eq!(wps.len(), 2);
        assert_eq!(wps[0].y, 4.0);
    }

    #[test]
    fn lawnmower_alternates_direction() {
        let cam = CameraModel::default();
        let wps = generate_lawnmower(50.0, 30.0, &cam, 10.0, 0.0).unwrap();
        assert_eq!(wps[0].x, 0.0);
        assert_eq!(wps[1].x, 50.0);
        assert_eq!(wps[2].x, 50.0);
        assert_eq!(wps[3].x, 0.0);
    }

    #[test]
    fn frame_schedule_counts_per_profile() {
        assert_eq!(
            frame_schedule(30.0, &DetectorProfile::ssd(), 60.0).len(),
            180
        );
        assert_eq!(
            frame_schedule(30.0, &DetectorProfile::haar(), 60.0).len(),
            60
        );
        assert_eq!(frame_schedule(30.0, &DetectorProfile::hog(), 60.0).len(), 3);
    }

    #[test]
    fn fast_profile_is_camera_bound() {
        let fast = DetectorProfile {
            seconds_per_image: 0.02,
            ..DetectorProfile::ssd()
        };
        let slots = frame_schedule(30.0, &fast, 60.0);
        // One frame per camera period, not one per 20 ms.
        assert!(slots.len() <= 1800);
        assert!(slots.len() >= 1795);
        for pair in slots.windows(2) {
            assert!(pair[1].capture_index == pair[0].capture_index + 1);
        }
    }

    #[test]
    fn schedule_drops_stale_frames_for_slow_profiles() {
        let slots = frame_schedule(30.0, &DetectorProfile::hog(), 60.0);
        // Consecutive pickups skip ~566 captures while the detector is busy.
        assert_eq!(slots[0].capture_index, 0);
        assert!(slots[1].capture_index > 500);
    }

    fn quick_mission() -> MissionConfig {
        let mut config = MissionConfig::new(30.0, 12.0);
        config.endurance = 120.0;
        config.cruise_speed = 2.5;
        config
    }

    #[test]
    fn zero_targets_vacuous_metrics() {
        let config = quick_mission();
        let out = run_mission(&config).unwrap();
        assert_eq!(out.metrics.targets_total, 0);
        assert_eq!(out.metrics.targets_detected, 0);
        assert_eq!(out.metrics.time_to_first_detection, None);
        assert_eq!(out.metrics.detections_emitted, 0);
        assert!(!out.metrics.crashed);
        assert!(
            out.metrics.coverage_fraction > 0.5,
            "single-row world should be swept"
        );
    }

    #[test]
    fn on_path_target_detected_promptly() {
        let mut config = quick_mission();
        config.targets = vec![GroundTarget::new(0, 15.0, 6.0)];
        config.detector.recall_full = 1.0;
        let out = run_mission(&config).unwrap();
        assert_eq!(out.metrics.targets_detected, 1);
        let ttfd = out.metrics.time_to_first_detection.unwrap();

        // First moment the target sat inside the along-track footprint.
        let (fw, fh) = ground_footprint(&config.camera, config.search_altitude).unwrap();
        let visible_from = out
            .telemetry
            .iter()
            .find(|r| (r.x - 15.0).abs() <= fh / 2.0 && (r.y - 6.0).abs() <= fw / 2.0 && r.z > 9.0)
            .map(|r| r.time_s)
            .expect("path overflies the target");
        assert!(
            ttfd <= visible_from + config.detector.seconds_per_image + 0.5,
            "ttfd {ttfd} vs first visibility {visible_from}"
        );
    }

    #[test]
    fn mission_is_bit_deterministic() {
        let mut config = quick_mission();
        config.targets = vec![
            GroundTarget::new(0, 10.0, 6.0),
            GroundTarget::new(1, 22.0, 6.0),
        ];
        config.detection.false_positive_rate = 0.2;
        let a = run_mission(&config).unwrap();
        let b = run_mission(&config).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.telemetry, b.telemetry);
        assert_eq!(a.detections, b.detections);
    }

    #[test]
    fn frames_processed_bounded_by_latency() {
        let config = quick_mission();
        let out = run_mission(&config).unwrap();
        let bound =
            (out.metrics.flight_time / config.detector.seconds_per_image).floor() as u64 + 1;
        assert!(out.metrics.frames_processed <= bound);
        assert!(out.metrics.frames_processed <= out.metrics.frames_captured);
    }

    #[test]
    fn endurance_bounds_flight_time() {
        let mut config = quick_mission();
        config.endurance = 20.0; // path incomplete at cutoff
        let out = run_mission(&config).unwrap();
        assert!(out.metrics.flight_time <= config.endurance + config.physics_dt);
    }

    #[test]
    fn coverage_non_decreasing_with_flight_time() {
        let mut shorter = quick_mission();
        shorter.endurance = 30.0;
        let mut longer = quick_mission();
        longer.endurance = 60.0;
        let a = run_mission(&shorter).unwrap();
        let b = run_mission(&longer).unwrap();
        assert!(b.metrics.coverage_fraction >= a.metrics.coverage_fraction);
    }

    #[test]
    fn recall_increase_never_loses_targets() {
        // Common random numbers: under a fixed seed, raising either recall
        // only adds detection draws, so the detected count is monotone.
        let mut partial = GroundTarget::new(1, 24.0, 6.0);
        partial.max_visibility = 0.6;
        for seed in [3, 7, 11] {
            let mut base = quick_mission();
            base.seed = seed;
            base.targets = vec![GroundTarget::new(0, 8.0, 6.0), partial];
            let mut detected_at = |full: f64, part: f64| {
                base.detector.recall_full = full;
                base.detector.recall_partial = part;
                run_mission(&base).unwrap().metrics.targets_detected
            };
            let mut prev = 0;
            for (full, part) in [(0.1, 0.0), (0.3, 0.2), (0.6, 0.4), (0.9, 0.8)] {
                let count = detected_at(full, part);
                assert!(
                    count >= prev,
                    "seed {seed}: {count} < {prev} at recall {full}/{part}"
                );
                prev = count;
            }
        }
    }

    #[test]
    fn partial_only_targets_with_zero_partial_recall() {
        let mut config = quick_mission();
        let mut t = GroundTarget::new(0, 15.0, 6.0);
        t.max_visibility = 0.6;
        config.targets = vec![t];
        config.detector = DetectorProfile::haar(); // recall_partial = 0
        config.endurance = 60.0;
        let out = run_mission(&config).unwrap();
        assert_eq!(out.metrics.targets_detected, 0);
        assert_eq!(out.metrics.detections_emitted, 0);
    }

    #[test]
    fn duplicated_profile_comparison_is_identical() {
        let mut config = quick_mission();
        config.targets = vec![GroundTarget::new(0, 15.0, 6.0)];
        config.endurance = 60.0;
        let results =
            compare_profiles(&config, &[DetectorProfile::ssd(), DetectorProfile::ssd()]).unwrap();
        assert_eq!(results[0].1.metrics, results[1].1.metrics);
        assert_eq!(results[0].1.detections, results[1].1.detections);
    }

    #[test]
    fn unstable_altitude_loop_ends_in_a_crash() {
        let mut config = quick_mission();
        // Legal but wildly hot altitude gain: the 20 Hz discrete loop goes
        // unstable, the vehicle dives into the ground above the crash speed.
        config.pid.altitude.kp = 60.0;
        config.pid.altitude.ki = 0.0;
        config.pid.altitude.kd = 0.0;
        let out = run_mission(&config).unwrap();
        assert!(out.metrics.crashed);
        assert!(out.metrics.flight_time < config.endurance);
    }

    #[test]
    fn comparison_needs_two_profiles() {
        let config = quick_mission();
        assert!(matches!(
            compare_profiles(&config, &[DetectorProfile::ssd()]),
            Err(SimError::InvalidArgument(_))
        ));
    }

    #[test]
    fn config_validation_names_keys() {
        let mut config = quick_mission();
        config.cruise_speed = 5.0;
        match run_mission(&config) {
            Err(SimError::Config { key, .. }) => assert_eq!(key, "cruise_speed"),
            other => panic!("expected config error, got {other:?}"),
        }

        let mut config = quick_mission();
        config.targets = vec![GroundTarget::new(0, 500.0, 6.0)];
        match config.validate() {
            Err(SimError::Config { key, .. }) => assert_eq!(key, "target.0.x"),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
