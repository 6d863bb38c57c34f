//! Mission config files: flat `key = value` lines with `#` comments.
//!
//! The key set is strict — unknown keys are rejected with a nearest-match
//! suggestion — and every default is echoed back into the resolved map so a
//! run manifest fully describes the mission that actually ran. `world.width`
//! and `world.height` are the only required keys.

use std::collections::BTreeMap;

use sarquad_core::mission::MissionConfig;
use sarquad_core::perception::{DetectorProfile, GroundTarget};
use sarquad_core::SimError;

/// A config rejection: offending line (when known), key (when known), and
/// what went wrong.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(key) = &self.key {
            write!(f, ": {key}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn keyed(key: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config { key, reason } => ConfigError {
                line: None,
                key: Some(key),
                message: reason,
            },
            other => ConfigError {
                line: None,
                key: None,
                message: other.to_string(),
            },
        }
    }
}

/// Parse result: the mission plus the fully-defaulted key/value echo.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub mission: MissionConfig,
    pub resolved: BTreeMap<String, String>,
}

/// Every accepted scalar/list key. `N` in target keys is a non-negative
/// integer; indices must be contiguous from 0.
const STATIC_KEYS: &[&str] = &[
    "world.width",
    "world.height",
    "spawn.x",
    "spawn.y",
    "search_altitude",
    "cruise_speed",
    "endurance",
    "swath_overlap",
    "seed",
    "physics_dt",
    "imu_rate",
    "control_rate",
    "ultrasonic_rate",
    "detector",
    "detector.name",
    "detector.seconds_per_image",
    "detector.recall_full",
    "detector.recall_partial",
    "detector.confidence_mean",
    "detector.confidence_std",
    "detector.visibility_threshold",
    "camera.width_px",
    "camera.height_px",
    "camera.frame_rate",
    "camera.hfov_deg",
    "camera.vfov_deg",
    "quad.mass",
    "quad.arm_length",
    "quad.thrust_coeff",
    "quad.torque_coeff",
    "quad.inertia_xx",
    "quad.inertia_yy",
    "quad.inertia_zz",
    "quad.gravity",
    "quad.max_speed",
    "filter.alpha",
    "filter.accel_mag_min",
    "filter.accel_mag_max",
    "filter.altitude_lpf",
    "noise.gyro.bias0_x",
    "noise.gyro.bias0_y",
    "noise.gyro.bias0_z",
    "noise.gyro.bias_walk_std",
    "noise.gyro.white_std",
    "noise.accel.white_std",
    "noise.accel.vibration_amp",
    "noise.accel.vibration_freq",
    "noise.accel.spike_prob",
    "noise.accel.spike_scale",
    "noise.ultrasonic.sound_speed",
    "noise.ultrasonic.echo_std",
    "noise.ultrasonic.max_range",
    "noise.ultrasonic.dropout_prob",
    "detection.false_positive_rate",
    "detection.confidence_floor",
    "detection.nms_iou",
    "detection.grids",
    "detection.scales",
    "detection.aspect_ratios",
];

const PID_AXES: &[&str] = &["roll", "pitch", "yaw", "altitude"];
const PID_FIELDS: &[&str] = &["kp", "ki", "kd", "integral_limit", "output_limit"];
const TARGET_FIELDS: &[&str] = &["x", "y", "width", "length", "max_visibility"];

fn is_known_key(key: &str) -> bool {
    if STATIC_KEYS.contains(&key) {
        return true;
    }
    let parts: Vec<&str> = key.split('.').collect();
    match parts.as_slice() {
        ["pid", axis, field] => PID_AXES.contains(axis) && PID_FIELDS.contains(field),
        ["target", index, field] => index.parse::<usize>().is_ok() && TARGET_FIELDS.contains(field),
        _ => false,
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = if ca == cb { prev } else { prev + 1 };
            prev = row[j + 1];
            row[j + 1] = cost.min(row[j] + 1).min(row[j + 1] + 1);
        }
    }
    row[b.len()]
}

/// Nearest known key within a small edit distance, for typo messages.
fn suggest_key(key: &str) -> Option<String> {
    let mut candidates: Vec<String> = STATIC_KEYS.iter().map(|s| s.to_string()).collect();
    for axis in PID_AXES {
        for field in PID_FIELDS {
            candidates.push(format!("pid.{axis}.{field}"));
        }
    }
    // Instantiate target templates with any index present in the input key.
    let index = key
        .split('.')
        .find_map(|seg| seg.parse::<usize>().ok())
        .unwrap_or(0);
    for field in TARGET_FIELDS {
        candidates.push(format!("target.{index}.{field}"));
    }
    candidates
        .into_iter()
        .map(|c| (edit_distance(key, &c), c))
        .filter(|(d, _)| *d <= 3)
        .min()
        .map(|(_, c)| c)
}

fn parse_f64(key: &str, value: &str, line: Option<usize>) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::keyed(key, line, format!("expected a number, got {value:?}")))
}

fn parse_u64(key: &str, value: &str, line: Option<usize>) -> Result<u64, ConfigError> {
    value.parse::<u64>().map_err(|_| {
        ConfigError::keyed(
            key,
            line,
            format!("expected a non-negative integer, got {value:?}"),
        )
    })
}

fn parse_u32_list(key: &str, value: &str, line: Option<usize>) -> Result<Vec<u32>, ConfigError> {
    value
        .split(',')
        .map(|s| s.trim().parse::<u32>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            ConfigError::keyed(
                key,
                line,
                format!("expected comma-separated integers, got {value:?}"),
            )
        })
}

fn parse_f64_list(key: &str, value: &str, line: Option<usize>) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            ConfigError::keyed(
                key,
                line,
                format!("expected comma-separated numbers, got {value:?}"),
            )
        })
}

#[derive(Default)]
struct TargetDraft {
    x: Option<f64>,
    y: Option<f64>,
    width: Option<f64>,
    length: Option<f64>,
    max_visibility: Option<f64>,
}

/// Parse a config file.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Parse a config file, then apply `(key, value)` overrides (e.g. a seed
/// flag or one sweep assignment) before validation.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ParsedConfig, ConfigError> {
    // Collect raw pairs with syntax and duplicate checking.
    let mut pairs: BTreeMap<String, (String, Option<usize>)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError {
                line: Some(line_no),
                key: None,
                message: format!("expected 'key = value', got {line:?}"),
            });
        };
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError {
                line: Some(line_no),
                key: None,
                message: format!("expected 'key = value', got {line:?}"),
            });
        }
        if pairs.contains_key(&key) {
            return Err(ConfigError::keyed(&key, Some(line_no), "duplicate key"));
        }
        pairs.insert(key, (value, Some(line_no)));
    }
    for (key, value) in overrides {
        pairs.insert(key.clone(), (value.clone(), None));
    }

    // Reject unknown keys before anything else, with a typo suggestion.
    for (key, (_, line)) in &pairs {
        if !is_known_key(key) {
            let suggestion = match suggest_key(key) {
                Some(s) => format!(" (did you mean {s:?}?)"),
                None => String::new(),
            };
            return Err(ConfigError::keyed(
                key,
                *line,
                format!("unknown key{suggestion}"),
            ));
        }
    }

    let take =
        |pairs: &BTreeMap<String, (String, Option<usize>)>, key: &str| pairs.get(key).cloned();
    let Some((world_w, line_w)) = take(&pairs, "world.width") else {
        return Err(ConfigError::keyed(
            "world.width",
            None,
            "required key is missing",
        ));
    };
    let Some((world_h, line_h)) = take(&pairs, "world.height") else {
        return Err(ConfigError::keyed(
            "world.height",
            None,
            "required key is missing",
        ));
    };
    let mut mission = MissionConfig::new(
        parse_f64("world.width", &world_w, line_w)?,
        parse_f64("world.height", &world_h, line_h)?,
    );

    let mut targets: BTreeMap<usize, TargetDraft> = BTreeMap::new();

    // BTreeMap order applies the `detector` preset before `detector.*`
    // field overrides, independent of file order.
    for (key, (value, line)) in &pairs {
        apply_key(&mut mission, &mut targets, key, value, *line)?;
    }

    // Assemble targets; indices must be contiguous from zero.
    for (expected, (&index, draft)) in targets.iter().enumerate() {
        if index != expected {
            return Err(ConfigError::keyed(
                &format!("target.{expected}.x"),
                None,
                format!("target indices must be contiguous; found target.{index} first"),
            ));
        }
        let key = |field: &str| format!("target.{index}.{field}");
        let x = draft
            .x
            .ok_or_else(|| ConfigError::keyed(&key("x"), None, "required for each target"))?;
        let y = draft
            .y
            .ok_or_else(|| ConfigError::keyed(&key("y"), None, "required for each target"))?;
        let mut target = GroundTarget::new(index as u32, x, y);
        if let Some(w) = draft.width {
            target.width = w;
        }
        if let Some(l) = draft.length {
            target.length = l;
        }
        if let Some(v) = draft.max_visibility {
            target.max_visibility = v;
        }
        mission.targets.push(target);
    }

    mission.validate().map_err(ConfigError::from)?;
    let resolved = resolved_map(&mission);
    Ok(ParsedConfig { mission, resolved })
}

fn apply_key(
    mission: &mut MissionConfig,
    targets: &mut BTreeMap<usize, TargetDraft>,
    key: &str,
    value: &str,
    line: Option<usize>,
) -> Result<(), ConfigError> {
    let f = |m: &str| parse_f64(key, m, line);
    match key {
        "world.width" | "world.height" => {} // consumed by the constructor
        "spawn.x" => mission.spawn.x = f(value)?,
        "spawn.y" => mission.spawn.y = f(value)?,
        "search_altitude" => mission.search_altitude = f(value)?,
        "cruise_speed" => mission.cruise_speed = f(value)?,
        "endurance" => mission.endurance = f(value)?,
        "swath_overlap" => mission.swath_overlap = f(value)?,
        "seed" => mission.seed = parse_u64(key, value, line)?,
        "physics_dt" => mission.physics_dt = f(value)?,
        "imu_rate" => mission.imu_rate = f(value)?,
        "control_rate" => mission.control_rate = f(value)?,
        "ultrasonic_rate" => mission.ultrasonic_rate = f(value)?,
        "detector" => {
            mission.detector = DetectorProfile::by_name(value).ok_or_else(|| {
                ConfigError::keyed(
                    key,
                    line,
                    format!("unknown profile {value:?}; shipped profiles: ssd, haar, hog"),
                )
            })?;
        }
        "detector.name" => mission.detector.name = value.to_string(),
        "detector.seconds_per_image" => mission.detector.seconds_per_image = f(value)?,
        "detector.recall_full" => mission.detector.recall_full = f(value)?,
        "detector.recall_partial" => mission.detector.recall_partial = f(value)?,
        "detector.confidence_mean" => mission.detector.confidence_mean = f(value)?,
        "detector.confidence_std" => mission.detector.confidence_std = f(value)?,
        "detector.visibility_threshold" => mission.detector.visibility_threshold = f(value)?,
        "camera.width_px" => {
            mission.camera.width_px = parse_u64(key, value, line)? as u32;
        }
        "camera.height_px" => {
            mission.camera.height_px = parse_u64(key, value, line)? as u32;
        }
        "camera.frame_rate" => mission.camera.frame_rate_hz = f(value)?,
        "camera.hfov_deg" => mission.camera.hfov = f(value)?.to_radians(),
        "camera.vfov_deg" => mission.camera.vfov = f(value)?.to_radians(),
        "quad.mass" => mission.quad.mass = f(value)?,
        "quad.arm_length" => mission.quad.arm_length = f(value)?,
        "quad.thrust_coeff" => mission.quad.thrust_coeff = f(value)?,
        "quad.torque_coeff" => mission.quad.torque_coeff = f(value)?,
        "quad.inertia_xx" => mission.quad.inertia.x = f(value)?,
        "quad.inertia_yy" => mission.quad.inertia.y = f(value)?,
        "quad.inertia_zz" => mission.quad.inertia.z = f(value)?,
        "quad.gravity" => mission.quad.gravity = f(value)?,
        "quad.max_speed" => mission.quad.max_speed = f(value)?,
        "filter.alpha" => mission.filter.alpha = f(value)?,
        "filter.accel_mag_min" => mission.filter.accel_mag_min = f(value)?,
        "filter.accel_mag_max" => mission.filter.accel_mag_max = f(value)?,
        "filter.altitude_lpf" => mission.filter.altitude_lpf_coeff = f(value)?,
        "noise.gyro.bias0_x" => mission.gyro_model.bias0.x = f(value)?,
        "noise.gyro.bias0_y" => mission.gyro_model.bias0.y = f(value)?,
        "noise.gyro.bias0_z" => mission.gyro_model.bias0.z = f(value)?,
        "noise.gyro.bias_walk_std" => mission.gyro_model.bias_random_walk_std = f(value)?,
        "noise.gyro.white_std" => mission.gyro_model.white_noise_std = f(value)?,
        "noise.accel.white_std" => mission.accel_model.white_noise_std = f(value)?,
        "noise.accel.vibration_amp" => {
            mission.accel_model.vibration_amplitude_per_throttle = f(value)?
        }
        "noise.accel.vibration_freq" => mission.accel_model.vibration_freq = f(value)?,
        "noise.accel.spike_prob" => mission.accel_model.spike_probability = f(value)?,
        "noise.accel.spike_scale" => mission.accel_model.spike_scale = f(value)?,
        "noise.ultrasonic.sound_speed" => mission.ultrasonic_model.sound_speed = f(value)?,
        "noise.ultrasonic.echo_std" => mission.ultrasonic_model.echo_noise_std = f(value)?,
        "noise.ultrasonic.max_range" => mission.ultrasonic_model.max_range = f(value)?,
        "noise.ultrasonic.dropout_prob" => mission.ultrasonic_model.dropout_probability = f(value)?,
        "detection.false_positive_rate" => mission.detection.false_positive_rate = f(value)?,
        "detection.confidence_floor" => mission.detection.confidence_floor = f(value)?,
        "detection.nms_iou" => mission.detection.nms_iou = f(value)?,
        "detection.grids" => mission.detection.grids = parse_u32_list(key, value, line)?,
        "detection.scales" => mission.detection.scales = parse_f64_list(key, value, line)?,
        "detection.aspect_ratios" => {
            mission.detection.aspect_ratios = parse_f64_list(key, value, line)?
        }
        _ => {
            let parts: Vec<&str> = key.split('.').collect();
            match parts.as_slice() {
                ["pid", axis, field] => {
                    let gains = match *axis {
                        "roll" => &mut mission.pid.roll,
                        "pitch" => &mut mission.pid.pitch,
                        "yaw" => &mut mission.pid.yaw,
                        "altitude" => &mut mission.pid.altitude,
                        _ => unreachable!("validated by is_known_key"),
                    };
                    let v = f(value)?;
                    match *field {
                        "kp" => gains.kp = v,
                        "ki" => gains.ki = v,
                        "kd" => gains.kd = v,
                        "integral_limit" => gains.integral_limit = v,
                        "output_limit" => gains.output_limit = v,
                        _ => unreachable!("validated by is_known_key"),
                    }
                }
                ["target", index, field] => {
                    let index: usize = index.parse().expect("validated by is_known_key");
                    let draft = targets.entry(index).or_default();
                    let v = f(value)?;
                    match *field {
                        "x" => draft.x = Some(v),
                        "y" => draft.y = Some(v),
                        "width" => draft.width = Some(v),
                        "length" => draft.length = Some(v),
                        "max_visibility" => draft.max_visibility = Some(v),
                        _ => unreachable!("validated by is_known_key"),
                    }
                }
                _ => unreachable!("validated by is_known_key"),
            }
        }
    }
    Ok(())
}

/// Echo the effective mission back as canonical key/value pairs.
pub fn resolved_map(m: &MissionConfig) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        out.insert(k.to_string(), v);
    };
    put("world.width", m.world_width.to_string());
    put("world.height", m.world_height.to_string());
    put("spawn.x", m.spawn.x.to_string());
    put("spawn.y", m.spawn.y.to_string());
    put("search_altitude", m.search_altitude.to_string());
    put("cruise_speed", m.cruise_speed.to_string());
    put("endurance", m.endurance.to_string());
    put("swath_overlap", m.swath_overlap.to_string());
    put("seed", m.seed.to_string());
    put("physics_dt", m.physics_dt.to_string());
    put("imu_rate", m.imu_rate.to_string());
    put("control_rate", m.control_rate.to_string());
    put("ultrasonic_rate", m.ultrasonic_rate.to_string());
    put("detector.name", m.detector.name.clone());
    put(
        "detector.seconds_per_image",
        m.detector.seconds_per_image.to_string(),
    );
    put("detector.recall_full", m.detector.recall_full.to_string());
    put(
        "detector.recall_partial",
        m.detector.recall_partial.to_string(),
    );
    put(
        "detector.confidence_mean",
        m.detector.confidence_mean.to_string(),
    );
    put(
        "detector.confidence_std",
        m.detector.confidence_std.to_string(),
    );
    put(
        "detector.visibility_threshold",
        m.detector.visibility_threshold.to_string(),
    );
    put("camera.width_px", m.camera.width_px.to_string());
    put("camera.height_px", m.camera.height_px.to_string());
    put("camera.frame_rate", m.camera.frame_rate_hz.to_string());
    put("camera.hfov_deg", m.camera.hfov.to_degrees().to_string());
    put("camera.vfov_deg", m.camera.vfov.to_degrees().to_string());
    put("quad.mass", m.quad.mass.to_string());
    put("quad.arm_length", m.quad.arm_length.to_string());
    put("quad.thrust_coeff", m.quad.thrust_coeff.to_string());
    put("quad.torque_coeff", m.quad.torque_coeff.to_string());
    put("quad.inertia_xx", m.quad.inertia.x.to_string());
    put("quad.inertia_yy", m.quad.inertia.y.to_string());
    put("quad.inertia_zz", m.quad.inertia.z.to_string());
    put("quad.gravity", m.quad.gravity.to_string());
    put("quad.max_speed", m.quad.max_speed.to_string());
    put("filter.alpha", m.filter.alpha.to_string());
    put("filter.accel_mag_min", m.filter.accel_mag_min.to_string());
    put("filter.accel_mag_max", m.filter.accel_mag_max.to_string());
    put(
        "filter.altitude_lpf",
        m.filter.altitude_lpf_coeff.to_string(),
    );
    put("noise.gyro.bias0_x", m.gyro_model.bias0.x.to_string());
    put("noise.gyro.bias0_y", m.gyro_model.bias0.y.to_string());
    put("noise.gyro.bias0_z", m.gyro_model.bias0.z.to_string());
    put(
        "noise.gyro.bias_walk_std",
        m.gyro_model.bias_random_walk_std.to_string(),
    );
    put(
        "noise.gyro.white_std",
        m.gyro_model.white_noise_std.to_string(),
    );
    put(
        "noise.accel.white_std",
        m.accel_model.white_noise_std.to_string(),
    );
    put(
        "noise.accel.vibration_amp",
        m.accel_model.vibration_amplitude_per_throttle.to_string(),
    );
    put(
        "noise.accel.vibration_freq",
        m.accel_model.vibration_freq.to_string(),
    );
    put(
        "noise.accel.spike_prob",
        m.accel_model.spike_probability.to_string(),
    );
    put(
        "noise.accel.spike_scale",
        m.accel_model.spike_scale.to_string(),
    );
    put(
        "noise.ultrasonic.sound_speed",
        m.ultrasonic_model.sound_speed.to_string(),
    );
    put(
        "noise.ultrasonic.echo_std",
        m.ultrasonic_model.echo_noise_std.to_string(),
    );
    put(
        "noise.ultrasonic.max_range",
        m.ultrasonic_model.max_range.to_string(),
    );
    put(
        "noise.ultrasonic.dropout_prob",
        m.ultrasonic_model.dropout_probability.to_string(),
    );
    put(
        "detection.false_positive_rate",
        m.detection.false_positive_rate.to_string(),
    );
    put(
        "detection.confidence_floor",
        m.detection.confidence_floor.to_string(),
    );
    put("detection.nms_iou", m.detection.nms_iou.to_string());
    let join_u32 = |v: &[u32]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let join_f64 = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    put("detection.grids", join_u32(&m.detection.grids));
    put("detection.scales", join_f64(&m.detection.scales));
    put(
        "detection.aspect_ratios",
        join_f64(&m.detection.aspect_ratios),
    );
    for (axis, gains) in [
        ("roll", &m.pid.roll),
        ("pitch", &m.pid.pitch),
        ("yaw", &m.pid.yaw),
        ("altitude", &m.pid.altitude),
    ] {
        put(&format!("pid.{axis}.kp"), gains.kp.to_string());
        put(&format!("pid.{axis}.ki"), gains.ki.to_string());
        put(&format!("pid.{axis}.kd"), gains.kd.to_string());
        put(
            &format!("pid.{axis}.integral_limit"),
            gains.integral_limit.to_string(),
        );
        put(
            &format!("pid.{axis}.output_limit"),
            gains.output_limit.to_string(),
        );
    }
    for t in &m.targets {
        let i = t.id;
        put(&format!("target.{i}.x"), t.position.x.to_string());
        put(&format!("target.{i}.y"), t.position.y.to_string());
        put(&format!("target.{i}.width"), t.width.to_string());
        put(&format!("target.{i}.length"), t.length.to_string());
        put(
            &format!("target.{i}.max_visibility"),
            t.max_visibility.to_string(),
        );
    }
    out
}
