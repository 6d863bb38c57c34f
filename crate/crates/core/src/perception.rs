//! Downward-camera target projection and detector modelling.
//!
//! The camera is a nadir-mounted pinhole; ground targets project to pixel
//! boxes whose clipped/unclipped area ratio gives a visibility fraction.
//! Detection itself is a profile-driven stochastic model: per-sighting
//! recall depends on whether the target is fully or only partially visible,
//! the emitted box is the best-overlapping member of a multi-scale default
//! box set, and greedy non-maximum suppression produces the final list.
//! Profiles also carry a fixed per-image latency, which is what separates
//! the shipped `ssd`, `haar` and `hog` presets most.

use nalgebra::{Rotation2, Vector2};

use crate::dynamics::QuadState;
use crate::rng::{stream, CounterRng};
use crate::SimError;

/// Nadir-mounted camera.
#[derive(Debug, Clone, Copy)]
pub struct CameraModel {
    pub width_px: u32,
    pub height_px: u32,
    pub frame_rate_hz: f64,
    /// Horizontal field of view \[rad\]; spans the across-track axis.
    pub hfov: f64,
    /// Vertical field of view \[rad\]; spans the along-track axis.
    pub vfov: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            width_px: 640,
            height_px: 480,
            frame_rate_hz: 30.0,
            hfov: 60.0_f64.to_radians(),
            vfov: 48.0_f64.to_radians(),
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(SimError::invalid("camera pixel dimensions must be > 0"));
        }
        for (name, fov) in [("hfov", self.hfov), ("vfov", self.vfov)] {
            if !(fov > 0.0 && fov < std::f64::consts::PI) {
                return Err(SimError::invalid(format!(
                    "camera {name} must be in (0, pi), got {fov}"
                )));
            }
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(SimError::invalid("camera frame rate must be > 0"));
        }
        Ok(())
    }
}

/// Axis-aligned pixel-space box, continuous coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        (self.width().max(0.0)) * (self.height().max(0.0))
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// Intersect with the frame `[0, w] x [0, h]`; `None` when disjoint.
    pub fn clipped_to(&self, width: f64, height: f64) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.max(0.0),
            y_min: self.y_min.max(0.0),
            x_max: self.x_max.min(width),
            y_max: self.y_max.min(height),
        };
        (b.x_min < b.x_max && b.y_min < b.y_max).then_some(b)
    }
}

/// Intersection-over-union of two boxes; 0 when disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// A scored box. `target_id` is simulation ground truth (absent for false
/// positives); a real detector would not have it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    pub target_id: Option<u32>,
}

/// Throughput and recall model standing in for one concrete detection
/// method. The latency constants match the shipped preset table; the recall
/// and confidence numbers are invented desk-scale values encoding that the
/// `ssd` preset alone keeps useful recall on partially visible people.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorProfile {
    pub name: String,
    /// Processing latency per image \[s\].
    pub seconds_per_image: f64,
    /// Detection probability for a fully visible target.
    pub recall_full: f64,
    /// Detection probability when visibility is below the threshold.
    pub recall_partial: f64,
    pub confidence_mean: f64,
    pub confidence_std: f64,
    /// Visibility fraction separating full from partial sightings.
    pub visibility_threshold: f64,
}

impl DetectorProfile {
    pub fn ssd() -> Self {
        DetectorProfile {
            name: "ssd".into(),
            seconds_per_image: 0.333,
            recall_full: 0.95,
            recall_partial: 0.6,
            confidence_mean: 0.85,
            confidence_std: 0.08,
            visibility_threshold: 0.8,
        }
    }

    pub fn haar() -> Self {
        DetectorProfile {
            name: "haar".into(),
            seconds_per_image: 1.0,
            recall_full: 0.8,
            recall_partial: 0.0,
            confidence_mean: 0.70,
            confidence_std: 0.10,
            visibility_threshold: 0.8,
        }
    }

    pub fn hog() -> Self {
        DetectorProfile {
            name: "hog".into(),
            seconds_per_image: 18.879,
            recall_full: 0.85,
            recall_partial: 0.0,
            confidence_mean: 0.75,
            confidence_std: 0.10,
            visibility_threshold: 0.8,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ssd" => Some(Self::ssd()),
            "haar" => Some(Self::haar()),
            "hog" => Some(Self::hog()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.seconds_per_image.is_finite() && self.seconds_per_image > 0.0) {
            return Err(SimError::invalid("seconds_per_image must be > 0"));
        }
        for (name, v) in [
            ("recall_full", self.recall_full),
            ("recall_partial", self.recall_partial),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::invalid(format!("{name} must be in [0, 1]")));
            }
        }
        if !(self.visibility_threshold > 0.0 && self.visibility_threshold < 1.0) {
            return Err(SimError::invalid("visibility_threshold must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Frames per second implied by the profile latency.
pub fn throughput(profile: &DetectorProfile) -> f64 {
    1.0 / profile.seconds_per_image
}

/// A person-scale object on the ground.
#[derive(Debug, Clone, Copy)]
pub struct GroundTarget {
    pub id: u32,
    /// World position \[m\].
    pub position: Vector2<f64>,
    /// Footprint extent along world x \[m\].
    pub width: f64,
    /// Footprint extent along world y \[m\].
    pub length: f64,
    /// Cap on the reported visibility fraction; below 1 it marks a target
    /// the camera can only ever catch partially.
    pub max_visibility: f64,
}

impl GroundTarget {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        GroundTarget {
            id,
            position: Vector2::new(x, y),
            width: 0.5,
            length: 1.8,
            max_visibility: 1.0,
        }
    }
}

/// Ground extent (width, height) \[m\] imaged from `altitude` at nadir.
pub fn ground_footprint(camera: &CameraModel, altitude: f64) -> Result<(f64, f64), SimError> {
    if !(altitude.is_finite() && altitude > 0.0) {
        return Err(SimError::invalid(format!(
            "footprint requires altitude > 0, got {altitude}"
        )));
    }
    Ok((
        2.0 * altitude * (camera.hfov / 2.0).tan(),
        2.0 * altitude * (camera.vfov / 2.0).tan(),
    ))
}

/// Tilt beyond which the projection accounts for the shifted boresight.
const TILT_OFFSET_THRESHOLD: f64 = 0.1;

/// Project a ground target into the frame. Returns the clipped pixel box and
/// the visibility fraction (clipped area / unclipped area), or `None` when
/// the target is entirely outside the frame (or the vehicle is on the
/// ground). Level-flight approximation: yaw rotates the view; roll/pitch
/// below 0.1 rad are ignored, larger tilts displace the viewed ground patch.
pub fn project_target(
    state: &QuadState,
    camera: &CameraModel,
    target: &GroundTarget,
) -> Option<(BBox, f64)> {
    let altitude = state.position.z;
    if altitude <= 0.0 {
        return None;
    }

    let (w, h) = (camera.width_px as f64, camera.height_px as f64);
    let half_w_m = altitude * (camera.hfov / 2.0).tan();
    let half_h_m = altitude * (camera.vfov / 2.0).tan();
    let su = (w / 2.0) / half_w_m;
    let sv = (h / 2.0) / half_h_m;

    // Ground point under the boresight.
    let mut view_center = Vector2::new(state.position.x, state.position.y);
    if state.roll.abs() >= TILT_OFFSET_THRESHOLD || state.pitch.abs() >= TILT_OFFSET_THRESHOLD {
        let offset_body = Vector2::new(-altitude * state.pitch.tan(), altitude * state.roll.tan());
        view_center += Rotation2::new(state.yaw) * offset_body;
    }

    let to_body = Rotation2::new(-state.yaw);
    let (mut x_min, mut y_min) = (f64::INFINITY, f64::INFINITY);
    let (mut x_max, mut y_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            let corner = target.position + Vector2::new(sx * target.width, sy * target.length);
            let d = to_body * (corner - view_center);
            // Image x spans body y (across-track), image y spans body x.
            let px = w / 2.0 - d.y * su;
            let py = h / 2.0 - d.x * sv;
            x_min = x_min.min(px);
            y_min = y_min.min(py);
            x_max = x_max.max(px);
            y_max = y_max.max(py);
        }
    }

    let raw = BBox::new(x_min, y_min, x_max, y_max);
    let clipped = raw.clipped_to(w, h)?;
    let visibility = clipped.area() / raw.area();
    Some((clipped, visibility))
}

/// Multi-scale default box set: one scale per grid, all aspect ratios at
/// every cell. Box size is `(scale*width*sqrt(ar), scale*height/sqrt(ar))`
/// centred on the cell, clipped to the frame. Enumeration order (grid, then
/// row-major cells, then aspect ratios) defines the tie-break index used by
/// the detector.
pub fn default_boxes(
    grid_sizes: &[u32],
    scales: &[f64],
    aspect_ratios: &[f64],
    frame_width: f64,
    frame_height: f64,
) -> Result<Vec<BBox>, SimError> {
    if grid_sizes.is_empty() || scales.is_empty() || aspect_ratios.is_empty() {
        return Err(SimError::invalid("default box lists must be non-empty"));
    }
    if grid_sizes.len() != scales.len() {
        return Err(SimError::invalid(format!(
            "one scale per grid required: {} grids vs {} scales",
            grid_sizes.len(),
            scales.len()
        )));
    }
    if scales.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::invalid("scales must be ascending"));
    }
    if grid_sizes.contains(&0) {
        return Err(SimError::invalid("grid sizes must be > 0"));
    }
    if scales.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
        return Err(SimError::invalid("scales must be in (0, 1]"));
    }
    if aspect_ratios.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return Err(SimError::invalid("aspect ratios must be > 0"));
    }

    let mut boxes = Vec::new();
    for (&grid, &scale) in grid_sizes.iter().zip(scales) {
        let cell_w = frame_width / grid as f64;
        let cell_h = frame_height / grid as f64;
        for row in 0..grid {
            for col in 0..grid {
                let cx = (col as f64 + 0.5) * cell_w;
                let cy = (row as f64 + 0.5) * cell_h;
                for &ar in aspect_ratios {
                    let bw = scale * frame_width * ar.sqrt();
                    let bh = scale * frame_height / ar.sqrt();
                    let raw = BBox::new(cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0);
                    // Frame-sized grids always intersect the frame.
                    boxes.push(
                        raw.clipped_to(frame_width, frame_height)
                            .expect("cell-centred box intersects frame"),
                    );
                }
            }
        }
    }
    Ok(boxes)
}

/// A ground-truth sighting handed to the simulated detector.
#[derive(Debug, Clone, Copy)]
pub struct Sighting {
    pub bbox: BBox,
    pub visibility: f64,
    pub target_id: u32,
}

/// Simulate one detector pass over a frame.
///
/// Each sighting rolls a Bernoulli keyed by `(mission_seed, frame_index,
/// target_id)` — common random numbers, so profiles with equal recalls
/// produce identical detect/miss patterns — against the recall its
/// visibility selects. Successes emit the default box with the highest IoU
/// to the truth box (ties resolve to the lowest box index) and a clamped
/// Gaussian confidence. False positives land on random default boxes at
/// `false_positive_rate` expected per frame.
pub fn simulate_detector(
    sightings: &[Sighting],
    profile: &DetectorProfile,
    boxes: &[BBox],
    frame_index: u64,
    mission_seed: u64,
    false_positive_rate: f64,
) -> Vec<Detection> {
    let mut detections = Vec::new();
    for s in sightings {
        let recall = if s.visibility >= profile.visibility_threshold {
            profile.recall_full
        } else {
            profile.recall_partial
        };
        let mut detect_rng = CounterRng::keyed(
            mission_seed,
            stream::DETECT,
            &[frame_index, s.target_id as u64],
        );
        if !detect_rng.bernoulli(recall) {
            continue;
        }

        let mut best = 0usize;
        let mut best_iou = -1.0;
        for (i, b) in boxes.iter().enumerate() {
            let v = iou(b, &s.bbox);
            if v > best_iou {
                best_iou = v;
                best = i;
            }
        }
        let mut conf_rng = CounterRng::keyed(
            mission_seed,
            stream::CONFIDENCE,
            &[frame_index, s.target_id as u64],
        );
        let confidence = (profile.confidence_mean + profile.confidence_std * conf_rng.gaussian())
            .clamp(0.0, 1.0);
        detections.push(Detection {
            bbox: boxes[best],
            confidence,
            target_id: Some(s.target_id),
        });
    }

    if false_positive_rate > 0.0 && !boxes.is_empty() {
        let mut fp_rng = CounterRng::keyed(mission_seed, stream::FALSE_POSITIVE, &[frame_index]);
        let mut count = false_positive_rate.floor() as u64;
        if fp_rng.bernoulli(false_positive_rate.fract()) {
            count += 1;
        }
        for _ in 0..count {
            let idx = fp_rng.below(boxes.len() as u64) as usize;
            let confidence = (profile.confidence_mean + profile.confidence_std * fp_rng.gaussian())
                .clamp(0.0, 1.0);
            detections.push(Detection {
                bbox: boxes[idx],
                confidence,
                target_id: None,
            });
        }
    }

    detections
}

/// Greedy non-maximum suppression: repeatedly keep the highest-confidence
/// remaining detection (ties go to the lower original index) and discard
/// everything overlapping it with IoU strictly above the threshold. Output
/// is ordered by selection.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .confidence
            .partial_cmp(&detections[a].confidence)
            .expect("confidences are in [0, 1]")
            .then(a.cmp(&b))
    });

    let mut suppressed = vec![false; detections.len()];
    let mut kept = Vec::new();
    for &i in &order {
        if suppressed[i] {
            continue;
        }
        kept.push(detections[i]);
        for &j in &order {
            if !suppressed[j]
                && j != i
                && iou(&detections[i].bbox, &detections[j].bbox) > iou_threshold
            {
                suppressed[j] = true;
            }
        }
        suppressed[i] = true;
    }
    kept
}
