//! Run output files: telemetry and detection CSVs, the metrics summary, and
//! the manifest tying them together with checksums.
//!
//! Files are staged to a `.tmp` sibling and renamed into place, so an
//! interrupted run never leaves a partially written output. The manifest is
//! written last, once every other file exists; its checksums are the
//! determinism contract between repeated runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sarquad_core::mission::{DetectionEvent, MissionMetrics, MissionOutput, TelemetryRow};
use sha2::{Digest, Sha256};

pub const TELEMETRY_HEADER: &str =
    "time_s,x,y,z,roll,pitch,yaw,est_roll,est_pitch,est_yaw,est_alt,u1,u2,u3,u4";
pub const DETECTIONS_HEADER: &str =
    "frame_index,sim_time_s,target_id,x_min,y_min,x_max,y_max,confidence,visibility";

pub fn telemetry_csv(rows: &[TelemetryRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96 + 64);
    out.push_str(TELEMETRY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.time_s,
            r.x,
            r.y,
            r.z,
            r.roll,
            r.pitch,
            r.yaw,
            r.est_roll,
            r.est_pitch,
            r.est_yaw,
            r.est_alt,
            r.u1,
            r.u2,
            r.u3,
            r.u4
        );
    }
    out
}

pub fn detections_csv(events: &[DetectionEvent]) -> String {
    let mut out = String::with_capacity(events.len() * 80 + 80);
    out.push_str(DETECTIONS_HEADER);
    out.push('\n');
    for e in events {
        let target = e.target_id.map(|id| id.to_string()).unwrap_or_default();
        let visibility = e.visibility.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.frame_index,
            e.time_s,
            target,
            e.bbox.x_min,
            e.bbox.y_min,
            e.bbox.x_max,
            e.bbox.y_max,
            e.confidence,
            visibility
        );
    }
    out
}

pub fn metrics_txt(m: &MissionMetrics) -> String {
    let ttfd = m
        .time_to_first_detection
        .map(|t| t.to_string())
        .unwrap_or_else(|| "none".to_string());
    format!(
        "targets_total = {}\n\
         targets_detected = {}\n\
         time_to_first_detection = {}\n\
         detections_emitted = {}\n\
         frames_captured = {}\n\
         frames_processed = {}\n\
         coverage_fraction = {}\n\
         flight_time = {}\n\
         crashed = {}\n\
         mean_confidence = {}\n",
        m.targets_total,
        m.targets_detected,
        ttfd,
        m.detections_emitted,
        m.frames_captured,
        m.frames_processed,
        m.coverage_fraction,
        m.flight_time,
        m.crashed,
        m.mean_confidence
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Write via a temporary sibling and rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Accumulates emitted files for one output directory, then seals them with
/// a manifest.
pub struct RunWriter {
    dir: PathBuf,
    checksums: BTreeMap<String, String>,
}

impl RunWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            checksums: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        self.checksums
            .insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.checksums
    }

    /// Write `manifest.json` listing every emitted file. Call last.
    pub fn seal(
        &self,
        command: &str,
        config_path: &Path,
        seed: u64,
        resolved: &BTreeMap<String, String>,
    ) -> io::Result<()> {
        let manifest = serde_json::json!({
            "artifact_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_path": config_path.display().to_string(),
            "seed": seed,
            "output_dir": self.dir.display().to_string(),
            "resolved_config": resolved,
            "files": self.checksums,
        });
        let pretty = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.dir.join("manifest.json"), pretty.as_bytes())
    }
}

/// Write the standard per-run file set (telemetry, detections, metrics).
pub fn write_mission_output(writer: &mut RunWriter, output: &MissionOutput) -> io::Result<()> {
    writer.write("telemetry.csv", &telemetry_csv(&output.telemetry))?;
    writer.write("detections.csv", &detections_csv(&output.detections))?;
    writer.write("metrics.txt", &metrics_txt(&output.metrics))
}

/// RMS attitude estimation error over a telemetry trace, (roll, pitch).
pub fn estimation_rms(rows: &[TelemetryRow]) -> (f64, f64) {
    if rows.is_empty() {
        return (0.0, 0.0);
    }
    let n = rows.len() as f64;
    let roll: f64 = rows.iter().map(|r| (r.est_roll - r.roll).powi(2)).sum();
    let pitch: f64 = rows.iter().map(|r| (r.est_pitch - r.pitch).powi(2)).sum();
    ((roll / n).sqrt(), (pitch / n).sqrt())
}
