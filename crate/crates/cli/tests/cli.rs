//! Binary-level tests: exit codes, output files, manifest integrity.

use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sarquad"))
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const TINY_MISSION: &str = "\
world.width = 30
world.height = 12
endurance = 90
cruise_speed = 2.5
target.0.x = 15
target.0.y = 6
detector = ssd
";

#[test]
fn simulate_writes_outputs_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", TINY_MISSION);
    let out = tmp.path().join("out");
    let status = binary()
        .args(["simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in [
        "telemetry.csv",
        "detections.csv",
        "metrics.txt",
        "manifest.json",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let telemetry = std::fs::read_to_string(out.join("telemetry.csv")).unwrap();
    assert!(telemetry.starts_with(
        "time_s,x,y,z,roll,pitch,yaw,est_roll,est_pitch,est_yaw,est_alt,u1,u2,u3,u4\n"
    ));
    let detections = std::fs::read_to_string(out.join("detections.csv")).unwrap();
    assert!(detections.starts_with(
        "frame_index,sim_time_s,target_id,x_min,y_min,x_max,y_max,confidence,visibility\n"
    ));
}

#[test]
fn manifest_checksums_match_emitted_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", TINY_MISSION);
    let out = tmp.path().join("out");
    assert!(binary()
        .args(["simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_object().unwrap();
    assert_eq!(files.len(), 3);
    for (name, recorded) in files {
        let bytes = std::fs::read(out.join(name)).unwrap();
        let actual = sarquad_cli::output::sha256_hex(&bytes);
        assert_eq!(recorded.as_str().unwrap(), actual, "{name}");
    }
    // The run is self-describing: defaults echoed.
    assert_eq!(manifest["resolved_config"]["filter.alpha"], "0.98");
    assert_eq!(manifest["seed"], 42);
}

#[test]
fn config_rejection_exits_two_and_names_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.cfg",
        "world.width = 30\nworld.height = 12\ncruise_speed = 5.0\n",
    );
    let output = binary()
        .args(["simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("cruise_speed"), "stderr: {stderr}");

    let cfg = write_config(
        tmp.path(),
        "typo.cfg",
        "world.width = 30\nworld.height = 12\ndetectr = hog\n",
    );
    let output = binary()
        .args(["simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out2"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("detectr") && stderr.contains("detector"),
        "stderr: {stderr}"
    );
}

#[test]
fn missing_config_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["simulate"])
        .arg(tmp.path().join("nope.cfg"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("nope.cfg"));
}

#[test]
fn negative_pid_gain_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.cfg",
        &format!("{TINY_MISSION}pid.altitude.ki = -0.5\n"),
    );
    let output = binary()
        .args(["simulate"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("pid.altitude"));
}

#[test]
fn unknown_profile_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", TINY_MISSION);
    let output = binary()
        .args(["compare"])
        .arg(&cfg)
        .args(["--profiles", "ssd,yolo"])
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("yolo"));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", TINY_MISSION);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, seed) in [(&a, "7"), (&b, "8")] {
        assert!(binary()
            .args(["simulate"])
            .arg(&cfg)
            .args(["--seed", seed])
            .arg("--out")
            .arg(dir)
            .status()
            .unwrap()
            .success());
    }
    let read = |d: &Path| std::fs::read(d.join("telemetry.csv")).unwrap();
    assert_ne!(read(&a), read(&b), "different seeds must change the run");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["resolved_config"]["seed"], "7");
}

#[test]
fn env_var_supplies_default_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", TINY_MISSION);
    let out = tmp.path().join("via-env");
    assert!(binary()
        .args(["simulate"])
        .arg(&cfg)
        .env("SAR_QUAD_OUT", &out)
        .current_dir(tmp.path())
        .status()
        .unwrap()
        .success());
    assert!(out.join("metrics.txt").exists());
}

#[test]
fn compare_writes_table_and_per_profile_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    assert!(binary()
        .args(["compare"])
        .arg(repo_path("missions/partial.cfg"))
        .args(["--profiles", "ssd,haar"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,fps,sec_per_image,targets_detected,time_to_first_detection"
    );
    assert!(lines.next().unwrap().starts_with("ssd,3.003,0.333,"));
    assert!(lines.next().unwrap().starts_with("haar,1.000,1,"));
    assert!(out.join("ssd/metrics.txt").exists());
    assert!(out.join("haar/metrics.txt").exists());
}

#[test]
fn sweep_aggregates_summary_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", TINY_MISSION);
    let out = tmp.path().join("swp");
    assert!(binary()
        .args(["sweep"])
        .arg(&cfg)
        .args(["--param", "filter.alpha", "--values", "0.9,0.98"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "header + one row per value");
    assert!(lines[1].starts_with("filter.alpha,0.9,"));
    assert!(lines[2].starts_with("filter.alpha,0.98,"));
    // Distinct filter-error columns for distinct alphas.
    let rms = |line: &str| line.split(',').nth(8).unwrap().to_string();
    assert_ne!(rms(lines[1]), rms(lines[2]));
    assert!(out.join("00_0.9/manifest.json").exists());
    assert!(out.join("01_0.98/manifest.json").exists());
}
