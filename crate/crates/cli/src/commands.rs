//! The `simulate`, `compare` and `sweep` commands, exposed as library
//! functions so tests can drive them without spawning the binary.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sarquad_core::mission::{compare_profiles, run_mission, MissionMetrics};
use sarquad_core::perception::{throughput, DetectorProfile};
use sarquad_core::SimError;

use crate::config::{parse_config_with_overrides, resolved_map, ConfigError, ParsedConfig};
use crate::output::{estimation_rms, write_mission_output, RunWriter};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Sim(SimError),
    Io(io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// Documented exit codes: 2 config rejection, 3 simulation divergence,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sim(SimError::Diverged { .. }) => 3,
            CliError::Sim(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

fn read_config_text(config_path: &Path) -> Result<String, CliError> {
    // An unreadable config path is a config error (exit 2), not an I/O one.
    std::fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(ConfigError {
            line: None,
            key: None,
            message: format!("cannot read {}: {e}", config_path.display()),
        })
    })
}

fn load(config_path: &Path, overrides: &[(String, String)]) -> Result<ParsedConfig, CliError> {
    let text = read_config_text(config_path)?;
    Ok(parse_config_with_overrides(&text, overrides)?)
}

fn format_ttfd(t: Option<f64>) -> String {
    t.map(|v| format!("{v:.3}"))
        .unwrap_or_else(|| "none".into())
}

/// Run one mission and write `telemetry.csv`, `detections.csv`,
/// `metrics.txt` and `manifest.json` into `out_dir`.
pub fn cmd_simulate(
    config_path: &Path,
    seed: Option<u64>,
    out_dir: &Path,
) -> Result<MissionMetrics, CliError> {
    let overrides: Vec<(String, String)> = seed
        .map(|s| vec![("seed".to_string(), s.to_string())])
        .unwrap_or_default();
    let parsed = load(config_path, &overrides)?;
    let output = run_mission(&parsed.mission)?;

    let mut writer = RunWriter::create(out_dir)?;
    write_mission_output(&mut writer, &output)?;
    writer.seal(
        "simulate",
        config_path,
        parsed.mission.seed,
        &parsed.resolved,
    )?;

    println!(
        "mission complete: {}/{} targets, ttfd {}, {} detections, coverage {:.3}, flight {:.1} s{}",
        output.metrics.targets_detected,
        output.metrics.targets_total,
        format_ttfd(output.metrics.time_to_first_detection),
        output.metrics.detections_emitted,
        output.metrics.coverage_fraction,
        output.metrics.flight_time,
        if output.metrics.crashed {
            " (CRASHED)"
        } else {
            ""
        },
    );
    println!("outputs in {}", out_dir.display());
    Ok(output.metrics)
}

/// Run the identical mission once per profile; write per-profile outputs
/// plus `comparison.csv` mirroring the preset table with mission columns.
pub fn cmd_compare(
    config_path: &Path,
    profile_names: &str,
    out_dir: &Path,
) -> Result<Vec<(String, MissionMetrics)>, CliError> {
    let parsed = load(config_path, &[])?;
    let profiles: Vec<DetectorProfile> = profile_names
        .split(',')
        .map(|name| {
            let name = name.trim();
            DetectorProfile::by_name(name).ok_or_else(|| {
                CliError::Config(ConfigError {
                    line: None,
                    key: Some("--profiles".to_string()),
                    message: format!("unknown profile {name:?}; shipped profiles: ssd, haar, hog"),
                })
            })
        })
        .collect::<Result<_, _>>()?;

    let results = compare_profiles(&parsed.mission, &profiles)?;

    let mut table =
        String::from("method,fps,sec_per_image,targets_detected,time_to_first_detection\n");
    let mut summary = Vec::new();
    for (profile, output) in &results {
        let mut cfg = parsed.mission.clone();
        cfg.detector = profile.clone();
        let mut writer = RunWriter::create(&out_dir.join(&profile.name))?;
        write_mission_output(&mut writer, output)?;
        writer.seal("compare", config_path, cfg.seed, &resolved_map(&cfg))?;

        let _ = writeln!(
            table,
            "{},{:.3},{},{},{}",
            profile.name,
            throughput(profile),
            profile.seconds_per_image,
            output.metrics.targets_detected,
            format_ttfd(output.metrics.time_to_first_detection),
        );
        summary.push((profile.name.clone(), output.metrics.clone()));
    }

    let mut root = RunWriter::create(out_dir)?;
    root.write("comparison.csv", &table)?;
    root.seal(
        "compare",
        config_path,
        parsed.mission.seed,
        &parsed.resolved,
    )?;

    print!("{table}");
    println!("outputs in {}", out_dir.display());
    Ok(summary)
}

/// Run one independent mission per value of `param`, in parallel, and write
/// per-value outputs plus an aggregated `sweep.csv`.
pub fn cmd_sweep(
    config_path: &Path,
    param: &str,
    values: &str,
    out_dir: &Path,
) -> Result<(), CliError> {
    let text = read_config_text(config_path)?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if values.is_empty() || values.iter().any(String::is_empty) {
        return Err(CliError::Config(ConfigError {
            line: None,
            key: Some("--values".to_string()),
            message: "expected a comma-separated list of values".to_string(),
        }));
    }

    std::fs::create_dir_all(out_dir)?;
    let runs: Vec<(String, PathBuf, MissionMetrics, (f64, f64))> = values
        .par_iter()
        .enumerate()
        .map(|(idx, value)| -> Result<_, CliError> {
            let parsed = parse_config_with_overrides(&text, &[(param.to_string(), value.clone())])?;
            let output = run_mission(&parsed.mission)?;
            let dirname = format!("{idx:02}_{}", value.replace('/', "_"));
            let run_dir = out_dir.join(&dirname);
            let mut writer = RunWriter::create(&run_dir)?;
            write_mission_output(&mut writer, &output)?;
            writer.seal("sweep", config_path, parsed.mission.seed, &parsed.resolved)?;
            let rms = estimation_rms(&output.telemetry);
            Ok((value.clone(), run_dir, output.metrics, rms))
        })
        .collect::<Result<_, _>>()?;

    let mut csv = String::from(
        "param,value,targets_detected,time_to_first_detection,detections_emitted,\
         coverage_fraction,flight_time,mean_confidence,rms_est_roll_err,rms_est_pitch_err\n",
    );
    for (value, _, m, (rms_roll, rms_pitch)) in &runs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            param,
            value,
            m.targets_detected,
            m.time_to_first_detection
                .map(|t| t.to_string())
                .unwrap_or_else(|| "none".into()),
            m.detections_emitted,
            m.coverage_fraction,
            m.flight_time,
            m.mean_confidence,
            rms_roll,
            rms_pitch
        );
    }
    let mut root = RunWriter::create(out_dir)?;
    root.write("sweep.csv", &csv)?;
    // The root manifest records the swept key; per-run seeds live in the
    // per-run manifests.
    let mut resolved = std::collections::BTreeMap::new();
    resolved.insert("sweep.param".to_string(), param.to_string());
    resolved.insert("sweep.values".to_string(), values.join(","));
    root.seal("sweep", config_path, 0, &resolved)?;

    print!("{csv}");
    println!("outputs in {}", out_dir.display());
    Ok(())
}
