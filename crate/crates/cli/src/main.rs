use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sarquad_cli::commands::{cmd_compare, cmd_simulate, cmd_sweep};

/// Deterministic quadcopter search-and-rescue mission simulator.
#[derive(Parser)]
#[command(name = "sarquad", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission and write telemetry, detections, metrics and manifest.
    Simulate {
        /// Mission config file (key = value lines).
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $SAR_QUAD_OUT or ./sarquad-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the same mission under several detector profiles side by side.
    Compare {
        config: PathBuf,
        /// Comma-separated profile names.
        #[arg(long, default_value = "ssd,haar,hog")]
        profiles: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one config key over a list of values (missions run in parallel).
    Sweep {
        config: PathBuf,
        /// Config key to vary, e.g. filter.alpha.
        #[arg(long)]
        param: String,
        /// Comma-separated values for the key.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| {
        std::env::var_os("SAR_QUAD_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("sarquad-out"))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, seed, out } => {
            cmd_simulate(&config, seed, &output_dir(out)).map(|_| ())
        }
        Command::Compare {
            config,
            profiles,
            out,
        } => cmd_compare(&config, &profiles, &output_dir(out)).map(|_| ()),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => cmd_sweep(&config, &param, &values, &output_dir(out)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
