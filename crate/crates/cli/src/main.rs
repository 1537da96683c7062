use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use thermalize::experiments::{self, units, PlatformSpec, ScenarioConfig};
use thermalize::Error;

/// Thermalize small spin systems with swept, optically pumped ancilla spins.
#[derive(Parser)]
#[command(name = "thermalize", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in figure preset.
    Preset {
        /// fig2a, fig2b, fig3, fig5_beta1, fig5_beta5, fig6, fig1b or oracle1.
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Print the preset as TOML instead of running it.
        #[arg(long)]
        show: bool,
    },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
    /// Convert an inverse temperature (and optionally a run length) to lab units.
    Units {
        /// trapped_ions, superconducting or neutral_atoms.
        platform: String,
        beta: f64,
        /// Simulated duration in units of 1/J_max.
        #[arg(long)]
        duration: Option<f64>,
        /// Ratio g/J_max.
        #[arg(long, default_value_t = units::DEFAULT_G_RATIO)]
        g_ratio: f64,
    },
}

fn execute(cfg: &ScenarioConfig, out: &Path) -> thermalize::Result<serde_json::Value> {
    let mut result = experiments::run(cfg)?;
    let files = result.write(out)?;
    Ok(json!({
        "status": "ok",
        "name": result.report.name,
        "kind": result.report.kind,
        "trace_distance": result.report.trace_distance,
        "spectral_gap": result.report.spectral_gap,
        "warnings": result.report.warnings,
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "wall_time_seconds": result.report.wall_time_seconds,
    }))
}

fn dispatch(cmd: Command) -> thermalize::Result<serde_json::Value> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let dir =
                out.or_else(|| cfg.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
            execute(&cfg, &dir)
        }
        Command::Preset { name, out, show } => {
            let cfg = experiments::preset(&name)?;
            if show {
                print!("{}", cfg.to_toml());
                return Ok(serde_json::Value::Null);
            }
            execute(&cfg, &out)
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            Ok(json!({ "status": "ok", "valid": true, "name": cfg.label(), "kind": cfg.kind }))
        }
        Command::Units { platform, beta, duration, g_ratio } => {
            let p = PlatformSpec::by_name(&platform)?;
            let d = duration.unwrap_or(0.0);
            let u = experiments::platform_units(&p, beta, units::to_coupling_units(d, g_ratio), g_ratio)?;
            Ok(json!({
                "status": "ok",
                "platform": p.name,
                "j_max_hz": p.j_max_hz,
                "beta": beta,
                "temperature_kelvin": u.temperature_kelvin,
                "duration": duration,
                "wall_time_seconds": duration.map(|_| u.wall_time_seconds),
            }))
        }
    }
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "status": "error", "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(serde_json::Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON value serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidParameter { .. } => 2,
                _ => 1,
            })
        }
    }
}
