use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use immerflow_sim::{run_device, DeviceOptions, Scenario, SimError};

/// Simulated XR device for a running gateway.
#[derive(Parser)]
#[command(name = "sim-device", version)]
struct Args {
    /// Gateway address, host:port or URL.
    #[arg(long)]
    server: String,
    /// Scenario JSON; without one the device just polls.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// JSON-lines event log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value = "device")]
    label: String,
    /// Workspace for refresh_node actions, overriding the scenario's.
    #[arg(long)]
    workspace: Option<String>,
    /// Use the issued credentials directly.
    #[arg(long)]
    self_connect: bool,
    /// Keep polling at least this many seconds.
    #[arg(long, default_value_t = 0.0)]
    duration: f64,
    #[arg(long, default_value_t = 120)]
    connect_timeout: u64,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();
    let scenario = match &args.scenario {
        Some(p) => match Scenario::load(p) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => Scenario::idle(),
    };
    let mut opts = DeviceOptions::new(&args.label, &args.server);
    opts.workspace = args.workspace;
    opts.self_connect = args.self_connect;
    opts.min_duration_s = args.duration;
    opts.log_path = args.log;
    let out = run_device(opts, scenario, Duration::from_secs(args.connect_timeout));
    for e in &out.expectations {
        println!("{} {}", if e.passed { "PASS" } else { "FAIL" }, e.name);
    }
    match (&out.result, out.first_failed_expectation()) {
        (Err(e @ SimError::InvalidScenario(_)), _) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        (Err(e), _) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        (Ok(()), Some(f)) => {
            eprintln!("expectation failed: {}: {}", f.name, f.detail);
            ExitCode::from(1)
        }
        (Ok(()), None) => ExitCode::SUCCESS,
    }
}
