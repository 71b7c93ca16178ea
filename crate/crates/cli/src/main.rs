use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use immerflow_cli::demos::seed_demos;
use immerflow_cli::{run_scenario, CliError, RunConfig, RunReport};
use immerflow_gateway::{serve, GatewayConfig};
use immerflow_sim::GatewayClient;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "immerflow", version, about = "Dataflow gateway for immersive analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gateway until Ctrl-C.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "data")]
        data_root: PathBuf,
        /// JSON-lines file receiving one record per device poll.
        #[arg(long)]
        poll_log: Option<PathBuf>,
        /// Seed for credential minting.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory served at `/` (the web editor build).
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Port for sensor streams; 0 picks a free one.
        #[arg(long, default_value_t = 0)]
        stream_port: u16,
    },
    /// Execute a workspace once and print the execution report.
    Run {
        #[arg(long)]
        workspace: String,
        /// Run in-process with simulated devices instead of a live server.
        #[arg(long)]
        headless: bool,
        /// Gateway to talk to when not headless.
        #[arg(long, default_value = "127.0.0.1:8080")]
        server: String,
        #[arg(long, default_value = "data")]
        data_root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Install the demo1..demo4 workspaces and their data.
    SeedDemos {
        #[arg(long, default_value = "data")]
        data_root: PathBuf,
    },
    /// Run a workspace against simulated devices driven by scenario files.
    RunScenario {
        #[arg(long)]
        workspace: String,
        #[arg(long, default_value_t = 1)]
        devices: usize,
        /// One per device, or one shared by all.
        #[arg(long = "scenario", num_args = 1..)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Poll interval in ms, overriding the scenarios.
        #[arg(long)]
        poll_interval: Option<u64>,
        #[arg(long, default_value = "data")]
        data_root: PathBuf,
        /// Directory for per-device event logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn print_report(report: &RunReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
    } else {
        print!("{}", report.render());
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Serve {
            addr,
            data_root,
            poll_log,
            seed,
            static_dir,
            stream_port,
        } => {
            let mut config = GatewayConfig::new(data_root);
            config.poll_log = poll_log;
            config.seed = seed;
            config.static_dir = static_dir;
            config.stream_addr = SocketAddr::new(addr.ip(), stream_port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Config(format!("runtime: {e}")))?;
            rt.block_on(serve(config, addr, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
            Ok(0)
        }
        Command::Run {
            workspace,
            headless,
            server,
            data_root,
            seed,
            json,
        } => {
            if headless {
                let mut cfg = RunConfig::new(data_root, &workspace);
                cfg.seed = seed;
                let doc = immerflow_cli::harness::read_document(&cfg.data_root, &workspace)?;
                cfg.devices = immerflow_cli::harness::connectors(&doc).len();
                let report = run_scenario(&cfg)?;
                print_report(&report, json);
                Ok(report.exit_code())
            } else {
                let report = GatewayClient::new(&server).execute_workspace(&workspace)?;
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                Ok(u8::from(!report.errors.is_empty()))
            }
        }
        Command::SeedDemos { data_root } => {
            for code in seed_demos(&data_root)? {
                println!("seeded {code}");
            }
            Ok(0)
        }
        Command::RunScenario {
            workspace,
            devices,
            scenarios,
            seed,
            poll_interval,
            data_root,
            log_dir,
            json,
        } => {
            let mut cfg = RunConfig::new(data_root, &workspace);
            cfg.devices = devices;
            cfg.scenarios = scenarios;
            cfg.seed = seed;
            cfg.poll_interval_ms = poll_interval;
            cfg.log_dir = log_dir;
            let report = run_scenario(&cfg)?;
            print_report(&report, json);
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    // Reports go to stdout, so only the server logs there.
    if matches!(cli.command, Command::Serve { .. }) {
        tracing_subscriber::fmt().with_env_filter(filter).init();
    } else {
        tracing_subscriber::fmt()
            .with_env_filter(filter)
            .with_writer(std::io::stderr)
            .init();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
