//! Scenario runs: an in-process gateway, simulated devices stepped in
//! lockstep, and a report of what every device ended up showing.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use immerflow_core::dataflow::{id_cmp, ExecutionReport, ParamValue, WorkspaceDocument};
use immerflow_core::grammar::{Link, Mark};
use immerflow_core::hub::SpatialAnchor;
use immerflow_core::transform::{Similarity, Vec3};
use immerflow_gateway::{start, GatewayConfig, RunningGateway, ServerEvent, TaskKind as ServerTaskKind};
use immerflow_sim::{
    DeviceOptions, Event, EventLog, ExpectationResult, GatewayClient, LogRecord, Scenario, SimDevice, SimError, SimScene,
    TaskKind,
};
use serde::Serialize;

use crate::demos::scenario_path;
use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub data_root: PathBuf,
    pub workspace: String,
    pub devices: usize,
    /// One per device, or one shared by all. Empty: the defaults stored
    /// under `scenarios/` in the data root, else idle devices.
    pub scenarios: Vec<PathBuf>,
    pub seed: u64,
    /// Overrides the scenarios' interval.
    pub poll_interval_ms: Option<u64>,
    pub max_cycles: u64,
    /// Per-device JSON-lines logs, `<label>.jsonl`.
    pub log_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(data_root: impl Into<PathBuf>, workspace: &str) -> Self {
        RunConfig {
            data_root: data_root.into(),
            workspace: workspace.to_string(),
            devices: 1,
            scenarios: Vec::new(),
            seed: 0,
            poll_interval_ms: None,
            max_cycles: 600,
            log_dir: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PlacedSummary {
    pub spec_id: String,
    pub mark: Mark,
    pub link: String,
    pub link_target: Option<String>,
    pub world: Similarity,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeviceReport {
    pub label: String,
    pub device_key: Option<String>,
    /// Connector node the device was attached through.
    pub connector: Option<String>,
    pub placed: Vec<PlacedSummary>,
    pub anchors: BTreeMap<String, Vec3>,
    pub expectations: Vec<ExpectationResult>,
    pub errors: Vec<String>,
    #[serde(skip)]
    pub scene: SimScene,
    #[serde(skip)]
    pub log: Vec<LogRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub workspace: String,
    pub seed: u64,
    pub initial: ExecutionReport,
    pub devices: Vec<DeviceReport>,
    #[serde(rename = "final")]
    pub final_run: ExecutionReport,
    /// Spatial anchors stored with the workspace at the end of the run.
    pub anchors: Vec<SpatialAnchor>,
    /// Everything that makes the run fail, first failure first.
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> u8 {
        u8::from(!self.passed())
    }

    pub fn device(&self, label: &str) -> Option<&DeviceReport> {
        self.devices.iter().find(|d| d.label == label)
    }

    /// Plain-text summary for terminals.
    pub fn render(&self) -> String {
        let mut out = format!("workspace {} (seed {})\n", self.workspace, self.seed);
        let run = |name: &str, r: &ExecutionReport| {
            let mut s = format!(
                "{name}: executed {}, skipped {}, blocked {}, errors {}\n",
                r.executed.len(),
                r.skipped.len(),
                r.blocked.len(),
                r.errors.len()
            );
            for e in &r.errors {
                s.push_str(&format!("  error {}: {}\n", e.node, e.error));
            }
            s
        };
        out.push_str(&run("initial", &self.initial));
        for d in &self.devices {
            out.push_str(&format!(
                "device {} via {}: {} spec(s) placed\n",
                d.label,
                d.connector.as_deref().unwrap_or("-"),
                d.placed.len()
            ));
            for p in &d.placed {
                let t = p.world.translation;
                out.push_str(&format!(
                    "  {:<16} {:<7} {:<11} at ({:.3}, {:.3}, {:.3})\n",
                    p.spec_id,
                    p.mark.as_str(),
                    match &p.link_target {
                        Some(target) => format!("{} {target}", p.link),
                        None => p.link.clone(),
                    },
                    t[0],
                    t[1],
                    t[2]
                ));
            }
            for (id, at) in &d.anchors {
                out.push_str(&format!("  anchor {id} at ({:.3}, {:.3}, {:.3})\n", at[0], at[1], at[2]));
            }
            for e in &d.expectations {
                out.push_str(&format!("  {} {}\n", if e.passed { "PASS" } else { "FAIL" }, e.name));
            }
        }
        out.push_str(&run("final", &self.final_run));
        match self.failures.first() {
            None => out.push_str("result: ok\n"),
            Some(f) => out.push_str(&format!("result: FAILED ({} problem(s)); first: {f}\n", self.failures.len())),
        }
        out
    }
}

fn label(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("D{}", i + 1)
    }
}

fn link_name(link: &Option<Link>) -> (String, Option<String>) {
    match link {
        None => ("none".into(), None),
        Some(Link::TargetLink { .. }) => ("TargetLink".into(), None),
        Some(Link::AxisLink { spec_id, .. }) => ("AxisLink".into(), Some(spec_id.clone())),
        Some(Link::ObjectLink { spec_id }) => ("ObjectLink".into(), Some(spec_id.clone())),
    }
}

/// Copies `src` into `dst`, skipping the content-addressed blob cache.
fn copy_tree(src: &Path, dst: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dst)?;
    for entry in fs::read_dir(src)? {
        let entry = entry?;
        let name = entry.file_name();
        if name == "blobs" {
            continue;
        }
        let target = dst.join(&name);
        if entry.file_type()?.is_dir() {
            copy_tree(&entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

/// Forwards the gateway's events about `key` into a device log, so one log
/// shows both sides of the handshake.
pub fn mirror(gw: &RunningGateway, key: String, log: EventLog) {
    gw.state.observe(move |e| match e {
        ServerEvent::Connected { device_key } if *device_key == key => log.push(Event::Connected {
            device_key: device_key.clone(),
        }),
        ServerEvent::SchedulerCreated { device_key } if *device_key == key => log.push(Event::SchedulerCreated {
            device_key: device_key.clone(),
        }),
        ServerEvent::Enqueued {
            device_key,
            task_id,
            kind,
        } if *device_key == key => log.push(Event::Enqueued {
            task_id: task_id.clone(),
            kind: match kind {
                ServerTaskKind::RenderSpec => TaskKind::RenderSpec,
                ServerTaskKind::ClearScene => TaskKind::ClearScene,
                ServerTaskKind::CaptureRequest => TaskKind::CaptureRequest,
            },
        }),
        _ => {}
    });
}

fn load_scenarios(cfg: &RunConfig, root: &Path) -> Result<Vec<Scenario>, CliError> {
    // The run's workspace is set before validation, so files may omit it.
    let load = |p: &Path| -> Result<Scenario, CliError> {
        let bad = |m: String| CliError::Config(format!("invalid scenario: {}: {m}", p.display()));
        let text = fs::read_to_string(p).map_err(|e| bad(e.to_string()))?;
        let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if let Some(obj) = v.as_object_mut() {
            obj.insert("workspace".into(), cfg.workspace.clone().into());
        }
        Scenario::from_json(&v.to_string()).map_err(|e| match e {
            SimError::InvalidScenario(m) => bad(m),
            other => bad(other.to_string()),
        })
    };
    let mut out = match cfg.scenarios.len() {
        0 => (0..cfg.devices)
            .map(|i| {
                let p = scenario_path(root, &cfg.workspace, i);
                if p.exists() {
                    load(&p)
                } else {
                    Ok(Scenario::idle())
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
        1 => {
            let s = load(&cfg.scenarios[0])?;
            vec![s; cfg.devices]
        }
        n if n == cfg.devices => cfg.scenarios.iter().map(|p| load(p)).collect::<Result<_, _>>()?,
        n => {
            return Err(CliError::Config(format!(
                "{n} scenario files for {} devices; give one per device or one for all",
                cfg.devices
            )))
        }
    };
    for s in &mut out {
        s.workspace = Some(cfg.workspace.clone());
        if let Some(ms) = cfg.poll_interval_ms {
            s.poll_interval_ms = ms;
        }
        if s.poll_interval_ms == 0 {
            return Err(CliError::Config("poll interval must be positive".into()));
        }
    }
    Ok(out)
}

/// Connector node ids of a stored workspace, in id order.
pub fn connectors(doc: &WorkspaceDocument) -> Vec<String> {
    let mut ids: Vec<String> = doc
        .nodes
        .iter()
        .filter(|n| n.kind == "XRDeviceConnector")
        .map(|n| n.id.clone())
        .collect();
    ids.sort_by(|a, b| id_cmp(a, b));
    ids
}

pub fn read_document(root: &Path, code: &str) -> Result<WorkspaceDocument, CliError> {
    let path = root.join("workspaces").join(format!("{code}.json"));
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("workspace `{code}` not found under {}: {e}", root.display())))?;
    WorkspaceDocument::from_json(&text).map_err(|e| CliError::Config(format!("workspace `{code}`: {e}")))
}

/// Runs `cfg.workspace` with simulated devices against a scratch copy of
/// the data root:
///
/// 1. every device requests credentials; device `i` is attached through
///    the `i`-th connector node (extra devices connect directly);
/// 2. the workspace is saved with those credentials and executed;
/// 3. devices run their scripts in lockstep until all are done;
/// 4. the workspace is executed once more, retrying nodes that failed.
///
/// The run fails on any failed expectation, device error or error left in
/// the final execution.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let doc = read_document(&cfg.data_root, &cfg.workspace)?;
    let scenarios = load_scenarios(cfg, &cfg.data_root)?;
    let connectors = connectors(&doc);
    if connectors.len() > cfg.devices {
        return Err(CliError::Config(format!(
            "workspace `{}` has {} device connectors but only {} device(s) were requested",
            cfg.workspace,
            connectors.len(),
            cfg.devices
        )));
    }

    let scratch = tempfile::tempdir().map_err(|e| CliError::Config(format!("scratch dir: {e}")))?;
    copy_tree(&cfg.data_root, scratch.path())
        .map_err(|e| CliError::Config(format!("copying {}: {e}", cfg.data_root.display())))?;
    if let Some(dir) = &cfg.log_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    }

    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| CliError::Config(format!("runtime: {e}")))?;
    let mut gw_cfg = GatewayConfig::new(scratch.path());
    gw_cfg.seed = Some(cfg.seed);
    let gw = rt.block_on(start(gw_cfg, SocketAddr::from(([127, 0, 0, 1], 0))))?;
    let result = drive(cfg, &gw, doc, scenarios, &connectors);
    rt.block_on(gw.shutdown());
    result
}

fn drive(
    cfg: &RunConfig,
    gw: &RunningGateway,
    mut doc: WorkspaceDocument,
    scenarios: Vec<Scenario>,
    connectors: &[String],
) -> Result<RunReport, CliError> {
    let client = GatewayClient::new(&gw.base_url());
    let mut devices = Vec::with_capacity(scenarios.len());
    for (i, sc) in scenarios.into_iter().enumerate() {
        let label = label(i);
        let mut opts = DeviceOptions::new(&label, &gw.base_url());
        opts.workspace = Some(cfg.workspace.clone());
        opts.log_path = cfg.log_dir.as_ref().map(|d| d.join(format!("{label}.jsonl")));
        let mut dev = SimDevice::new(opts, sc)?;
        let creds = dev.handshake()?;
        mirror(gw, creds.device_key.clone(), dev.log().clone());
        match connectors.get(i) {
            Some(node) => {
                let n = doc.nodes.iter_mut().find(|n| n.id == *node).expect("connector exists");
                n.params.insert("username".into(), ParamValue::Text(creds.username.clone()));
                n.params.insert("password".into(), ParamValue::Text(creds.password.clone()));
            }
            None => {
                client.connect(&creds.username, &creds.password)?;
            }
        }
        devices.push(dev);
    }

    let mut failures = Vec::new();
    save(&client, &doc)?;
    let initial = client.execute_workspace(&cfg.workspace)?;
    let lockstep = immerflow_sim::run_lockstep(&mut devices, cfg.max_cycles);
    if let Err(e) = &lockstep {
        failures.push(format!("run stopped: {e}"));
        for d in devices.iter_mut() {
            d.finish();
        }
    }
    let final_run = client.execute_workspace(&cfg.workspace)?;
    let anchors = client.anchors(&cfg.workspace)?;

    let reports: Vec<DeviceReport> = devices
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let scene = d.scene().clone();
            let placed = scene
                .placed
                .iter()
                .map(|(id, p)| {
                    let (link, link_target) = link_name(&p.spec.link);
                    PlacedSummary {
                        spec_id: id.clone(),
                        mark: p.spec.mark,
                        link,
                        link_target,
                        world: p.world,
                    }
                })
                .collect();
            DeviceReport {
                label: d.label().to_string(),
                device_key: d.device_key().map(str::to_string),
                connector: connectors.get(i).cloned(),
                placed,
                anchors: scene.anchors.clone(),
                expectations: d.expectations().to_vec(),
                errors: d.errors().to_vec(),
                scene,
                log: d.log().records(),
            }
        })
        .collect();
    for d in &reports {
        for e in d.expectations.iter().filter(|e| !e.passed) {
            failures.push(format!("expectation `{}` failed on device {}: {}", e.name, d.label, e.detail));
        }
    }
    for d in &reports {
        for e in &d.errors {
            failures.push(format!("device {}: {e}", d.label));
        }
    }
    for e in &final_run.errors {
        failures.push(format!("node {}: {}", e.node, e.error));
    }
    // An expectation failure is the most useful thing to name first.
    failures.sort_by_key(|f| !f.starts_with("expectation"));
    Ok(RunReport {
        workspace: cfg.workspace.clone(),
        seed: cfg.seed,
        initial,
        devices: reports,
        final_run,
        anchors,
        failures,
    })
}

fn save(client: &GatewayClient, doc: &WorkspaceDocument) -> Result<(), CliError> {
    client.save_workspace(&doc.access_code, &doc.to_json())?;
    Ok(())
}
