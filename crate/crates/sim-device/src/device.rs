//! The simulated device: handshake, poll cycles, script actions and sensor
//! streaming.
//!
//! A device advances in poll cycles of `poll_interval_ms`. One cycle runs
//! the script actions due at the current clock, streams the frames falling
//! in `[clock, clock + dt)`, then advances the clock and drains the task
//! queue with consecutive polls. `run_lockstep` steps several devices in a
//! fixed order without sleeping; `run_device` paces one device in real time.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use immerflow_core::sensor::{encode_frame, encode_frame_payload, SensorFrame, SensorKind};
use immerflow_core::transform::{RigidTransform, Vec3};
use serde::{Deserialize, Serialize};

use crate::client::{Credentials, GatewayClient, PollResult};
use crate::error::SimError;
use crate::log::{Event, EventLog};
use crate::scenario::{Action, Scenario};
use crate::scene::{SimScene, Task};
use crate::track::{emit_tracking, hand_frame, PoseTrack};

/// Upper bound on polls per cycle while draining the queue.
const MAX_DRAIN: usize = 256;
/// How long a pinch is held for an air tap, at least.
const TAP_HOLD_S: f64 = 0.05;
const EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DeviceOptions {
    /// Name used in log records.
    pub label: String,
    pub server: String,
    /// Overrides the scenario's workspace for `refresh_node`.
    pub workspace: Option<String>,
    /// Connect with its own credentials instead of waiting for a connector
    /// node to use them.
    pub self_connect: bool,
    /// Keep polling at least this long even when the script is done.
    pub min_duration_s: f64,
    /// Encoded payloads remembered per sensor kind.
    pub retain_payloads: usize,
    pub log_path: Option<PathBuf>,
}

impl DeviceOptions {
    pub fn new(label: &str, server: &str) -> Self {
        DeviceOptions {
            label: label.to_string(),
            server: server.to_string(),
            workspace: None,
            self_connect: false,
            min_duration_s: 0.0,
            retain_payloads: 1024,
            log_path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub cycle: u64,
}

struct Source {
    kind: SensorKind,
    rate: f64,
    next_n: u64,
    sent: u64,
    failed: bool,
}

struct Link {
    sock: TcpStream,
    sources: Vec<Source>,
}

pub struct SimDevice {
    label: String,
    client: GatewayClient,
    scenario: Scenario,
    workspace: Option<String>,
    self_connect: bool,
    min_duration_s: f64,
    retain: usize,
    log: EventLog,
    scene: SimScene,
    creds: Option<Credentials>,
    live: bool,
    cycle: u64,
    cursor: usize,
    wait_until: Option<f64>,
    /// `[start, end)` of the current pinch and where it happens.
    pinch: Option<(f64, f64, Vec3)>,
    link: Option<Link>,
    payloads: BTreeMap<SensorKind, VecDeque<Vec<u8>>>,
    expectations: Vec<ExpectationResult>,
    errors: Vec<String>,
    finished: bool,
}

impl SimDevice {
    pub fn new(opts: DeviceOptions, scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let log = match &opts.log_path {
            Some(p) => EventLog::with_file(&opts.label, p)?,
            None => EventLog::new(&opts.label),
        };
        let mut scene = SimScene::new();
        scene.actors = scenario.tracks.clone();
        Ok(SimDevice {
            label: opts.label,
            client: GatewayClient::new(&opts.server),
            workspace: opts.workspace.or_else(|| scenario.workspace.clone()),
            scenario,
            self_connect: opts.self_connect,
            min_duration_s: opts.min_duration_s,
            retain: opts.retain_payloads,
            log,
            scene,
            creds: None,
            live: false,
            cycle: 0,
            cursor: 0,
            wait_until: None,
            pinch: None,
            link: None,
            payloads: BTreeMap::new(),
            expectations: Vec::new(),
            errors: Vec::new(),
            finished: false,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn scene(&self) -> &SimScene {
        &self.scene
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn credentials(&self) -> Option<&Credentials> {
        self.creds.as_ref()
    }

    pub fn device_key(&self) -> Option<&str> {
        self.creds.as_ref().map(|c| c.device_key.as_str())
    }

    pub fn is_live(&self) -> bool {
        self.live
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn poll_interval_ms(&self) -> u64 {
        self.scenario.poll_interval_ms
    }

    pub fn clock(&self) -> f64 {
        (self.cycle * self.scenario.poll_interval_ms) as f64 / 1000.0
    }

    pub fn expectations(&self) -> &[ExpectationResult] {
        &self.expectations
    }

    /// Non-fatal failures: tasks that could not be applied, refreshes the
    /// gateway refused, tracks that ran out.
    pub fn errors(&self) -> &[String] {
        &self.errors
    }

    /// Encoded payloads of the most recent frames sent for `kind`.
    pub fn sent_payloads(&self, kind: SensorKind) -> Vec<Vec<u8>> {
        self.payloads
            .get(&kind)
            .map(|q| q.iter().cloned().collect())
            .unwrap_or_default()
    }

    fn error(&mut self, e: impl ToString) {
        let error = e.to_string();
        tracing::warn!(device = self.label.as_str(), error = error.as_str());
        self.log.push(Event::Error { error: error.clone() });
        self.errors.push(error);
    }

    /// Requests credentials. With `self_connect`, also uses them.
    pub fn handshake(&mut self) -> Result<Credentials, SimError> {
        self.log.push(Event::RequestSent);
        let creds = self.client.request().map_err(|e| match e {
            SimError::ServerUnreachable(a) => SimError::ServerUnreachable(a),
            other => SimError::HandshakeFailed(other.to_string()),
        })?;
        self.log.push(Event::Credentials {
            username: creds.username.clone(),
            password: creds.password.clone(),
            device_key: creds.device_key.clone(),
        });
        tracing::info!(
            device = self.label.as_str(),
            username = creds.username.as_str(),
            password = creds.password.as_str(),
            "enter these credentials in an XR device connector node"
        );
        if self.self_connect {
            let key = self
                .client
                .connect(&creds.username, &creds.password)
                .map_err(|e| SimError::HandshakeFailed(e.to_string()))?;
            self.log.push(Event::Connected { device_key: key });
        }
        self.creds = Some(creds.clone());
        Ok(creds)
    }

    fn key(&self) -> Result<String, SimError> {
        self.device_key()
            .map(str::to_string)
            .ok_or_else(|| SimError::HandshakeFailed("no credentials requested".into()))
    }

    fn become_live(&mut self) -> Result<(), SimError> {
        self.live = true;
        let key = self.key()?;
        let markers: Vec<(String, RigidTransform)> =
            self.scenario.markers.iter().map(|(k, v)| (k.clone(), *v)).collect();
        for (id, pose) in markers {
            self.move_marker(&key, &id, pose)?;
        }
        let kinds = self.scenario.stream_kinds();
        if kinds.is_empty() {
            return Ok(());
        }
        let desc = match self.client.open_stream(&key, &kinds) {
            Ok(d) => d,
            Err(e @ SimError::ServerUnreachable(_)) => return Err(e),
            Err(e) => {
                self.error(format!("opening streams: {e}"));
                return Ok(());
            }
        };
        let sock = TcpStream::connect((desc.host.as_str(), desc.port))
            .map_err(|_| SimError::ServerUnreachable(format!("{}:{}", desc.host, desc.port)))?;
        let _ = sock.set_nodelay(true);
        let now = self.clock();
        let sources = kinds
            .iter()
            .map(|&kind| {
                let rate = self.rate(kind);
                Source {
                    kind,
                    rate,
                    next_n: (now * rate - EPS).ceil().max(0.0) as u64,
                    sent: 0,
                    failed: false,
                }
            })
            .collect();
        self.link = Some(Link { sock, sources });
        self.log.push(Event::StreamOpened { kinds });
        Ok(())
    }

    fn rate(&self, kind: SensorKind) -> f64 {
        match kind {
            SensorKind::DepthFrame => self.scenario.depth.as_ref().map_or(5.0, |d| d.rate_hz),
            k => self.scenario.tracks.get(&k).map_or(30.0, |t| t.rate_hz),
        }
    }

    fn move_marker(&mut self, key: &str, id: &str, pose: RigidTransform) -> Result<(), SimError> {
        match self.client.set_marker(key, id, &pose) {
            Ok(()) => {
                self.scene.markers.insert(id.to_string(), pose);
                self.log.push(Event::MarkerMoved {
                    marker_id: id.to_string(),
                    pose,
                });
                Ok(())
            }
            Err(e @ SimError::ServerUnreachable(_)) => Err(e),
            Err(e) => {
                self.error(format!("marker {id}: {e}"));
                Ok(())
            }
        }
    }

    /// Runs script steps due at the current clock. Returns once the script
    /// waits for time to pass or is done.
    pub fn run_actions(&mut self) -> Result<(), SimError> {
        if !self.live || self.finished {
            return Ok(());
        }
        let now = self.clock();
        if let Some(w) = self.wait_until {
            if now + EPS < w {
                return Ok(());
            }
            self.wait_until = None;
        }
        while let Some(step) = self.scenario.script.get(self.cursor).cloned() {
            if let Some(at) = step.at {
                if now + EPS < at {
                    self.wait_until = Some(at);
                    return Ok(());
                }
            }
            self.cursor += 1;
            match step.action {
                Action::AdvanceClock { seconds } => {
                    if seconds > 0.0 {
                        self.wait_until = Some(now + seconds);
                        return Ok(());
                    }
                }
                Action::AirTap { position } => {
                    let hold = TAP_HOLD_S.max(1.5 / self.rate(SensorKind::HandJoints));
                    self.pinch = Some((now, now + hold, position));
                    self.log.push(Event::AirTap { position });
                }
                Action::MoveMarker { marker_id, pose } => {
                    let key = self.key()?;
                    self.move_marker(&key, &marker_id, pose)?;
                }
                Action::ExpectSpec(exp) => {
                    let (passed, detail) = match exp.evaluate(&self.scene) {
                        Ok(found) => (true, format!("matched {found:?}")),
                        Err(why) => (false, why),
                    };
                    self.log.push(Event::Expectation {
                        name: exp.name.clone(),
                        passed,
                        detail: detail.clone(),
                    });
                    self.expectations.push(ExpectationResult {
                        name: exp.name,
                        passed,
                        detail,
                        cycle: self.cycle,
                    });
                }
                Action::ResolveAnchors => {
                    let code = self
                        .workspace
                        .clone()
                        .ok_or_else(|| SimError::InvalidScenario("resolve_anchors without a workspace".into()))?;
                    match self.client.anchors(&code) {
                        Ok(list) => {
                            let anchors: BTreeMap<String, Vec3> =
                                list.into_iter().map(|a| (a.anchor_id, a.position)).collect();
                            self.scene.anchors = anchors.clone();
                            self.log.push(Event::AnchorsResolved { anchors });
                        }
                        Err(e @ SimError::ServerUnreachable(_)) => return Err(e),
                        Err(e) => self.error(format!("anchors: {e}")),
                    }
                }
                Action::RefreshNode { node, params } => {
                    let code = self
                        .workspace
                        .clone()
                        .ok_or_else(|| SimError::InvalidScenario("refresh_node without a workspace".into()))?;
                    match self.client.execute_node(&code, &node, &params) {
                        Ok(report) => self.log.push(Event::NodeRefreshed {
                            node,
                            executed: report.executed,
                            errors: report
                                .errors
                                .iter()
                                .map(|f| format!("{}: {}", f.node, f.error))
                                .collect(),
                        }),
                        Err(e @ SimError::ServerUnreachable(_)) => return Err(e),
                        Err(e) => self.error(format!("refresh {node}: {e}")),
                    }
                }
            }
        }
        if self.clock() + EPS >= self.min_duration_s {
            self.finished = true;
        }
        Ok(())
    }

    fn frame(&self, kind: SensorKind, key: &str, t: f64) -> Result<SensorFrame, SimError> {
        match kind {
            SensorKind::HandJoints => {
                let wrist = match self.scenario.tracks.get(&kind) {
                    Some(track) => {
                        let (q, p) = track.sample(t)?;
                        RigidTransform::from_quaternion(q, p)
                    }
                    None => RigidTransform::identity(),
                };
                let pinch = self
                    .pinch
                    .filter(|(a, b, _)| t + EPS >= *a && t < *b)
                    .map(|(_, _, p)| p);
                Ok(hand_frame(key, t, &wrist, pinch))
            }
            SensorKind::DepthFrame => Ok(self
                .scenario
                .depth
                .as_ref()
                .expect("depth stream implies a depth source")
                .frame(key, t)),
            _ => {
                let track: &PoseTrack = self
                    .scenario
                    .tracks
                    .get(&kind)
                    .expect("pose stream implies a track");
                emit_tracking(track, key, kind, t)
            }
        }
    }

    /// Sends the frames of every open stream with timestamps in
    /// `[clock, clock + dt)`.
    pub fn stream_step(&mut self) -> Result<(), SimError> {
        let Some(mut link) = self.link.take() else {
            return Ok(());
        };
        let key = self.key()?;
        let next = ((self.cycle + 1) * self.scenario.poll_interval_ms) as f64 / 1000.0;
        let mut out = Vec::new();
        let mut result = Ok(());
        for src in link.sources.iter_mut().filter(|s| !s.failed) {
            let mut count = 0u64;
            let mut last = 0.0;
            while (src.next_n as f64) < next * src.rate - 1e-6 {
                let t = src.next_n as f64 / src.rate;
                let frame = match self.frame(src.kind, &key, t) {
                    Ok(f) => f,
                    Err(e) => {
                        src.failed = true;
                        let msg = format!("{} track: {e}", src.kind);
                        self.log.push(Event::Error { error: msg.clone() });
                        self.errors.push(msg);
                        break;
                    }
                };
                out.extend_from_slice(&encode_frame(&frame));
                if self.retain > 0 {
                    let q = self.payloads.entry(src.kind).or_default();
                    if q.len() == self.retain {
                        q.pop_front();
                    }
                    q.push_back(encode_frame_payload(&frame));
                }
                src.next_n += 1;
                src.sent += 1;
                count += 1;
                last = t;
            }
            if count > 0 {
                self.log.push(Event::FramesSent {
                    kind: src.kind,
                    count,
                    last_timestamp: last,
                });
            }
        }
        if !out.is_empty() {
            if let Err(e) = link.sock.write_all(&out).and_then(|_| link.sock.flush()) {
                result = Err(SimError::ServerUnreachable(format!("sensor link: {e}")));
            }
        }
        self.link = Some(link);
        result
    }

    /// Waits until the gateway has accounted for every frame sent.
    pub fn sync_streams(&self, timeout: Duration) -> Result<(), SimError> {
        let Some(link) = &self.link else {
            return Ok(());
        };
        let key = self.key()?;
        let deadline = Instant::now() + timeout;
        loop {
            let status = self.client.stream_status(&key)?;
            let done = link.sources.iter().all(|src| {
                status
                    .iter()
                    .find(|s| s.kind == src.kind)
                    .is_some_and(|s| s.frames + s.rejected >= src.sent)
            });
            if done {
                return Ok(());
            }
            if Instant::now() > deadline {
                return Err(SimError::Io("gateway did not ingest the sent frames in time".into()));
            }
            std::thread::sleep(Duration::from_millis(1));
        }
    }

    fn apply(&mut self, task: Task) {
        match self.scene.apply_task(&task) {
            Ok(effect) => {
                let world = match &effect {
                    crate::scene::Applied::Placed { spec_id, .. } => self.scene.world(spec_id).copied(),
                    _ => None,
                };
                self.log.push(Event::Applied {
                    task_id: task.task_id,
                    effect,
                    world,
                });
            }
            Err(e) => {
                let error = e.to_string();
                self.log.push(Event::TaskFailed {
                    task_id: task.task_id,
                    error: error.clone(),
                });
                self.errors.push(error);
            }
        }
    }

    /// Advances the clock one interval, then polls until the queue is empty.
    pub fn poll_cycle(&mut self) -> Result<(), SimError> {
        let Some(key) = self.device_key().map(str::to_string) else {
            return Err(SimError::HandshakeFailed("poll before handshake".into()));
        };
        self.cycle += 1;
        let now = self.clock();
        self.log.set_time(self.cycle, now);
        self.scene.set_clock(now);
        for _ in 0..MAX_DRAIN {
            match self.client.poll(&key)? {
                PollResult::UnknownDevice if self.live => {
                    return Err(SimError::HandshakeFailed(format!("session {key} is gone")));
                }
                PollResult::UnknownDevice => {
                    self.log.push(Event::AwaitingConnection);
                    return Ok(());
                }
                PollResult::Empty => {
                    self.log.push(Event::PollEmpty);
                    if !self.live {
                        self.become_live()?;
                    }
                    return Ok(());
                }
                PollResult::Task(task) => {
                    self.log.push(Event::Delivered {
                        task_id: task.task_id.clone(),
                        kind: task.kind,
                    });
                    if !self.live {
                        self.become_live()?;
                    }
                    self.apply(task);
                }
            }
        }
        Ok(())
    }

    /// Closes the sensor connection; the gateway then closes its streams.
    pub fn finish(&mut self) {
        if let Some(link) = self.link.take() {
            let _ = link.sock.shutdown(std::net::Shutdown::Both);
        }
        self.log.push(Event::Finished);
    }

    pub fn outcome(&self, result: Result<(), SimError>) -> DeviceOutcome {
        DeviceOutcome {
            label: self.label.clone(),
            device_key: self.device_key().map(str::to_string),
            log: self.log.clone(),
            scene: self.scene.clone(),
            expectations: self.expectations.clone(),
            errors: self.errors.clone(),
            result,
        }
    }
}

/// Everything a run leaves behind, including on failure.
#[derive(Clone)]
pub struct DeviceOutcome {
    pub label: String,
    pub device_key: Option<String>,
    pub log: EventLog,
    pub scene: SimScene,
    pub expectations: Vec<ExpectationResult>,
    pub errors: Vec<String>,
    pub result: Result<(), SimError>,
}

impl DeviceOutcome {
    pub fn first_failed_expectation(&self) -> Option<&ExpectationResult> {
        self.expectations.iter().find(|e| !e.passed)
    }
}

/// Steps devices in lockstep: every device acts, streams and polls once per
/// cycle, in slice order. Handshakes must already be done.
pub fn run_lockstep(devices: &mut [SimDevice], max_cycles: u64) -> Result<(), SimError> {
    if let Some(first) = devices.first() {
        let ms = first.poll_interval_ms();
        if devices.iter().any(|d| d.poll_interval_ms() != ms) {
            return Err(SimError::InvalidScenario(
                "devices in one run must share a poll interval".into(),
            ));
        }
    }
    let sync_timeout = Duration::from_secs(10);
    let mut cycles = 0;
    loop {
        for d in devices.iter_mut() {
            d.run_actions()?;
        }
        if devices.iter().all(SimDevice::is_finished) {
            break;
        }
        if cycles == max_cycles {
            let stuck: Vec<&str> = devices
                .iter()
                .filter(|d| !d.is_finished())
                .map(|d| d.label())
                .collect();
            return Err(SimError::InvalidScenario(format!(
                "devices {stuck:?} did not finish within {max_cycles} cycles"
            )));
        }
        for d in devices.iter_mut() {
            d.stream_step()?;
        }
        for d in devices.iter() {
            d.sync_streams(sync_timeout)?;
        }
        for d in devices.iter_mut() {
            d.poll_cycle()?;
        }
        cycles += 1;
    }
    for d in devices.iter_mut() {
        d.finish();
    }
    Ok(())
}

/// Runs one device against a live gateway, pacing cycles in real time.
/// Gives up with `HandshakeFailed` if nobody uses the credentials within
/// `connect_timeout`.
pub fn run_device(opts: DeviceOptions, scenario: Scenario, connect_timeout: Duration) -> DeviceOutcome {
    let mut dev = match SimDevice::new(opts.clone(), scenario) {
        Ok(d) => d,
        Err(e) => {
            let log = EventLog::new(&opts.label);
            log.push(Event::Error { error: e.to_string() });
            return DeviceOutcome {
                label: opts.label,
                device_key: None,
                log,
                scene: SimScene::new(),
                expectations: Vec::new(),
                errors: vec![e.to_string()],
                result: Err(e),
            };
        }
    };
    let result = pace(&mut dev, connect_timeout);
    if let Err(e) = &result {
        dev.log.push(Event::Error { error: e.to_string() });
    }
    dev.finish();
    dev.outcome(result)
}

fn pace(dev: &mut SimDevice, connect_timeout: Duration) -> Result<(), SimError> {
    dev.handshake()?;
    let dt = Duration::from_millis(dev.poll_interval_ms());
    let start = Instant::now();
    loop {
        dev.run_actions()?;
        if dev.is_finished() {
            return Ok(());
        }
        dev.stream_step()?;
        let due = start + dt * (dev.cycle() as u32 + 1);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
        dev.poll_cycle()?;
        if !dev.is_live() && start.elapsed() > connect_timeout {
            return Err(SimError::HandshakeFailed(format!(
                "credentials unused after {:.0} s",
                connect_timeout.as_secs_f64()
            )));
        }
    }
}
