use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use immerflow_core::dataflow::{ExecContext, ExecutionReport, ParamMap, Registry};
use immerflow_core::grammar::{parse_spec, serialize_spec, VisSpec};
use immerflow_core::hub::{DeviceHub, HubError, SpatialAnchor};
use immerflow_core::nodes::builtin_registry;
use immerflow_core::sensor::{DataQueue, SensorFrame, SensorKind};
use immerflow_core::store::{BlobStore, DataStore};
use immerflow_core::transform::{RigidTransform, Vec3};
use immerflow_core::value::DataValue;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::remote::RemoteClient;
use crate::sessions::{Credentials, SessionTable, Task, TaskKind};
use crate::streams::{Ingested, StreamHub};
use crate::workspaces::WorkspaceStore;

/// Protocol-level happenings, in the order they occur.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ServerEvent {
    CredentialsIssued { device_key: String },
    Connected { device_key: String },
    SchedulerCreated { device_key: String },
    Enqueued { device_key: String, task_id: String, kind: TaskKind },
    Polled { device_key: String, task_id: Option<String> },
    StreamOpened { device_key: String, kinds: Vec<SensorKind> },
    StreamClosed { device_key: String, kinds: Vec<SensorKind> },
    FrameRejected { reason: String },
    Disconnected { device_key: String },
    Stale { device_key: String },
}

pub type Observer = Arc<dyn Fn(&ServerEvent) + Send + Sync>;

pub struct GatewayState {
    pub data_root: PathBuf,
    pub registry: Arc<Registry>,
    pub sessions: SessionTable,
    pub streams: StreamHub,
    pub workspaces: WorkspaceStore,
    pub store: Arc<DataStore>,
    pub remote: Arc<RemoteClient>,
    observers: RwLock<Vec<Observer>>,
    /// workspace -> spec_id -> content hash of the published spec
    published: Mutex<BTreeMap<String, BTreeMap<String, String>>>,
    stream_addr: RwLock<Option<SocketAddr>>,
}

impl GatewayState {
    /// Stores live under `data_root`: `workspaces/` and `blobs/`.
    pub fn open(data_root: impl Into<PathBuf>, seed: Option<u64>) -> std::io::Result<Self> {
        let data_root = data_root.into();
        let registry = Arc::new(builtin_registry());
        let workspaces = WorkspaceStore::open(data_root.join("workspaces"), registry.clone())?;
        let store = DataStore::open(data_root.join("blobs"))
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(GatewayState {
            data_root,
            registry,
            sessions: SessionTable::new(seed),
            streams: StreamHub::default(),
            workspaces,
            store: Arc::new(store),
            remote: Arc::new(RemoteClient),
            observers: RwLock::new(Vec::new()),
            published: Mutex::new(BTreeMap::new()),
            stream_addr: RwLock::new(None),
        })
    }

    pub fn observe(&self, f: impl Fn(&ServerEvent) + Send + Sync + 'static) {
        self.observers.write().push(Arc::new(f));
    }

    fn emit(&self, e: ServerEvent) {
        for o in self.observers.read().iter() {
            o(&e);
        }
    }

    pub(crate) fn set_stream_addr(&self, addr: SocketAddr) {
        *self.stream_addr.write() = Some(addr);
    }

    pub fn stream_addr(&self) -> Option<SocketAddr> {
        *self.stream_addr.read()
    }

    pub fn request_connection(&self) -> Credentials {
        let c = self.sessions.request();
        self.emit(ServerEvent::CredentialsIssued {
            device_key: c.device_key.clone(),
        });
        c
    }

    fn connected(&self, key: &str) {
        self.emit(ServerEvent::Connected {
            device_key: key.to_string(),
        });
        self.emit(ServerEvent::SchedulerCreated {
            device_key: key.to_string(),
        });
        tracing::info!(device = key, "device connected");
    }

    pub fn connect_device(&self, username: &str, password: &str) -> Result<String, GatewayError> {
        let key = self.sessions.connect(username, password)?;
        self.connected(&key);
        Ok(key)
    }

    pub fn disconnect(&self, key: &str) -> Result<(), GatewayError> {
        self.sessions.disconnect(key)?;
        self.streams.close_all(key);
        self.emit(ServerEvent::Disconnected {
            device_key: key.to_string(),
        });
        Ok(())
    }

    pub fn poll(&self, key: &str) -> Result<Option<Task>, GatewayError> {
        let task = self.sessions.poll(key)?;
        self.emit(ServerEvent::Polled {
            device_key: key.to_string(),
            task_id: task.as_ref().map(|t| t.task_id.clone()),
        });
        Ok(task)
    }

    pub fn enqueue(&self, key: &str, kind: TaskKind, payload: String) -> Result<String, GatewayError> {
        let task_id = self.sessions.enqueue(key, kind, payload)?;
        self.emit(ServerEvent::Enqueued {
            device_key: key.to_string(),
            task_id: task_id.clone(),
            kind,
        });
        Ok(task_id)
    }

    /// Parses, then enqueues the canonical serialization.
    pub fn enqueue_spec_text(&self, key: &str, text: &str) -> Result<String, GatewayError> {
        if !self.sessions.is_live(key) {
            return Err(GatewayError::UnknownDevice(key.to_string()));
        }
        let spec = parse_spec(text).map_err(|e| GatewayError::MalformedSpec(e.to_string()))?;
        self.enqueue(key, TaskKind::RenderSpec, serialize_spec(&spec))
    }

    pub fn open_streams(&self, key: &str, kinds: &[SensorKind]) -> Result<(), GatewayError> {
        if !self.sessions.is_live(key) {
            return Err(GatewayError::UnknownDevice(key.to_string()));
        }
        self.streams.open(key, kinds)?;
        self.emit(ServerEvent::StreamOpened {
            device_key: key.to_string(),
            kinds: kinds.to_vec(),
        });
        Ok(())
    }

    pub fn close_streams(&self, key: &str, kinds: &[SensorKind]) {
        let closed = self.streams.close(key, kinds);
        if !closed.is_empty() {
            self.emit(ServerEvent::StreamClosed {
                device_key: key.to_string(),
                kinds: closed,
            });
        }
    }

    pub fn ingest(&self, raw: &[u8]) -> Ingested {
        let out = self.streams.ingest(raw);
        if let Ingested::Rejected(reason) = &out {
            tracing::debug!(reason = reason.as_str(), "frame rejected");
            self.emit(ServerEvent::FrameRejected {
                reason: reason.clone(),
            });
        }
        out
    }

    pub fn report_stale(&self, after: std::time::Duration) {
        for key in self.sessions.newly_stale(after) {
            tracing::warn!(device = key.as_str(), "device stopped polling; queue kept");
            self.emit(ServerEvent::Stale { device_key: key });
        }
    }

    pub fn published(&self, workspace: &str) -> BTreeMap<String, String> {
        self.published.lock().get(workspace).cloned().unwrap_or_default()
    }

    pub fn exec_context(self: &Arc<Self>, workspace: &str) -> ExecContext {
        ExecContext {
            data_root: self.data_root.clone(),
            store: self.store.clone(),
            hub: Some(self.clone()),
            remote: Some(self.remote.clone()),
            workspace: workspace.to_string(),
        }
    }

    /// Runs every dirty node of a workspace. Blocking.
    pub fn execute_workspace(self: &Arc<Self>, code: &str) -> Result<ExecutionReport, GatewayError> {
        let wf = self.workspaces.workflow(code)?;
        let mut wf = wf.lock().unwrap_or_else(|p| p.into_inner());
        Ok(wf.execute(&self.exec_context(code)))
    }

    /// Applies a param patch (or just invalidates when empty) and executes.
    /// Blocking; executions of one workspace are serialized.
    pub fn execute_node(
        self: &Arc<Self>,
        code: &str,
        node: &str,
        patch: ParamMap,
    ) -> Result<ExecutionReport, GatewayError> {
        let wf = self.workspaces.workflow(code)?;
        let mut wf = wf.lock().unwrap_or_else(|p| p.into_inner());
        if patch.is_empty() {
            wf.invalidate(node)?;
        } else {
            wf.set_params(node, patch)?;
        }
        Ok(wf.execute(&self.exec_context(code)))
    }
}

fn hub_err(e: GatewayError) -> HubError {
    match e {
        GatewayError::UnknownDevice(k) => HubError::UnknownDevice(k),
        GatewayError::BadCredentials => HubError::BadCredentials,
        other => HubError::Other(other.to_string()),
    }
}

impl DeviceHub for GatewayState {
    fn attach_device(&self, username: &str, password: &str) -> Result<String, HubError> {
        let (key, fresh) = self.sessions.attach(username, password).map_err(hub_err)?;
        if fresh {
            self.connected(&key);
        }
        Ok(key)
    }

    fn subscribe(
        &self,
        subscription: &str,
        device_key: &str,
        kind: SensorKind,
        capacity: usize,
    ) -> Result<Arc<DataQueue>, HubError> {
        if !self.sessions.is_live(device_key) {
            return Err(HubError::UnknownDevice(device_key.to_string()));
        }
        Ok(self.streams.subscribe(subscription, device_key, kind, capacity))
    }

    fn recent_frames(&self, device_key: &str, kind: SensorKind) -> Result<Vec<SensorFrame>, HubError> {
        if !self.sessions.is_live(device_key) {
            return Err(HubError::UnknownDevice(device_key.to_string()));
        }
        self.streams
            .recent_frames(device_key, kind)
            .ok_or_else(|| HubError::StreamClosed {
                device_key: device_key.to_string(),
                kind,
            })
    }

    fn marker_pose(&self, device_key: &str, marker: &str) -> Result<RigidTransform, HubError> {
        self.sessions
            .marker(device_key, marker)
            .map_err(hub_err)?
            .ok_or_else(|| HubError::UnknownMarker(marker.to_string()))
    }

    fn create_anchor(&self, workspace: &str, position: Vec3) -> Result<SpatialAnchor, HubError> {
        self.workspaces.create_anchor(workspace, position).map_err(hub_err)
    }

    fn enqueue_render(&self, device_key: &str, spec: &VisSpec) -> Result<String, HubError> {
        self.enqueue(device_key, TaskKind::RenderSpec, serialize_spec(spec))
            .map_err(hub_err)
    }

    fn publish_web(&self, workspace: &str, spec: &VisSpec) -> Result<String, HubError> {
        let hash = self
            .store
            .put(&DataValue::spec(spec.clone()))
            .map_err(|e| HubError::Other(e.to_string()))?;
        self.published
            .lock()
            .entry(workspace.to_string())
            .or_default()
            .insert(spec.spec_id.clone(), hash.clone());
        Ok(format!("/api/data/{hash}"))
    }
}
