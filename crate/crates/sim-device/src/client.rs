//! Blocking REST client for the gateway.

use std::time::Duration;

use immerflow_core::dataflow::{ExecutionReport, ParamMap};
use immerflow_core::hub::SpatialAnchor;
use immerflow_core::sensor::SensorKind;
use immerflow_core::transform::RigidTransform;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::SimError;
use crate::scene::Task;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
    pub device_key: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamDescriptor {
    pub host: String,
    pub port: u16,
    pub kinds: Vec<SensorKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamStatus {
    pub kind: SensorKind,
    pub frames: u64,
    pub rejected: u64,
    pub last_timestamp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PollResult {
    Task(Task),
    Empty,
    /// The key is not (yet) a live session.
    UnknownDevice,
}

#[derive(Clone)]
pub struct GatewayClient {
    agent: ureq::Agent,
    base: String,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    message: String,
}

fn base_url(server: &str) -> String {
    let s = server.trim_end_matches('/');
    if s.starts_with("http://") || s.starts_with("https://") {
        s.to_string()
    } else {
        format!("http://{s}")
    }
}

impl GatewayClient {
    /// `server` is `host:port` or a base URL.
    pub fn new(server: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        GatewayClient {
            agent,
            base: base_url(server),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn transport(&self, e: ureq::Error) -> SimError {
        match e {
            ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::Timeout(_) => SimError::ServerUnreachable(self.base.clone()),
            other => SimError::Io(other.to_string()),
        }
    }

    fn finish<T: DeserializeOwned>(&self, resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<T, SimError> {
        let mut resp = resp.map_err(|e| self.transport(e))?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| self.transport(e))?;
        if (200..300).contains(&status) {
            serde_json::from_slice(&bytes).map_err(|e| SimError::Io(format!("bad response body: {e}")))
        } else {
            let body: Option<ErrorBody> = serde_json::from_slice(&bytes).ok();
            Err(SimError::Server {
                status,
                code: body.as_ref().map(|b| b.error.clone()).unwrap_or_default(),
                message: body
                    .map(|b| b.message)
                    .unwrap_or_else(|| String::from_utf8_lossy(&bytes).into_owned()),
            })
        }
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, SimError> {
        let r = self.agent.get(&format!("{}{path}", self.base)).call();
        self.finish(r)
    }

    fn post<T: DeserializeOwned>(&self, path: &str, body: &Value) -> Result<T, SimError> {
        let r = self.agent.post(&format!("{}{path}", self.base)).send_json(body);
        self.finish(r)
    }

    pub fn health(&self) -> Result<(), SimError> {
        self.get::<Value>("/api/health").map(|_| ())
    }

    pub fn request(&self) -> Result<Credentials, SimError> {
        self.post("/api/device/request", &json!({}))
    }

    pub fn connect(&self, username: &str, password: &str) -> Result<String, SimError> {
        let v: Value = self.post(
            "/api/device/connect",
            &json!({ "username": username, "password": password }),
        )?;
        v["device_key"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| SimError::Io("connect response without device_key".into()))
    }

    pub fn poll(&self, key: &str) -> Result<PollResult, SimError> {
        match self.get::<Value>(&format!("/api/device/{key}/poll")) {
            Ok(v) if v.get("status").and_then(Value::as_str) == Some("empty") => Ok(PollResult::Empty),
            Ok(v) => serde_json::from_value(v)
                .map(PollResult::Task)
                .map_err(|e| SimError::Io(format!("undecodable task: {e}"))),
            Err(SimError::Server { status: 404, .. }) => Ok(PollResult::UnknownDevice),
            Err(e) => Err(e),
        }
    }

    pub fn open_stream(&self, key: &str, kinds: &[SensorKind]) -> Result<StreamDescriptor, SimError> {
        self.post(&format!("/api/device/{key}/stream"), &json!({ "kinds": kinds }))
    }

    pub fn stream_status(&self, key: &str) -> Result<Vec<StreamStatus>, SimError> {
        self.get(&format!("/api/device/{key}/streams"))
    }

    pub fn set_marker(&self, key: &str, marker_id: &str, pose: &RigidTransform) -> Result<(), SimError> {
        self.post::<Value>(
            &format!("/api/device/{key}/marker"),
            &json!({ "marker_id": marker_id, "pose": pose }),
        )
        .map(|_| ())
    }

    pub fn disconnect(&self, key: &str) -> Result<(), SimError> {
        self.post::<Value>(&format!("/api/device/{key}/disconnect"), &json!({}))
            .map(|_| ())
    }

    pub fn load_workspace(&self, code: &str) -> Result<Value, SimError> {
        self.get(&format!("/api/workspace/{code}"))
    }

    /// Stores a serialized workspace document under `code`.
    pub fn save_workspace(&self, code: &str, document: &str) -> Result<Value, SimError> {
        let r = self
            .agent
            .post(&format!("{}/api/workspace/{code}/save", self.base))
            .content_type("application/json")
            .send(document);
        self.finish(r)
    }

    pub fn execute_workspace(&self, code: &str) -> Result<ExecutionReport, SimError> {
        self.post(&format!("/api/workspace/{code}/execute"), &json!({}))
    }

    pub fn execute_node(&self, code: &str, node: &str, params: &ParamMap) -> Result<ExecutionReport, SimError> {
        self.post(
            &format!("/api/workspace/{code}/node/{node}/execute"),
            &json!({ "params": params }),
        )
    }

    pub fn anchors(&self, code: &str) -> Result<Vec<SpatialAnchor>, SimError> {
        let meta = self.workspace_meta(code)?;
        serde_json::from_value(meta["anchors"].clone())
            .map_err(|e| SimError::Io(format!("bad anchor list: {e}")))
    }

    pub fn workspace_meta(&self, code: &str) -> Result<Value, SimError> {
        self.get(&format!("/api/workspace/{code}/meta"))
    }
}
