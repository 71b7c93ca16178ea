//! Interfaces through which node evaluators reach devices and remote
//! functions. The gateway provides the live implementations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::VisSpec;
use crate::sensor::{DataQueue, SensorFrame, SensorKind};
use crate::transform::{RigidTransform, Vec3};
use crate::value::DataValue;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HubError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("bad credentials")]
    BadCredentials,
    #[error("unknown marker `{0}`")]
    UnknownMarker(String),
    #[error("{kind} stream of `{device_key}` is closed")]
    StreamClosed {
        device_key: String,
        kind: SensorKind,
    },
    #[error("no device hub in this context")]
    Unavailable,
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialAnchor {
    pub anchor_id: String,
    pub position: Vec3,
    /// Seconds since the Unix epoch.
    pub created_at: f64,
}

pub trait DeviceHub: Send + Sync {
    /// Key of the session holding these credentials, connecting it first if
    /// it is still pending.
    fn attach_device(&self, username: &str, password: &str) -> Result<String, HubError>;

    /// Returns the queue registered under `subscription`, creating it and
    /// feeding it from the device's `kind` stream on first use.
    fn subscribe(
        &self,
        subscription: &str,
        device_key: &str,
        kind: SensorKind,
        capacity: usize,
    ) -> Result<Arc<DataQueue>, HubError>;

    /// Recently received frames of one stream, oldest first.
    fn recent_frames(&self, device_key: &str, kind: SensorKind) -> Result<Vec<SensorFrame>, HubError>;

    fn marker_pose(&self, device_key: &str, marker: &str) -> Result<RigidTransform, HubError>;

    fn create_anchor(&self, workspace: &str, position: Vec3) -> Result<SpatialAnchor, HubError>;

    /// Appends a render task; returns its task id.
    fn enqueue_render(&self, device_key: &str, spec: &VisSpec) -> Result<String, HubError>;

    /// Makes a spec available to browser viewers; returns its URL path.
    fn publish_web(&self, workspace: &str, spec: &VisSpec) -> Result<String, HubError>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("endpoint `{0}` unreachable")]
    EndpointUnreachable(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("remote error: {0}")]
    RemoteError(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteFunction {
    pub name: String,
    pub source_text: String,
}

/// Client for custom-node endpoints.
pub trait RemoteFunctions: Send + Sync {
    fn list(&self, endpoint: &str) -> Result<Vec<RemoteFunction>, RemoteError>;

    fn call(
        &self,
        endpoint: &str,
        function: &str,
        params: &serde_json::Value,
        input: &DataValue,
    ) -> Result<DataValue, RemoteError>;
}

