//! Reactive workflow graphs: typed nodes and edges, dirty tracking, and
//! minimal re-execution in deterministic topological order.

mod document;
mod graph;
mod registry;
mod workflow;

pub use document::{
    deserialize_workspace, serialize_workspace, DocumentEdge, DocumentNode, WorkspaceDocument,
    DOCUMENT_SCHEMA_VERSION,
};
pub use graph::{closure, id_cmp, reaches};
pub use registry::{
    Category, EvalOutput, EvalRequest, Evaluator, NodeSpec, ParamMap, ParamSpec, ParamType,
    ParamValue, Params, PortSpec, Registry,
};
pub use workflow::{Edge, ExecutionReport, NodeFailure, NodeInstance, OutputSummary, Workflow};

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::grammar::{GrammarError, LinkError};
use crate::hub::{DeviceHub, HubError, RemoteError, RemoteFunctions};
use crate::kernels::KernelError;
use crate::nodes::LoadError;
use crate::store::{BlobStore, MemoryStore};
use crate::value::DataKind;

pub type NodeId = String;
pub type EdgeId = String;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataflowError {
    #[error("unknown node kind `{0}`")]
    UnknownNodeKind(String),
    #[error("invalid param `{param}`: {reason}")]
    InvalidParam { param: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("unknown edge `{0}`")]
    UnknownEdge(EdgeId),
    #[error("node `{node}` has no {direction} port `{port}`")]
    UnknownPort {
        node: NodeId,
        port: String,
        direction: &'static str,
    },
    #[error("cannot connect {from} output to {to} input")]
    TypeMismatch { from: DataKind, to: DataKind },
    #[error("edge would close a cycle")]
    CycleDetected,
    #[error("input `{port}` of `{node}` is already connected")]
    PortOccupied { node: NodeId, port: String },
    #[error("unsupported workspace schema version {0}")]
    SchemaVersionMismatch(u64),
    #[error("malformed workspace document: {0}")]
    MalformedDocument(String),
}

/// Errors raised by node evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodeError {
    #[error("input `{0}` is not connected")]
    MissingInput(String),
    #[error("input `{port}` expects {expected}, got {got}")]
    BadInput {
        port: String,
        expected: DataKind,
        got: DataKind,
    },
    #[error("param {0}")]
    Param(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Hub(#[from] HubError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{0}")]
    Failed(String),
}

/// What evaluators may touch besides their inputs.
#[derive(Clone)]
pub struct ExecContext {
    /// Root that relative input paths resolve against.
    pub data_root: PathBuf,
    pub store: Arc<dyn BlobStore>,
    pub hub: Option<Arc<dyn DeviceHub>>,
    pub remote: Option<Arc<dyn RemoteFunctions>>,
    /// Access code of the workspace being executed.
    pub workspace: String,
}

impl ExecContext {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        ExecContext {
            data_root: data_root.into(),
            store: Arc::new(MemoryStore::default()),
            hub: None,
            remote: None,
            workspace: String::new(),
        }
    }

    pub fn hub(&self) -> Result<&dyn DeviceHub, NodeError> {
        self.hub.as_deref().ok_or(NodeError::Hub(HubError::Unavailable))
    }
}

impl Default for ExecContext {
    fn default() -> Self {
        Self::new(".")
    }
}
