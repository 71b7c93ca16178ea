use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::registry::{ParamMap, Registry};
use super::workflow::Workflow;
use super::DataflowError;

pub const DOCUMENT_SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentNode {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub params: ParamMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentEdge {
    pub src: String,
    pub src_port: String,
    pub dst: String,
    pub dst_port: String,
}

/// Persisted form of a workflow. Caches are not stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceDocument {
    pub schema_version: u64,
    pub access_code: String,
    /// Edit counter of the workflow when saved.
    #[serde(default)]
    pub version: u64,
    pub nodes: Vec<DocumentNode>,
    pub edges: Vec<DocumentEdge>,
    /// Editor-only data such as canvas positions; ignored by the engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<serde_json::Value>,
}

impl WorkspaceDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DataflowError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DataflowError::MalformedDocument(e.to_string()))?;
        Self::from_value(raw)
    }

    pub fn from_value(raw: serde_json::Value) -> Result<Self, DataflowError> {
        match raw.get("schema_version").map(|v| v.as_u64()) {
            None => {
                return Err(DataflowError::MalformedDocument(
                    "missing field `schema_version`".into(),
                ))
            }
            Some(Some(DOCUMENT_SCHEMA_VERSION)) => {}
            Some(Some(v)) => return Err(DataflowError::SchemaVersionMismatch(v)),
            Some(None) => {
                return Err(DataflowError::MalformedDocument(
                    "schema_version must be an integer".into(),
                ))
            }
        }
        serde_json::from_value(raw).map_err(|e| DataflowError::MalformedDocument(e.to_string()))
    }
}

pub fn serialize_workspace(workflow: &Workflow, access_code: &str) -> WorkspaceDocument {
    let nodes = workflow
        .nodes()
        .into_iter()
        .map(|n| DocumentNode {
            id: n.id.clone(),
            kind: n.kind.clone(),
            params: n.params.clone(),
        })
        .collect();
    let edges = workflow
        .edges()
        .iter()
        .map(|e| DocumentEdge {
            src: e.src.clone(),
            src_port: e.src_port.clone(),
            dst: e.dst.clone(),
            dst_port: e.dst_port.clone(),
        })
        .collect();
    WorkspaceDocument {
        schema_version: DOCUMENT_SCHEMA_VERSION,
        access_code: access_code.to_string(),
        version: workflow.version(),
        nodes,
        edges,
        layout: None,
    }
}

/// Rebuilds the graph; every node loads dirty with an empty cache. Graph
/// violations (unknown kinds, bad edges) are reported as malformed.
pub fn deserialize_workspace(
    doc: &WorkspaceDocument,
    registry: Arc<Registry>,
) -> Result<Workflow, DataflowError> {
    if doc.schema_version != DOCUMENT_SCHEMA_VERSION {
        return Err(DataflowError::SchemaVersionMismatch(doc.schema_version));
    }
    let malformed = |e: DataflowError| match e {
        DataflowError::MalformedDocument(_) => e,
        other => DataflowError::MalformedDocument(other.to_string()),
    };
    let mut wf = Workflow::new(registry);
    for n in &doc.nodes {
        wf.insert_node(n.id.clone(), &n.kind, n.params.clone())
            .map_err(malformed)?;
    }
    for (i, e) in doc.edges.iter().enumerate() {
        wf.insert_edge(
            format!("e{}", i + 1),
            (&e.src, &e.src_port),
            (&e.dst, &e.dst_port),
        )
        .map_err(malformed)?;
    }
    wf.set_version(doc.version);
    Ok(wf)
}
