//! Workspace documents on disk plus the live workflows built from them.
//!
//! Layout under the store directory: `<code>.json` holds the document
//! exactly as last saved, `<code>.anchors.json` the spatial anchors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use immerflow_core::dataflow::{deserialize_workspace, Registry, Workflow, WorkspaceDocument};
use immerflow_core::hub::SpatialAnchor;
use immerflow_core::transform::Vec3;
use parking_lot::Mutex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceMeta {
    pub access_code: String,
    pub version: u64,
    /// Seconds since the Unix epoch of the last save.
    pub updated_at: f64,
    pub anchors: Vec<SpatialAnchor>,
}

pub type SharedWorkflow = Arc<std::sync::Mutex<Workflow>>;

pub struct WorkspaceStore {
    dir: PathBuf,
    registry: Arc<Registry>,
    live: Mutex<HashMap<String, SharedWorkflow>>,
    /// Serializes anchor sidecar read-modify-write.
    anchors: Mutex<()>,
}

pub fn valid_code(code: &str) -> bool {
    !code.is_empty()
        && code.len() <= 64
        && code
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn now_secs() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Write-to-temp then rename, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    static SEQ: AtomicU64 = AtomicU64::new(0);
    let seq = SEQ.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("{}.{seq}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl WorkspaceStore {
    pub fn open(dir: impl Into<PathBuf>, registry: Arc<Registry>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(WorkspaceStore {
            dir,
            registry,
            live: Mutex::new(HashMap::new()),
            anchors: Mutex::new(()),
        })
    }

    fn doc_path(&self, code: &str) -> PathBuf {
        self.dir.join(format!("{code}.json"))
    }

    fn anchors_path(&self, code: &str) -> PathBuf {
        self.dir.join(format!("{code}.anchors.json"))
    }

    fn check_code(code: &str) -> Result<(), GatewayError> {
        if valid_code(code) {
            Ok(())
        } else {
            Err(GatewayError::BadRequest(format!("invalid access code `{code}`")))
        }
    }

    pub fn exists(&self, code: &str) -> bool {
        valid_code(code) && self.doc_path(code).exists()
    }

    pub fn list(&self) -> Vec<String> {
        let mut codes: Vec<String> = fs::read_dir(&self.dir)
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let code = name.strip_suffix(".json")?;
                (valid_code(code)).then(|| code.to_string())
            })
            .collect();
        codes.sort();
        codes
    }

    /// Stored bytes, exactly as saved.
    pub fn load(&self, code: &str) -> Result<Vec<u8>, GatewayError> {
        Self::check_code(code)?;
        match fs::read(self.doc_path(code)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(GatewayError::UnknownWorkspace(code.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn stored_document(&self, code: &str) -> Result<WorkspaceDocument, GatewayError> {
        let bytes = self.load(code)?;
        let text = String::from_utf8(bytes).map_err(|e| GatewayError::Internal(e.to_string()))?;
        WorkspaceDocument::from_json(&text).map_err(|e| GatewayError::Internal(e.to_string()))
    }

    /// The live workflow, built from the stored document on first use.
    pub fn workflow(&self, code: &str) -> Result<SharedWorkflow, GatewayError> {
        if let Some(w) = self.live.lock().get(code) {
            return Ok(w.clone());
        }
        let doc = self.stored_document(code)?;
        let wf = deserialize_workspace(&doc, self.registry.clone())?;
        let mut live = self.live.lock();
        Ok(live
            .entry(code.to_string())
            .or_insert_with(|| Arc::new(std::sync::Mutex::new(wf)))
            .clone())
    }

    /// Validates and stores `bytes`. A document older than the stored one is
    /// refused. The live workflow is rebuilt, so cached outputs are dropped.
    pub fn save(&self, code: &str, bytes: &[u8]) -> Result<WorkspaceMeta, GatewayError> {
        Self::check_code(code)?;
        let text = std::str::from_utf8(bytes).map_err(|e| GatewayError::InvalidDocument(e.to_string()))?;
        let doc = WorkspaceDocument::from_json(text)
            .map_err(|e| GatewayError::InvalidDocument(e.to_string()))?;
        if doc.access_code != code {
            return Err(GatewayError::InvalidDocument(format!(
                "document is for `{}`, saved as `{code}`",
                doc.access_code
            )));
        }
        let wf = deserialize_workspace(&doc, self.registry.clone())
            .map_err(|e| GatewayError::InvalidDocument(e.to_string()))?;

        // Hold the live slot's lock so saves and executions serialize.
        let slot = match self.workflow(code) {
            Ok(slot) => slot,
            // New or unreadable: start from an empty slot.
            Err(_) => self
                .live
                .lock()
                .entry(code.to_string())
                .or_insert_with(|| Arc::new(std::sync::Mutex::new(Workflow::new(self.registry.clone()))))
                .clone(),
        };
        let mut live = slot.lock().unwrap_or_else(|p| p.into_inner());
        match self.stored_document(code) {
            Ok(stored) if doc.version < stored.version => {
                return Err(GatewayError::ConflictingVersion {
                    stored: stored.version,
                    given: doc.version,
                })
            }
            Ok(_) | Err(GatewayError::UnknownWorkspace(_)) => {}
            Err(e) => return Err(e),
        }
        atomic_write(&self.doc_path(code), bytes)?;
        *live = wf;
        drop(live);
        self.meta(code)
    }

    /// Mints an unused access code holding an empty workflow.
    pub fn create(&self) -> Result<String, GatewayError> {
        let mut rng = rand::thread_rng();
        loop {
            let code: String = (0..6)
                .map(|_| char::from(b"abcdefghjkmnpqrstuvwxyz23456789"[rng.gen_range(0..31)]))
                .collect();
            if self.exists(&code) {
                continue;
            }
            let doc = WorkspaceDocument {
                schema_version: immerflow_core::dataflow::DOCUMENT_SCHEMA_VERSION,
                access_code: code.clone(),
                version: 0,
                nodes: vec![],
                edges: vec![],
                layout: None,
            };
            self.save(&code, doc.to_json().as_bytes())?;
            return Ok(code);
        }
    }

    pub fn meta(&self, code: &str) -> Result<WorkspaceMeta, GatewayError> {
        let doc = self.stored_document(code)?;
        let updated_at = fs::metadata(self.doc_path(code))?
            .modified()
            .ok()
            .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Ok(WorkspaceMeta {
            access_code: code.to_string(),
            version: doc.version,
            updated_at,
            anchors: self.anchors(code)?,
        })
    }

    pub fn anchors(&self, code: &str) -> Result<Vec<SpatialAnchor>, GatewayError> {
        Self::check_code(code)?;
        match fs::read(self.anchors_path(code)) {
            Ok(b) => serde_json::from_slice(&b).map_err(|e| GatewayError::Internal(e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(vec![]),
            Err(e) => Err(e.into()),
        }
    }

    pub fn create_anchor(&self, code: &str, position: Vec3) -> Result<SpatialAnchor, GatewayError> {
        if !self.exists(code) {
            return Err(GatewayError::UnknownWorkspace(code.to_string()));
        }
        let _guard = self.anchors.lock();
        let mut all = self.anchors(code)?;
        let anchor = SpatialAnchor {
            anchor_id: format!("anchor-{}", all.len() + 1),
            position,
            created_at: now_secs(),
        };
        all.push(anchor.clone());
        let bytes = serde_json::to_vec_pretty(&all).map_err(|e| GatewayError::Internal(e.to_string()))?;
        atomic_write(&self.anchors_path(code), &bytes)?;
        Ok(anchor)
    }
}
