//! Content-addressed payload storage. Specs reference their data by the
//! sha256 of its canonical bytes; devices fetch it separately.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::value::{DataKind, DataValue};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt payload {hash}: {reason}")]
    Corrupt { hash: String, reason: String },
    #[error("`{0}` is not a content hash")]
    BadHash(String),
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn is_content_hash(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

pub trait BlobStore: Send + Sync {
    /// Persist `value`, returning its content hash. Idempotent.
    fn put(&self, value: &DataValue) -> Result<String, StoreError>;
    fn get(&self, hash: &str) -> Result<Option<DataValue>, StoreError>;
}

#[derive(Default)]
pub struct MemoryStore {
    blobs: RwLock<HashMap<String, DataValue>>,
}

impl BlobStore for MemoryStore {
    fn put(&self, value: &DataValue) -> Result<String, StoreError> {
        let hash = content_hash(&value.to_bytes());
        self.blobs
            .write()
            .unwrap()
            .entry(hash.clone())
            .or_insert_with(|| value.clone());
        Ok(hash)
    }

    fn get(&self, hash: &str) -> Result<Option<DataValue>, StoreError> {
        Ok(self.blobs.read().unwrap().get(hash).cloned())
    }
}

/// Directory of `<hash>.json` files.
pub struct DataStore {
    dir: PathBuf,
}

impl DataStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(DataStore {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    /// Raw canonical bytes for `hash`, if stored.
    pub fn get_bytes(&self, hash: &str) -> Result<Option<Vec<u8>>, StoreError> {
        if !is_content_hash(hash) {
            return Err(StoreError::BadHash(hash.to_string()));
        }
        match fs::read(self.path(hash)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

impl BlobStore for DataStore {
    fn put(&self, value: &DataValue) -> Result<String, StoreError> {
        let bytes = value.to_bytes();
        let hash = content_hash(&bytes);
        let path = self.path(&hash);
        if !path.exists() {
            static SEQ: AtomicU64 = AtomicU64::new(0);
            let seq = SEQ.fetch_add(1, Ordering::Relaxed);
            let tmp = self.dir.join(format!("{hash}.{}.{seq}.tmp", std::process::id()));
            fs::File::create(&tmp)?.write_all(&bytes)?;
            fs::rename(&tmp, &path)?;
        }
        Ok(hash)
    }

    fn get(&self, hash: &str) -> Result<Option<DataValue>, StoreError> {
        let Some(bytes) = self.get_bytes(hash)? else {
            return Ok(None);
        };
        if content_hash(&bytes) != hash {
            return Err(StoreError::Corrupt {
                hash: hash.to_string(),
                reason: "hash mismatch".into(),
            });
        }
        DataValue::from_bytes(&bytes)
            .map(Some)
            .map_err(|e| StoreError::Corrupt {
                hash: hash.to_string(),
                reason: e.to_string(),
            })
    }
}

/// Header preceding a payload body on the data endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadHeader {
    pub kind: DataKind,
    pub bytes: usize,
}

/// `u32` little-endian header length, JSON header, then the canonical body.
pub fn encode_payload(value: &DataValue) -> Vec<u8> {
    let body = value.to_bytes();
    let header = serde_json::to_vec(&PayloadHeader {
        kind: value.kind(),
        bytes: body.len(),
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(4 + header.len() + body.len());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&body);
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum PayloadError {
    #[error("payload truncated")]
    Truncated,
    #[error("bad payload header: {0}")]
    Header(String),
    #[error("bad payload body: {0}")]
    Body(String),
}

pub fn decode_payload(bytes: &[u8]) -> Result<(PayloadHeader, DataValue), PayloadError> {
    let len_bytes: [u8; 4] = bytes
        .get(..4)
        .ok_or(PayloadError::Truncated)?
        .try_into()
        .unwrap();
    let hlen = u32::from_le_bytes(len_bytes) as usize;
    let header_bytes = bytes.get(4..4 + hlen).ok_or(PayloadError::Truncated)?;
    let header: PayloadHeader =
        serde_json::from_slice(header_bytes).map_err(|e| PayloadError::Header(e.to_string()))?;
    let body = bytes
        .get(4 + hlen..4 + hlen + header.bytes)
        .ok_or(PayloadError::Truncated)?;
    let value = DataValue::from_bytes(body).map_err(|e| PayloadError::Body(e.to_string()))?;
    if value.kind() != header.kind {
        return Err(PayloadError::Header(format!(
            "header says {}, body is {}",
            header.kind,
            value.kind()
        )));
    }
    Ok((header, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::PointCloud;

    #[test]
    fn equal_values_share_a_hash() {
        let dir = tempfile::tempdir().unwrap();
        let store = DataStore::open(dir.path()).unwrap();
        let a = DataValue::points(PointCloud::new(vec![[1.0, 2.0, 3.0]]));
        let h1 = store.put(&a).unwrap();
        let h2 = store.put(&a.clone()).unwrap();
        assert_eq!(h1, h2);
        assert!(is_content_hash(&h1));
        assert_eq!(store.get(&h1).unwrap(), Some(a));
        assert_eq!(store.get(&"0".repeat(64)).unwrap(), None);
    }

    #[test]
    fn payload_frame_round_trips() {
        let v = DataValue::Scalar(0.1 + 0.2);
        let (h, back) = decode_payload(&encode_payload(&v)).unwrap();
        assert_eq!(h.kind, DataKind::Scalar);
        assert_eq!(back, v);
        assert_eq!(decode_payload(&[1, 0]), Err(PayloadError::Truncated));
    }
}
