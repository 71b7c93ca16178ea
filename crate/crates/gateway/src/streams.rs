//! Sensor stream state, ingestion checks and fan-out to data queues.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use immerflow_core::sensor::{decode_frame_payload, queue_columns, DataQueue, SensorFrame, SensorKind};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

/// Frames kept per pose or hand stream for sensor nodes.
pub const RECENT_TRACKING: usize = 1024;
/// Frames kept per image stream.
pub const RECENT_IMAGES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamStatus {
    pub kind: SensorKind,
    pub frames: u64,
    pub rejected: u64,
    pub last_timestamp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ingested {
    Accepted { device_key: String, kind: SensorKind },
    /// Undecodable, for a closed stream, or out of order.
    Rejected(String),
}

struct StreamState {
    frames: u64,
    rejected: u64,
    last_timestamp: Option<f64>,
    recent: VecDeque<(SensorFrame, Arc<[u8]>)>,
}

struct Subscription {
    device_key: String,
    kind: SensorKind,
    queue: Arc<DataQueue>,
}

#[derive(Default)]
struct Inner {
    open: HashMap<(String, SensorKind), StreamState>,
    subscriptions: HashMap<String, Subscription>,
    /// Frames that did not reach any open stream.
    stray: u64,
}

#[derive(Default)]
pub struct StreamHub {
    inner: Mutex<Inner>,
}

impl StreamHub {
    /// Opens every kind or none.
    pub fn open(&self, device_key: &str, kinds: &[SensorKind]) -> Result<(), GatewayError> {
        let mut g = self.inner.lock();
        for &kind in kinds {
            if g.open.contains_key(&(device_key.to_string(), kind)) {
                return Err(GatewayError::StreamAlreadyOpen {
                    device_key: device_key.to_string(),
                    kind,
                });
            }
        }
        for &kind in kinds {
            g.open.insert(
                (device_key.to_string(), kind),
                StreamState {
                    frames: 0,
                    rejected: 0,
                    last_timestamp: None,
                    recent: VecDeque::new(),
                },
            );
        }
        Ok(())
    }

    /// Removes stream state; data-queue subscriptions stay registered.
    pub fn close(&self, device_key: &str, kinds: &[SensorKind]) -> Vec<SensorKind> {
        let mut g = self.inner.lock();
        kinds
            .iter()
            .copied()
            .filter(|&k| g.open.remove(&(device_key.to_string(), k)).is_some())
            .collect()
    }

    pub fn close_all(&self, device_key: &str) {
        self.inner.lock().open.retain(|(k, _), _| k != device_key);
    }

    pub fn is_open(&self, device_key: &str, kind: SensorKind) -> bool {
        self.inner.lock().open.contains_key(&(device_key.to_string(), kind))
    }

    pub fn status(&self, device_key: &str) -> Vec<StreamStatus> {
        let g = self.inner.lock();
        let mut out: Vec<StreamStatus> = g
            .open
            .iter()
            .filter(|((k, _), _)| k == device_key)
            .map(|((_, kind), s)| StreamStatus {
                kind: *kind,
                frames: s.frames,
                rejected: s.rejected,
                last_timestamp: s.last_timestamp,
            })
            .collect();
        out.sort_by_key(|s| s.kind.as_str());
        out
    }

    pub fn stray_frames(&self) -> u64 {
        self.inner.lock().stray
    }

    /// Decodes one length-stripped frame and applies it. Timestamps must
    /// strictly increase per stream; late frames are dropped and counted.
    pub fn ingest(&self, raw: &[u8]) -> Ingested {
        let frame = match decode_frame_payload(raw) {
            Ok(f) => f,
            Err(e) => {
                self.inner.lock().stray += 1;
                return Ingested::Rejected(e.to_string());
            }
        };
        let mut g = self.inner.lock();
        let key = (frame.device_key.clone(), frame.kind);
        let Some(state) = g.open.get_mut(&key) else {
            g.stray += 1;
            return Ingested::Rejected(format!(
                "no open {} stream for `{}`",
                frame.kind, frame.device_key
            ));
        };
        if state.last_timestamp.is_some_and(|t| frame.timestamp <= t) {
            state.rejected += 1;
            return Ingested::Rejected(format!(
                "timestamp {} does not advance past {}",
                frame.timestamp,
                state.last_timestamp.unwrap()
            ));
        }
        state.last_timestamp = Some(frame.timestamp);
        state.frames += 1;
        let cap = match frame.kind {
            SensorKind::DepthFrame | SensorKind::ColorFrame => RECENT_IMAGES,
            _ => RECENT_TRACKING,
        };
        if state.recent.len() == cap {
            state.recent.pop_front();
        }
        let row = frame.to_row();
        let (device_key, kind) = (frame.device_key.clone(), frame.kind);
        state.recent.push_back((frame, Arc::from(raw)));
        // Queue pushes are short and never wait on readers for long.
        for sub in g.subscriptions.values() {
            if sub.device_key == device_key && sub.kind == kind {
                sub.queue.push(row.clone());
            }
        }
        Ingested::Accepted { device_key, kind }
    }

    /// Registered queue for `subscription`; replaced when the source or
    /// capacity changes.
    pub fn subscribe(
        &self,
        subscription: &str,
        device_key: &str,
        kind: SensorKind,
        capacity: usize,
    ) -> Arc<DataQueue> {
        let mut g = self.inner.lock();
        if let Some(s) = g.subscriptions.get(subscription) {
            if s.device_key == device_key && s.kind == kind && s.queue.capacity() == capacity.max(1) {
                return s.queue.clone();
            }
        }
        let queue = Arc::new(DataQueue::new(capacity, queue_columns(kind)));
        g.subscriptions.insert(
            subscription.to_string(),
            Subscription {
                device_key: device_key.to_string(),
                kind,
                queue: queue.clone(),
            },
        );
        queue
    }

    /// Retained frames of an open stream, oldest first.
    pub fn recent_frames(&self, device_key: &str, kind: SensorKind) -> Option<Vec<SensorFrame>> {
        let g = self.inner.lock();
        g.open
            .get(&(device_key.to_string(), kind))
            .map(|s| s.recent.iter().map(|(f, _)| f.clone()).collect())
    }

    /// Retained frames as received on the wire (length prefix stripped).
    pub fn recent_payloads(&self, device_key: &str, kind: SensorKind) -> Option<Vec<Arc<[u8]>>> {
        let g = self.inner.lock();
        g.open
            .get(&(device_key.to_string(), kind))
            .map(|s| s.recent.iter().map(|(_, b)| b.clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use immerflow_core::sensor::{encode_frame_payload, PoseSample};
    use immerflow_core::transform::RigidTransform;

    fn head(ts: f64) -> Vec<u8> {
        let pose = PoseSample::from_transform(&RigidTransform::from_translation([ts, 0.0, 0.0]));
        encode_frame_payload(&SensorFrame::pose("k", SensorKind::HeadPose, ts, pose))
    }

    #[test]
    fn out_of_order_frames_are_counted_and_dropped() {
        let hub = StreamHub::default();
        hub.open("k", &[SensorKind::HeadPose]).unwrap();
        let q = hub.subscribe("w/n1", "k", SensorKind::HeadPose, 4);
        assert!(matches!(hub.ingest(&head(1.0)), Ingested::Accepted { .. }));
        assert!(matches!(hub.ingest(&head(0.5)), Ingested::Rejected(_)));
        assert!(matches!(hub.ingest(&head(1.0)), Ingested::Rejected(_)));
        assert!(matches!(hub.ingest(&head(2.0)), Ingested::Accepted { .. }));
        let st = &hub.status("k")[0];
        assert_eq!((st.frames, st.rejected), (2, 2));
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn open_is_all_or_nothing_per_kind() {
        let hub = StreamHub::default();
        hub.open("k", &[SensorKind::HeadPose]).unwrap();
        let err = hub.open("k", &[SensorKind::EyeGaze, SensorKind::HeadPose]);
        assert!(matches!(err, Err(GatewayError::StreamAlreadyOpen { .. })));
        assert!(!hub.is_open("k", SensorKind::EyeGaze));
        assert_eq!(hub.close("k", &[SensorKind::HeadPose]), vec![SensorKind::HeadPose]);
        assert!(hub.status("k").is_empty());
    }

    #[test]
    fn frames_for_closed_streams_are_stray() {
        let hub = StreamHub::default();
        assert!(matches!(hub.ingest(&head(1.0)), Ingested::Rejected(_)));
        assert!(matches!(hub.ingest(b"garbage"), Ingested::Rejected(_)));
        assert_eq!(hub.stray_frames(), 2);
    }
}
