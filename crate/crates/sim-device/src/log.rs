//! JSON-lines event log.
//!
//! Records carry the device's cycle counter and clock, never wall time, so
//! a replay with the same seed produces the same bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use immerflow_core::sensor::SensorKind;
use immerflow_core::transform::{RigidTransform, Similarity, Vec3};
use serde::{Deserialize, Serialize};

use crate::scene::{Applied, TaskKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    RequestSent,
    Credentials {
        username: String,
        password: String,
        device_key: String,
    },
    Connected {
        device_key: String,
    },
    SchedulerCreated {
        device_key: String,
    },
    /// Poll answered "unknown device" while the credentials await use.
    AwaitingConnection,
    PollEmpty,
    Enqueued {
        task_id: String,
        kind: TaskKind,
    },
    Delivered {
        task_id: String,
        kind: TaskKind,
    },
    Applied {
        task_id: String,
        #[serde(flatten)]
        effect: Applied,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        world: Option<Similarity>,
    },
    TaskFailed {
        task_id: String,
        error: String,
    },
    StreamOpened {
        kinds: Vec<SensorKind>,
    },
    FramesSent {
        kind: SensorKind,
        count: u64,
        last_timestamp: f64,
    },
    MarkerMoved {
        marker_id: String,
        pose: RigidTransform,
    },
    AirTap {
        position: Vec3,
    },
    NodeRefreshed {
        node: String,
        executed: Vec<String>,
        errors: Vec<String>,
    },
    AnchorsResolved {
        anchors: BTreeMap<String, Vec3>,
    },
    Expectation {
        name: String,
        passed: bool,
        detail: String,
    },
    Error {
        error: String,
    },
    Finished,
}

impl Event {
    /// Position in the connection protocol, 1 through 7.
    pub fn protocol_step(&self) -> Option<u8> {
        Some(match self {
            Event::RequestSent => 1,
            Event::Credentials { .. } => 2,
            Event::Connected { .. } => 3,
            Event::SchedulerCreated { .. } => 4,
            Event::PollEmpty => 5,
            Event::Enqueued { .. } => 6,
            Event::Delivered { .. } => 7,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub device: String,
    pub cycle: u64,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u8>,
    #[serde(flatten)]
    pub event: Event,
}

struct Inner {
    device: String,
    cycle: u64,
    t: f64,
    records: Vec<LogRecord>,
    sink: Option<BufWriter<File>>,
}

/// Shared handle; clones append to the same log. Server-side observers hold
/// a clone so gateway events interleave with the device's own.
#[derive(Clone)]
pub struct EventLog {
    inner: Arc<Mutex<Inner>>,
}

impl EventLog {
    pub fn new(device: &str) -> Self {
        EventLog {
            inner: Arc::new(Mutex::new(Inner {
                device: device.to_string(),
                cycle: 0,
                t: 0.0,
                records: Vec::new(),
                sink: None,
            })),
        }
    }

    /// Also writes every record to `path` as it is appended, so a crash
    /// leaves the partial log on disk.
    pub fn with_file(device: &str, path: &Path) -> std::io::Result<Self> {
        let log = Self::new(device);
        log.lock().sink = Some(BufWriter::new(File::create(path)?));
        Ok(log)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn set_time(&self, cycle: u64, t: f64) {
        let mut g = self.lock();
        g.cycle = cycle;
        g.t = t;
    }

    pub fn push(&self, event: Event) {
        let mut g = self.lock();
        let rec = LogRecord {
            seq: g.records.len() as u64,
            device: g.device.clone(),
            cycle: g.cycle,
            t: g.t,
            step: event.protocol_step(),
            event,
        };
        if let Some(sink) = g.sink.as_mut() {
            let line = serde_json::to_string(&rec).expect("log records serialize");
            let _ = writeln!(sink, "{line}").and_then(|_| sink.flush());
        }
        g.records.push(rec);
    }

    pub fn records(&self) -> Vec<LogRecord> {
        self.lock().records.clone()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.lock().records.iter() {
            out.push_str(&serde_json::to_string(r).expect("log records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Protocol steps in log order, cut after the first delivery.
pub fn protocol_prefix(records: &[LogRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        if let Some(s) = r.step {
            out.push(s);
            if s == 7 {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_serialize_flat() {
        let log = EventLog::new("A");
        log.push(Event::RequestSent);
        log.set_time(3, 0.3);
        log.push(Event::Delivered {
            task_id: "t1".into(),
            kind: TaskKind::RenderSpec,
        });
        let text = log.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"seq":0,"device":"A","cycle":0,"t":0.0,"step":1,"event":"request_sent"}"#);
        assert_eq!(
            lines[1],
            r#"{"seq":1,"device":"A","cycle":3,"t":0.3,"step":7,"event":"delivered","task_id":"t1","kind":"RenderSpec"}"#
        );
        let back: LogRecord = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(back, log.records()[1]);
        assert_eq!(protocol_prefix(&log.records()), vec![1, 7]);
    }
}
