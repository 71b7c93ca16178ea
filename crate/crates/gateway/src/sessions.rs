//! Device credentialing and per-device task schedulers.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use immerflow_core::transform::RigidTransform;
use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

/// Queue length above which enqueues log a warning.
pub const QUEUE_HIGH_WATER: usize = 1024;

/// What a device receives from `request`. The device shows the username
/// and password to the user and polls with the key once connected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
    pub device_key: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    RenderSpec,
    ClearScene,
    CaptureRequest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub kind: TaskKind,
    /// Serialized spec for `RenderSpec`, capture params for `CaptureRequest`.
    pub payload: String,
}

struct Pending {
    password: String,
    device_key: String,
}

struct Session {
    username: String,
    password: String,
    queue: VecDeque<Task>,
    next_task: u64,
    last_poll: Instant,
    stale_reported: bool,
    markers: HashMap<String, RigidTransform>,
}

struct Inner {
    pending: HashMap<String, Pending>,
    live: HashMap<String, Session>,
    usernames: HashSet<String>,
    keys: HashSet<String>,
    rng: ChaCha20Rng,
}

/// All device sessions. Every operation takes one lock, so per-session
/// queue operations are linearizable.
pub struct SessionTable {
    inner: Mutex<Inner>,
}

fn token(rng: &mut ChaCha20Rng, bytes: usize) -> String {
    let raw: Vec<u8> = (0..bytes).map(|_| rng.gen()).collect();
    hex::encode(raw)
}

impl SessionTable {
    /// A seed makes minted credentials reproducible.
    pub fn new(seed: Option<u64>) -> Self {
        let rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        SessionTable {
            inner: Mutex::new(Inner {
                pending: HashMap::new(),
                live: HashMap::new(),
                usernames: HashSet::new(),
                keys: HashSet::new(),
                rng,
            }),
        }
    }

    pub fn request(&self) -> Credentials {
        let mut g = self.inner.lock();
        let inner = &mut *g;
        let username = loop {
            let u = format!("xr-{}", token(&mut inner.rng, 3));
            if inner.usernames.insert(u.clone()) {
                break u;
            }
        };
        let device_key = loop {
            let k = token(&mut inner.rng, 16);
            if inner.keys.insert(k.clone()) {
                break k;
            }
        };
        let password = token(&mut inner.rng, 4);
        inner.pending.insert(
            username.clone(),
            Pending {
                password: password.clone(),
                device_key: device_key.clone(),
            },
        );
        Credentials {
            username,
            password,
            device_key,
        }
    }

    pub fn connect(&self, username: &str, password: &str) -> Result<String, GatewayError> {
        let mut g = self.inner.lock();
        if let Some((key, s)) = g.live.iter().find(|(_, s)| s.username == username) {
            return if s.password == password {
                Err(GatewayError::AlreadyConnected(key.clone()))
            } else {
                Err(GatewayError::BadCredentials)
            };
        }
        match g.pending.get(username) {
            Some(p) if p.password == password => {}
            _ => return Err(GatewayError::BadCredentials),
        }
        let p = g.pending.remove(username).unwrap();
        g.live.insert(
            p.device_key.clone(),
            Session {
                username: username.to_string(),
                password: password.to_string(),
                queue: VecDeque::new(),
                next_task: 1,
                last_poll: Instant::now(),
                stale_reported: false,
                markers: HashMap::new(),
            },
        );
        Ok(p.device_key)
    }

    /// Like `connect`, but a session already live under these credentials
    /// is returned instead of refused. The bool is true on a new connection.
    pub fn attach(&self, username: &str, password: &str) -> Result<(String, bool), GatewayError> {
        match self.connect(username, password) {
            Ok(key) => Ok((key, true)),
            Err(GatewayError::AlreadyConnected(key)) => Ok((key, false)),
            Err(e) => Err(e),
        }
    }

    pub fn disconnect(&self, key: &str) -> Result<(), GatewayError> {
        self.inner
            .lock()
            .live
            .remove(key)
            .map(|_| ())
            .ok_or_else(|| GatewayError::UnknownDevice(key.to_string()))
    }

    pub fn is_live(&self, key: &str) -> bool {
        self.inner.lock().live.contains_key(key)
    }

    pub fn live_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.inner.lock().live.keys().cloned().collect();
        keys.sort();
        keys
    }

    /// Oldest queued task, if any.
    pub fn poll(&self, key: &str) -> Result<Option<Task>, GatewayError> {
        let mut g = self.inner.lock();
        let s = g
            .live
            .get_mut(key)
            .ok_or_else(|| GatewayError::UnknownDevice(key.to_string()))?;
        s.last_poll = Instant::now();
        s.stale_reported = false;
        Ok(s.queue.pop_front())
    }

    pub fn enqueue(&self, key: &str, kind: TaskKind, payload: String) -> Result<String, GatewayError> {
        let mut g = self.inner.lock();
        let s = g
            .live
            .get_mut(key)
            .ok_or_else(|| GatewayError::UnknownDevice(key.to_string()))?;
        let task_id = format!("t{}", s.next_task);
        s.next_task += 1;
        s.queue.push_back(Task {
            task_id: task_id.clone(),
            kind,
            payload,
        });
        if s.queue.len() == QUEUE_HIGH_WATER {
            tracing::warn!(device = key, len = s.queue.len(), "task queue above high-water mark");
        }
        Ok(task_id)
    }

    pub fn queue_len(&self, key: &str) -> Result<usize, GatewayError> {
        let g = self.inner.lock();
        g.live
            .get(key)
            .map(|s| s.queue.len())
            .ok_or_else(|| GatewayError::UnknownDevice(key.to_string()))
    }

    pub fn set_marker(&self, key: &str, marker: &str, pose: RigidTransform) -> Result<(), GatewayError> {
        let mut g = self.inner.lock();
        let s = g
            .live
            .get_mut(key)
            .ok_or_else(|| GatewayError::UnknownDevice(key.to_string()))?;
        s.markers.insert(marker.to_string(), pose);
        Ok(())
    }

    /// `Ok(None)` when the device is live but has not reported the marker.
    pub fn marker(&self, key: &str, marker: &str) -> Result<Option<RigidTransform>, GatewayError> {
        let g = self.inner.lock();
        let s = g
            .live
            .get(key)
            .ok_or_else(|| GatewayError::UnknownDevice(key.to_string()))?;
        Ok(s.markers.get(marker).copied())
    }

    /// Sessions that stopped polling for longer than `after`; each is
    /// reported once until it polls again. Their queues are kept.
    pub fn newly_stale(&self, after: Duration) -> Vec<String> {
        let mut g = self.inner.lock();
        let mut out = Vec::new();
        for (key, s) in g.live.iter_mut() {
            if !s.stale_reported && s.last_poll.elapsed() > after {
                s.stale_reported = true;
                out.push(key.clone());
            }
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handshake_is_two_phase() {
        let t = SessionTable::new(Some(1));
        let c = t.request();
        assert_eq!(c.device_key.len(), 32);
        assert!(c.device_key.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
        assert_eq!(t.poll(&c.device_key), Err(GatewayError::UnknownDevice(c.device_key.clone())));
        assert_eq!(t.connect(&c.username, "nope"), Err(GatewayError::BadCredentials));
        let key = t.connect(&c.username, &c.password).unwrap();
        assert_eq!(key, c.device_key);
        assert_eq!(t.poll(&key), Ok(None));
        assert_eq!(
            t.connect(&c.username, &c.password),
            Err(GatewayError::AlreadyConnected(key.clone()))
        );
        assert_eq!(t.attach(&c.username, &c.password), Ok((key, false)));
    }

    #[test]
    fn fifo_and_isolation() {
        let t = SessionTable::new(None);
        let a = t.request();
        let b = t.request();
        let ka = t.connect(&a.username, &a.password).unwrap();
        let kb = t.connect(&b.username, &b.password).unwrap();
        t.enqueue(&ka, TaskKind::RenderSpec, "A".into()).unwrap();
        t.enqueue(&ka, TaskKind::ClearScene, "B".into()).unwrap();
        assert_eq!(t.poll(&kb).unwrap(), None);
        assert_eq!(t.poll(&ka).unwrap().unwrap().payload, "A");
        assert_eq!(t.poll(&ka).unwrap().unwrap().payload, "B");
        assert_eq!(t.poll(&ka).unwrap(), None);
    }

    #[test]
    fn seeded_tables_mint_identical_credentials() {
        let a = SessionTable::new(Some(9));
        let b = SessionTable::new(Some(9));
        assert_eq!(a.request(), b.request());
    }
}
