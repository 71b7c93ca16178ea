use std::collections::HashSet;
use std::io::Write;
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use immerflow_core::sensor::{encode_frame, PoseSample, SensorFrame, SensorKind};
use immerflow_core::transform::RigidTransform;
use immerflow_gateway::{start, Credentials, GatewayConfig, RunningGateway, ServeError};
use serde_json::{json, Value};

struct Http {
    agent: ureq::Agent,
    base: String,
}

impl Http {
    fn new(gw: &RunningGateway) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        Http {
            agent,
            base: gw.base_url(),
        }
    }

    fn get(&self, path: &str) -> (u16, Vec<u8>) {
        let mut r = self.agent.get(&format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_to_vec().unwrap())
    }

    fn get_json(&self, path: &str) -> (u16, Value) {
        let (s, b) = self.get(path);
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    fn post(&self, path: &str, body: &[u8]) -> (u16, Value) {
        let mut r = self
            .agent
            .post(&format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        let bytes = r.body_mut().read_to_vec().unwrap();
        (r.status().as_u16(), serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    fn post_json(&self, path: &str, body: Value) -> (u16, Value) {
        self.post(path, body.to_string().as_bytes())
    }

    fn connected(&self) -> String {
        let (_, c) = self.post_json("/api/device/request", json!({}));
        let c: Credentials = serde_json::from_value(c).unwrap();
        let (s, r) = self.post_json(
            "/api/device/connect",
            json!({"username": c.username, "password": c.password}),
        );
        assert_eq!(s, 200);
        r["device_key"].as_str().unwrap().to_string()
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap()
}

fn gateway(rt: &tokio::runtime::Runtime, root: &std::path::Path) -> RunningGateway {
    let mut cfg = GatewayConfig::new(root);
    cfg.static_dir = Some(root.join("www"));
    std::fs::create_dir_all(root.join("www")).unwrap();
    std::fs::write(root.join("www/index.html"), "<h1>editor</h1>").unwrap();
    rt.block_on(start(cfg, SocketAddr::from(([127, 0, 0, 1], 0)))).unwrap()
}

fn tiny_spec(id: &str) -> Value {
    json!({
        "schema_version": 1, "spec_id": id, "mark": "point", "data_ref": "0".repeat(64),
        "channels": {}, "coordinate_type": "world",
        "transform": {"rotation": [1.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0], "translation": [0.0,0.0,0.0], "scale": 1.0},
        "link": null, "filters": []
    })
}

#[test]
fn handshake_poll_and_render() {
    let rt = runtime();
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(&rt, dir.path());
    let h = Http::new(&gw);

    let (_, c) = h.post_json("/api/device/request", json!({}));
    let key = c["device_key"].as_str().unwrap().to_string();
    let (s, e) = h.get_json(&format!("/api/device/{key}/poll"));
    assert_eq!((s, e["error"].as_str()), (404, Some("UnknownDevice")));
    let (s, e) = h.post_json("/api/device/connect", json!({"username": c["username"], "password": "x"}));
    assert_eq!((s, e["error"].as_str()), (401, Some("BadCredentials")));
    let creds = json!({"username": c["username"], "password": c["password"]});
    assert_eq!(h.post_json("/api/device/connect", creds.clone()).1["device_key"], key);
    let (s, e) = h.post_json("/api/device/connect", creds);
    assert_eq!((s, e["error"].as_str()), (409, Some("AlreadyConnected")));

    let (s, b) = h.get(&format!("/api/device/{key}/poll"));
    assert_eq!((s, b.as_slice()), (200, br#"{"status":"empty"}"#.as_slice()));

    let (s, t) = h.post_json(&format!("/api/device/{key}/render"), json!({"spec": tiny_spec("a")}));
    assert_eq!(s, 200, "{t}");
    h.post_json(&format!("/api/device/{key}/clear"), json!({}));
    let (_, first) = h.get_json(&format!("/api/device/{key}/poll"));
    assert_eq!(first["kind"], "RenderSpec");
    assert_eq!(first["task_id"], t["task_id"]);
    let spec = immerflow_core::grammar::parse_spec(first["payload"].as_str().unwrap()).unwrap();
    assert_eq!(spec.spec_id, "a");
    assert_eq!(h.get_json(&format!("/api/device/{key}/poll")).1["kind"], "ClearScene");

    let (s, e) = h.post_json("/api/device/ffff/render", json!({"spec": tiny_spec("a")}));
    assert_eq!((s, e["error"].as_str()), (404, Some("UnknownDevice")));
    let (s, e) = h.post_json(&format!("/api/device/{key}/render"), json!({"spec": {"mark": "point"}}));
    assert_eq!((s, e["error"].as_str()), (400, Some("MalformedSpec")));

    // Static editor and registry listing.
    assert_eq!(h.get("/index.html"), (200, b"<h1>editor</h1>".to_vec()));
    let (_, kinds) = h.get_json("/api/nodes");
    assert!(kinds.as_array().unwrap().iter().any(|k| k["kind"] == "IsoSurface"));
    assert_eq!(h.get_json("/api/health").1["status"], "ok");
    rt.block_on(gw.shutdown());
}

#[test]
fn thousand_requests_mint_distinct_keys() {
    let rt = runtime();
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(&rt, dir.path());
    let mut keys = HashSet::new();
    let mut users = HashSet::new();
    for _ in 0..1000 {
        let c = gw.state.request_connection();
        keys.insert(c.device_key);
        users.insert(c.username);
    }
    assert_eq!((keys.len(), users.len()), (1000, 1000));
    rt.block_on(gw.shutdown());
}

#[test]
fn workspace_save_load_execute() {
    let rt = runtime();
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(&rt, dir.path());
    let h = Http::new(&gw);
    let doc = r#"{"schema_version":1,"access_code":"w1","version":2,"nodes":[{"id":"n1","kind":"TargetPosition","params":{"x":1.0}},{"id":"n2","kind":"TargetPosition","params":{}}],"edges":[{"src":"n1","src_port":"position","dst":"n2","dst_port":"pose"}]}"#;
    assert_eq!(h.get_json("/api/workspace/w1").1["error"], "UnknownWorkspace");
    let (s, meta) = h.post("/api/workspace/w1/save", doc.as_bytes());
    assert_eq!(s, 200, "{meta}");
    assert_eq!(h.get("/api/workspace/w1"), (200, doc.as_bytes().to_vec()));

    let stale = doc.replace("\"version\":2", "\"version\":1");
    let (s, e) = h.post("/api/workspace/w1/save", stale.as_bytes());
    assert_eq!((s, e["error"].as_str()), (409, Some("ConflictingVersion")));

    let (_, r) = h.post_json("/api/workspace/w1/execute", json!({}));
    assert_eq!(r["executed"], json!(["n1", "n2"]));
    let (_, r) = h.post_json("/api/workspace/w1/node/n2/execute", json!({"params": {"y": 2.0}}));
    assert_eq!(r["executed"], json!(["n2"]));
    assert_eq!(r["skipped"], json!(["n1"]));
    let (s, e) = h.post_json("/api/workspace/w1/node/n9/execute", json!({}));
    assert_eq!((s, e["error"].as_str()), (404, Some("UnknownNode")));
    let (s, _) = h.post_json("/api/workspace/nope/execute", json!({}));
    assert_eq!(s, 404);
    rt.block_on(gw.shutdown());
}

#[test]
fn sensor_frames_over_tcp() {
    let rt = runtime();
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(&rt, dir.path());
    let h = Http::new(&gw);
    let key = h.connected();
    let (s, d) = h.post_json(&format!("/api/device/{key}/stream"), json!({"kinds": ["HeadPose"]}));
    assert_eq!(s, 200);
    let (s, e) = h.post_json(&format!("/api/device/{key}/stream"), json!({"kinds": ["HeadPose"]}));
    assert_eq!((s, e["error"].as_str()), (409, Some("StreamAlreadyOpen")));
    let queue = gw.state.streams.subscribe("w/n1", &key, SensorKind::HeadPose, 4);

    let mut sock = TcpStream::connect((d["host"].as_str().unwrap(), d["port"].as_u64().unwrap() as u16)).unwrap();
    for ts in [0.1, 0.2, 0.15, 0.3] {
        let pose = PoseSample::from_transform(&RigidTransform::from_translation([ts, 0.0, 0.0]));
        sock.write_all(&encode_frame(&SensorFrame::pose(&key, SensorKind::HeadPose, ts, pose))).unwrap();
    }
    sock.flush().unwrap();
    let deadline = std::time::Instant::now() + Duration::from_secs(5);
    let status = loop {
        let (_, st) = h.get_json(&format!("/api/device/{key}/streams"));
        if st[0]["frames"].as_u64().unwrap_or(0) + st[0]["rejected"].as_u64().unwrap_or(0) == 4
            || std::time::Instant::now() > deadline
        {
            break st;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    assert_eq!((status[0]["frames"].as_u64(), status[0]["rejected"].as_u64()), (Some(3), Some(1)));
    assert_eq!(queue.len(), 3);

    drop(sock);
    let deadline = std::time::Instant::now() + Duration::from_secs(5);
    while !h.get_json(&format!("/api/device/{key}/streams")).1.as_array().unwrap().is_empty() {
        assert!(std::time::Instant::now() < deadline, "stream state not torn down");
        std::thread::sleep(Duration::from_millis(10));
    }
    // The session survives the stream.
    assert_eq!(h.get(&format!("/api/device/{key}/poll")).0, 200);
    rt.block_on(gw.shutdown());
}

#[test]
fn second_bind_on_the_same_port_fails() {
    let rt = runtime();
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(&rt, dir.path());
    let err = rt
        .block_on(start(GatewayConfig::new(dir.path()), gw.http_addr))
        .err()
        .unwrap();
    assert!(matches!(err, ServeError::AddressInUse(a) if a == gw.http_addr));
    rt.block_on(gw.shutdown());
}
