//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Tolerances are pinned below.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use immerflow_cli::demos::seed_demos;
use immerflow_cli::{run_scenario, RunConfig, RunReport};
use immerflow_core::dataflow::{
    deserialize_workspace, serialize_workspace, Category, EvalOutput, ExecContext, NodeSpec, ParamMap,
    ParamType, ParamValue, Registry, Workflow, WorkspaceDocument,
};
use immerflow_core::grammar::{
    axis_point, resolve_link, Channel, ChannelEncoding, CoordinateType, Link, Mark, Scale, ScaleRange,
    SpecRegistry, VisSpec,
};
use immerflow_core::kernels::{compute_curvature, iso_surface, register_icp, synth, IcpParams};
use immerflow_core::sensor::SensorKind;
use immerflow_core::transform::{distance, RigidTransform, Similarity};
use immerflow_core::value::{Cell, DataKind, DataValue, Mesh, PointCloud};
use immerflow_gateway::sessions::SessionTable;
use immerflow_gateway::{start, GatewayConfig, TaskKind};
use immerflow_sim::{protocol_prefix, DeviceOptions, Event, Scenario, SimDevice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PROTOCOL_POLL_MS: u64 = 100;
const PROTOCOL_BUDGET: Duration = Duration::from_secs(5);
const DAG_TRIALS: usize = 200;
const DAG_MAX_NODES: usize = 64;
const MC_SAMPLES: usize = 64;
const MC_RADIUS: f64 = 0.35;
const MC_MAX_RADIAL_ERROR_VOXELS: f64 = 1.5;
const MC_BUDGET: Duration = Duration::from_secs(2);
const ICP_TRIALS: usize = 50;
const ICP_POINTS: usize = 1000;
const ICP_MAX_ANGLE: f64 = 30.0 * std::f64::consts::PI / 180.0;
const ICP_MAX_TRANSLATION: f64 = 0.5;
const ICP_ROTATION_TOL: f64 = 1e-3;
const ICP_TRANSLATION_TOL: f64 = 1e-3;
const ICP_REQUIRED: usize = 49;
const ICP_TRIAL_BUDGET: Duration = Duration::from_secs(1);
const CURVATURE_SUBDIVISIONS: usize = 4;
const CURVATURE_REL_TOL: f64 = 0.05;
const CURVATURE_FRACTION: f64 = 0.95;
const SCHED_PRODUCERS: usize = 3;
const SCHED_TASKS: usize = 100;
const SCHED_REPETITIONS: usize = 20;
const SENSOR_FRAMES: usize = 600;
const SENSOR_QUEUE: usize = 64;
const LINK_TOL: f64 = 1e-9;
const LINK_TRIALS: usize = 100;
const ROUND_TRIP_TRIALS: usize = 100;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .expect("runtime")
}

fn demo_run(root: &Path, code: &str, devices: usize, seed: u64) -> RunReport {
    let mut cfg = RunConfig::new(root, code);
    cfg.devices = devices;
    cfg.seed = seed;
    run_scenario(&cfg).unwrap_or_else(|e| panic!("{code}: {e}"))
}

fn protocol_conformance() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let rt = runtime();
    let mut cfg = GatewayConfig::new(dir.path());
    cfg.seed = Some(1);
    let gw = rt.block_on(start(cfg, SocketAddr::from(([127, 0, 0, 1], 0)))).unwrap();

    let mut sc = Scenario::from_json(
        r#"{"script": [
            {"action": "advance_clock", "seconds": 0.3},
            {"action": "expect_spec", "name": "delivered", "spec_id": "probe", "position": [1, 2, 3]}
        ]}"#,
    )
    .unwrap();
    sc.poll_interval_ms = PROTOCOL_POLL_MS;
    let mut dev = SimDevice::new(DeviceOptions::new("A", &gw.base_url()), sc).unwrap();
    let creds = dev.handshake().unwrap();
    immerflow_cli::harness::mirror(&gw, creds.device_key.clone(), dev.log().clone());
    gw.state.connect_device(&creds.username, &creds.password).unwrap();
    // One empty poll, then a render task lands between cycles.
    dev.run_actions().unwrap();
    dev.stream_step().unwrap();
    dev.poll_cycle().unwrap();
    let spec = serde_json::json!({
        "schema_version": 1, "spec_id": "probe", "mark": "point", "data_ref": "0".repeat(64),
        "channels": {}, "coordinate_type": "world",
        "transform": {"rotation": [1.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0], "translation": [0.0,0.0,0.0], "scale": 1.0},
        "link": {"kind": "TargetLink", "position": [1.0, 2.0, 3.0]}, "filters": []
    });
    gw.state.enqueue_spec_text(&creds.device_key, &spec.to_string()).unwrap();
    let mut devs = [dev];
    let run = immerflow_sim::run_lockstep(&mut devs, 50);
    rt.block_on(gw.shutdown());
    let dev = &devs[0];
    let recs = dev.log().records();
    let steps = protocol_prefix(&recs);
    let enq = recs.iter().find(|r| matches!(r.event, Event::Enqueued { .. })).map(|r| r.cycle);
    let applied = recs.iter().find(|r| matches!(r.event, Event::Applied { .. })).map(|r| r.cycle);
    let lag = match (enq, applied) {
        (Some(e), Some(a)) => Some(a.saturating_sub(e)),
        _ => None,
    };
    let elapsed = started.elapsed();
    let passed = run.is_ok()
        && steps == [1, 2, 3, 4, 5, 6, 7]
        && lag.is_some_and(|l| l <= 1)
        && dev.expectations().iter().all(|e| e.passed)
        && elapsed < PROTOCOL_BUDGET;
    outcome(
        passed,
        format!("steps {steps:?}, applied {lag:?} cycle(s) after enqueue at {PROTOCOL_POLL_MS} ms, {elapsed:.2?}"),
    )
}

fn mix_registry() -> Arc<Registry> {
    let mut r = Registry::new();
    r.register(
        NodeSpec::new("Mix", Category::Data, |req| {
            let mut sum = req.params.number("value")?;
            for p in ["a", "b", "c"] {
                if let Some(DataValue::Scalar(v)) = req.opt_input(p) {
                    sum += v;
                }
            }
            Ok(EvalOutput::single("out", DataValue::Scalar(sum)))
        })
        .optional_input("a", DataKind::Scalar)
        .optional_input("b", DataKind::Scalar)
        .optional_input("c", DataKind::Scalar)
        .param("value", ParamType::Number, 0.0)
        .param("label", ParamType::Text, "")
        .output("out", DataKind::Scalar),
    );
    Arc::new(r)
}

fn random_dag(rng: &mut ChaCha8Rng, n: usize) -> Workflow {
    let mut wf = Workflow::new(mix_registry());
    let ids: Vec<String> = (0..n)
        .map(|i| {
            let p = ParamMap::from([("value".to_string(), ParamValue::Number(i as f64))]);
            wf.add_node("Mix", p).unwrap()
        })
        .collect();
    for (i, dst) in ids.iter().enumerate().skip(1) {
        let mut parents = BTreeSet::new();
        let fan_in = rng.gen_range(0..=3.min(i));
        while parents.len() < fan_in {
            parents.insert(rng.gen_range(0..i));
        }
        for (port, p) in ["a", "b", "c"].iter().zip(parents) {
            wf.connect((&ids[p], "out"), (dst, port)).unwrap();
        }
    }
    wf
}

fn reactive_minimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ctx = ExecContext::default();
    let mut exact = 0;
    for _ in 0..DAG_TRIALS {
        let n = rng.gen_range(1..=DAG_MAX_NODES);
        let mut wf = random_dag(&mut rng, n);
        wf.execute(&ctx);
        let ids = wf.node_ids();
        let target = ids[rng.gen_range(0..ids.len())].clone();
        wf.invalidate(&target).unwrap();
        // Breadth-first closure over the edge list.
        let mut oracle = BTreeSet::from([target.clone()]);
        let mut queue = VecDeque::from([target]);
        while let Some(x) = queue.pop_front() {
            for e in wf.edges().iter().filter(|e| e.src == x) {
                if oracle.insert(e.dst.clone()) {
                    queue.push_back(e.dst.clone());
                }
            }
        }
        let report = wf.execute(&ctx);
        let executed: BTreeSet<String> = report.executed.iter().cloned().collect();
        if executed.len() == report.executed.len() && executed == oracle {
            exact += 1;
        }
    }
    outcome(exact == DAG_TRIALS, format!("{exact}/{DAG_TRIALS} executed sets equal the dirty closure"))
}

fn topology(mesh: &Mesh) -> (bool, i64) {
    let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let closed = edges.values().all(|&c| c == 2);
    (closed, mesh.vertices.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64)
}

fn marching_cubes() -> Outcome {
    let volume = synth::sphere_sdf_volume(MC_SAMPLES, MC_RADIUS);
    let started = Instant::now();
    let mesh = iso_surface(&volume, 0.0).unwrap().value;
    let elapsed = started.elapsed();
    let (closed, chi) = topology(&mesh);
    let spacing = volume.spacing[0];
    let worst = mesh
        .vertices
        .iter()
        .map(|p| (distance(*p, [0.5; 3]) - MC_RADIUS).abs())
        .fold(0.0, f64::max);
    let passed = closed && chi == 2 && worst <= MC_MAX_RADIAL_ERROR_VOXELS * spacing && elapsed < MC_BUDGET;
    outcome(
        passed,
        format!(
            "{}³ sphere: closed {closed}, chi {chi}, max radial error {:.3} voxels, {elapsed:.2?}",
            MC_SAMPLES,
            worst / spacing
        ),
    )
}

fn icp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut hits = 0;
    let mut slowest = Duration::ZERO;
    for _ in 0..ICP_TRIALS {
        let src: Vec<[f64; 3]> = (0..ICP_POINTS)
            .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3), rng.gen_range(-0.2..0.2)])
            .collect();
        let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let dir = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let len = ICP_MAX_TRANSLATION * rng.gen_range(0.0..1.0) / distance(dir, [0.0; 3]);
        let truth = RigidTransform::from_axis_angle(
            axis,
            rng.gen_range(0.0..=ICP_MAX_ANGLE),
            [dir[0] * len, dir[1] * len, dir[2] * len],
        );
        let dst = PointCloud::new(src.iter().map(|p| truth.apply(*p)).collect());
        let started = Instant::now();
        let out = register_icp(&PointCloud::new(src), &dst, IcpParams::default()).unwrap();
        let took = started.elapsed();
        slowest = slowest.max(took);
        if out.transform.rotation_angle_to(&truth) < ICP_ROTATION_TOL
            && out.transform.translation_distance_to(&truth) < ICP_TRANSLATION_TOL
            && took < ICP_TRIAL_BUDGET
        {
            hits += 1;
        }
    }
    outcome(
        hits >= ICP_REQUIRED,
        format!("{hits}/{ICP_TRIALS} trials within tolerance, slowest {slowest:.2?}"),
    )
}

fn curvature() -> Outcome {
    let mesh = compute_curvature(&synth::icosphere(CURVATURE_SUBDIVISIONS, 1.0)).unwrap().value;
    let h = mesh.vertex_scalars.unwrap_or_default();
    let good = h.iter().filter(|&&v| (v - 1.0).abs() <= CURVATURE_REL_TOL).count();
    outcome(
        !h.is_empty() && good as f64 >= CURVATURE_FRACTION * h.len() as f64,
        format!("{good}/{} vertices within 5% of 1.0", h.len()),
    )
}

fn scheduler_exactly_once() -> Outcome {
    let total = SCHED_PRODUCERS * SCHED_TASKS;
    for rep in 0..SCHED_REPETITIONS {
        let table = Arc::new(SessionTable::new(Some(rep as u64)));
        let creds = table.request();
        let key = table.connect(&creds.username, &creds.password).unwrap();
        let producers: Vec<_> = (0..SCHED_PRODUCERS)
            .map(|p| {
                let (table, key) = (table.clone(), key.clone());
                thread::spawn(move || {
                    for i in 0..SCHED_TASKS {
                        table.enqueue(&key, TaskKind::RenderSpec, format!("{p}:{i}")).unwrap();
                    }
                })
            })
            .collect();
        let poller = {
            let (table, key) = (table.clone(), key.clone());
            thread::spawn(move || {
                let mut got = Vec::new();
                let deadline = Instant::now() + Duration::from_secs(10);
                while got.len() < total && Instant::now() < deadline {
                    match table.poll(&key).unwrap() {
                        Some(t) => got.push(t),
                        None => thread::yield_now(),
                    }
                }
                got
            })
        };
        for p in producers {
            p.join().unwrap();
        }
        let got = poller.join().unwrap();
        let leftover = table.poll(&key).unwrap();
        let ids: BTreeSet<&str> = got.iter().map(|t| t.task_id.as_str()).collect();
        let payloads: BTreeSet<&str> = got.iter().map(|t| t.payload.as_str()).collect();
        let ordered = (0..SCHED_PRODUCERS).all(|p| {
            let seq: Vec<usize> = got
                .iter()
                .filter_map(|t| t.payload.split_once(':'))
                .filter(|(q, _)| q.parse::<usize>() == Ok(p))
                .map(|(_, i)| i.parse().unwrap())
                .collect();
            seq == (0..SCHED_TASKS).collect::<Vec<_>>()
        });
        if got.len() != total || ids.len() != total || payloads.len() != total || !ordered || leftover.is_some() {
            return outcome(
                false,
                format!("repetition {rep}: {} deliveries, {} unique, ordered {ordered}", got.len(), ids.len()),
            );
        }
    }
    outcome(
        true,
        format!("{SCHED_REPETITIONS} x {total} deliveries, unique and in per-producer order"),
    )
}

fn sensor_streaming() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let rt = runtime();
    let gw = rt.block_on(start(GatewayConfig::new(dir.path()), SocketAddr::from(([127, 0, 0, 1], 0)))).unwrap();
    let sc = Scenario::from_json(
        r#"{
          "tracks": {"HeadPose": {"rate_hz": 60, "keyframes": [
              {"t": 0, "position": [0, 1.6, 0]},
              {"t": 20, "position": [2, 1.6, 1], "rotation": [0, 0.3826834, 0, 0.9238795]}]}},
          "script": [{"action": "advance_clock", "seconds": 10}]
        }"#,
    )
    .unwrap();
    let mut dev = SimDevice::new(DeviceOptions::new("A", &gw.base_url()), sc).unwrap();
    let creds = dev.handshake().unwrap();
    gw.state.connect_device(&creds.username, &creds.password).unwrap();
    let queue = gw.state.streams.subscribe("acceptance/queue", &creds.device_key, SensorKind::HeadPose, SENSOR_QUEUE);
    // 100 ms cycles at 60 Hz: six frames each.
    for _ in 0..=SENSOR_FRAMES / 6 {
        dev.run_actions().unwrap();
        dev.stream_step().unwrap();
        dev.sync_streams(Duration::from_secs(5)).unwrap();
        dev.poll_cycle().unwrap();
    }
    let sent = dev.sent_payloads(SensorKind::HeadPose);
    let got = gw.state.streams.recent_payloads(&creds.device_key, SensorKind::HeadPose).unwrap_or_default();
    let frames = gw.state.streams.recent_frames(&creds.device_key, SensorKind::HeadPose).unwrap_or_default();
    let byte_equal = sent.len() == SENSOR_FRAMES
        && got.len() == SENSOR_FRAMES
        && got.iter().zip(&sent).all(|(a, b)| a.as_ref() == b.as_slice());
    let table = queue.dequeue_window(SENSOR_QUEUE);
    let in_queue: Vec<f64> = table
        .rows
        .iter()
        .filter_map(|r| match r[0] {
            Cell::Number(v) => Some(v),
            _ => None,
        })
        .collect();
    let last: Vec<f64> = frames.iter().rev().take(SENSOR_QUEUE).rev().map(|f| f.timestamp).collect();
    let queue_ok = in_queue.len() == SENSOR_QUEUE && in_queue == last;
    rt.block_on(gw.shutdown());
    outcome(
        byte_equal && queue_ok,
        format!(
            "{} sent, {} received byte-equal {byte_equal}; queue holds {} newest in order {queue_ok}",
            sent.len(),
            got.len(),
            in_queue.len()
        ),
    )
}

fn multi_device(demos: &Path) -> Outcome {
    let report = demo_run(demos, "demo3", 2, 3);
    let (Some(a), Some(b)) = (report.device("A"), report.device("B")) else {
        return outcome(false, "missing device reports");
    };
    let payload = |d: &immerflow_cli::DeviceReport| d.scene.placed.get("roi").map(|p| p.payload.clone());
    let (pa, pb) = (payload(a), payload(b));
    let same_roi = pa.is_some() && pa == pb;
    let stored = report.anchors.first().map(|a| (a.anchor_id.clone(), a.position));
    let resolved = stored.as_ref().and_then(|(id, _)| b.anchors.get(id).copied());
    let roi_at = b.scene.world("roi").map(|w| w.translation);
    let anchor_ok = report.anchors.len() == 1
        && stored.as_ref().map(|s| s.1) == resolved
        && resolved == roi_at
        && a.scene.world("roi").map(|w| w.translation) == roi_at;
    outcome(
        same_roi && anchor_ok && report.passed(),
        format!(
            "roi payloads byte-identical {same_roi} ({} bytes); anchor stored {:?}, resolved by B {:?}, roi placed {:?}",
            pa.map(|p| p.len()).unwrap_or(0),
            stored.map(|s| s.1),
            resolved,
            roi_at
        ),
    )
}

fn axis_chart(id: &str, channel: Channel, domain: [f64; 2], range: [f64; 2]) -> VisSpec {
    let channels = BTreeMap::from([(
        channel,
        ChannelEncoding {
            field: "f".into(),
            scale: Scale::Linear {
                domain,
                range: ScaleRange::Numeric(range),
            },
            legend: false,
        },
    )]);
    VisSpec {
        schema_version: 1,
        spec_id: id.into(),
        mark: Mark::Bar,
        data_ref: "0".repeat(64),
        channels,
        coordinate_type: CoordinateType::World,
        transform: Similarity::identity(),
        link: None,
        filters: vec![],
        detail_fields: vec![],
        transfer_function: None,
    }
}

fn random_similarity(rng: &mut ChaCha8Rng) -> Similarity {
    let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)];
    let t = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
    Similarity::new(RigidTransform::from_axis_angle(axis, rng.gen_range(-3.0..3.0), t), rng.gen_range(0.2..3.0))
}

fn link_resolution(demos: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let axes = [Channel::X, Channel::Y, Channel::Z];
    let mut worst_axis: f64 = 0.0;
    for _ in 0..LINK_TRIALS {
        let lo = rng.gen_range(-100.0..100.0);
        let hi = lo + rng.gen_range(0.5..50.0);
        let (ca, cb) = (axes[rng.gen_range(0..3)], axes[rng.gen_range(0..3)]);
        let mut a = axis_chart("a", ca, [lo, hi], [0.0, rng.gen_range(0.2..1.0)]);
        a.transform = random_similarity(&mut rng);
        let mut b = axis_chart("b", cb, [lo, hi], [rng.gen_range(0.0..0.2), 0.5]);
        b.transform = random_similarity(&mut rng);
        b.link = Some(Link::AxisLink {
            spec_id: "a".into(),
            field: "f".into(),
        });
        let reg = BTreeMap::from([("a".to_string(), a.clone())]);
        let (wa, wb) = (resolve_link(&a, &reg).unwrap(), resolve_link(&b, &reg).unwrap());
        for v in [lo, hi] {
            let gap = distance(wa.apply(axis_point(&a, ca, v).unwrap()), wb.apply(axis_point(&b, cb, v).unwrap()));
            worst_axis = worst_axis.max(gap);
        }
    }
    // The same property on what a device actually placed.
    let demo1 = demo_run(demos, "demo1", 1, 1);
    let scene = &demo1.devices[0].scene;
    for id in ["attempts_by_x", "attempts_by_y"] {
        worst_axis = worst_axis.max(scene.axis_link_gap(id).unwrap_or(f64::INFINITY));
    }

    let mut worst_chain: f64 = 0.0;
    for _ in 0..LINK_TRIALS {
        let anchor = random_similarity(&mut rng).rigid();
        let [ta, tb, tc] = [0; 3].map(|_| random_similarity(&mut rng));
        let mut a = axis_chart("a", Channel::X, [0.0, 1.0], [0.0, 1.0]);
        a.transform = ta;
        a.link = Some(Link::TargetLink {
            position: anchor.translation,
            rotation: Some(anchor.rotation),
        });
        let mut b = axis_chart("b", Channel::X, [0.0, 1.0], [0.0, 1.0]);
        b.transform = tb;
        b.link = Some(Link::ObjectLink { spec_id: "a".into() });
        let mut c = axis_chart("c", Channel::X, [0.0, 1.0], [0.0, 1.0]);
        c.transform = tc;
        c.link = Some(Link::ObjectLink { spec_id: "b".into() });
        let mut placed = SpecRegistry::new();
        for s in [a, b, c] {
            placed.place(s).unwrap();
        }
        let world = placed.world("c").unwrap();
        let anchor = Similarity::new(anchor, 1.0);
        let left = anchor.compose(&ta).compose(&tb).compose(&tc);
        let right = anchor.compose(&ta.compose(&tb.compose(&tc)));
        worst_chain = worst_chain.max(world.max_abs_diff(&left)).max(world.max_abs_diff(&right));
    }
    outcome(
        worst_axis <= LINK_TOL && worst_chain <= LINK_TOL && demo1.passed(),
        format!("AxisLink max gap {worst_axis:.1e}; ObjectLink 3-chain max deviation {worst_chain:.1e}"),
    )
}

fn workspace_round_trip(demos: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut equal = 0;
    for _ in 0..ROUND_TRIP_TRIALS {
        let n = rng.gen_range(0..=DAG_MAX_NODES);
        let mut wf = random_dag(&mut rng, n);
        for id in wf.node_ids() {
            if rng.gen_bool(0.3) {
                let label = format!("label {}", rng.gen::<u32>());
                wf.set_params(&id, ParamMap::from([("label".to_string(), ParamValue::Text(label))])).unwrap();
            }
        }
        let doc = serialize_workspace(&wf, "rt");
        let parsed = WorkspaceDocument::from_json(&doc.to_json()).unwrap();
        let back = deserialize_workspace(&parsed, mix_registry()).unwrap();
        if parsed == doc && serialize_workspace(&back, "rt") == doc {
            equal += 1;
        }
    }

    let exe = env!("CARGO_BIN_EXE_immerflow");
    let mut codes = Vec::new();
    for code in ["demo1", "demo2", "demo3", "demo4"] {
        let status = Command::new(exe)
            .args(["run", "--workspace", code, "--headless", "--data-root"])
            .arg(demos)
            .env("RUST_LOG", "error")
            .output()
            .expect("runs the binary")
            .status;
        codes.push(status.code().unwrap_or(-1));
    }
    outcome(
        equal == ROUND_TRIP_TRIALS && codes.iter().all(|&c| c == 0),
        format!("{equal}/{ROUND_TRIP_TRIALS} documents structurally equal; headless demo exit codes {codes:?}"),
    )
}

fn main() {
    let demos = tempfile::tempdir().unwrap();
    seed_demos(demos.path()).unwrap();
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("protocol conformance", Box::new(protocol_conformance)),
        ("reactive minimality", Box::new(reactive_minimality)),
        ("marching cubes", Box::new(marching_cubes)),
        ("icp registration", Box::new(icp)),
        ("curvature", Box::new(curvature)),
        ("scheduler exactly-once", Box::new(scheduler_exactly_once)),
        ("sensor streaming", Box::new(sensor_streaming)),
        ("multi-device sharing", Box::new(|| multi_device(demos.path()))),
        ("link resolution", Box::new(|| link_resolution(demos.path()))),
        ("workspace round-trip", Box::new(|| workspace_round_trip(demos.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let o = check();
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
