//! The demo workspaces `demo1`..`demo4` and their synthetic data.
//!
//! Everything is generated from fixed seeds, so seeding twice writes the same
//! bytes. Volumes stay at 48^3 so the demos run in seconds.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use immerflow_core::dataflow::{
    deserialize_workspace, DocumentEdge, DocumentNode, ParamMap, ParamValue, WorkspaceDocument,
    DOCUMENT_SCHEMA_VERSION,
};
use immerflow_core::nodes::{builtin_registry, write_volume, SampleType};
use immerflow_core::transform::{RigidTransform, Vec3};
use immerflow_core::value::Volume3D;
use immerflow_sim::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::CliError;

pub const DEMO_CODES: [&str; 4] = ["demo1", "demo2", "demo3", "demo4"];

pub struct Demo {
    pub code: &'static str,
    pub title: &'static str,
    pub document: WorkspaceDocument,
    /// Default scenario per device, in connector order.
    pub scenarios: Vec<Scenario>,
}

/// Where the demo2 CT scan is misplaced relative to the face it belongs to;
/// registration has to undo it.
pub const CT_OFFSET: Vec3 = [0.012, -0.008, 0.010];
/// World center of the simulated head seen by the depth camera.
pub const HEAD_CENTER: Vec3 = [0.0, 0.0, 0.6];
/// demo3: where the microscopy slide marker sits.
pub const SLIDE_AT: Vec3 = [0.3, 1.0, -0.8];
/// demo3: the air tap, in the middle of the displayed volume.
pub const TAP_AT: Vec3 = [0.42, 1.12, -0.68];
/// demo1: court corner marker.
pub const COURT_AT: Vec3 = [-0.75, 0.0, -1.0];

#[derive(Default)]
struct Graph {
    nodes: Vec<DocumentNode>,
    edges: Vec<DocumentEdge>,
}

fn param(v: &Value) -> ParamValue {
    match v {
        Value::Number(n) => ParamValue::Number(n.as_f64().unwrap_or_default()),
        Value::Bool(b) => ParamValue::Bool(*b),
        Value::String(s) => ParamValue::Text(s.clone()),
        // Json-typed params are stored as text.
        other => ParamValue::Text(other.to_string()),
    }
}

impl Graph {
    fn node(&mut self, id: &str, kind: &str, params: Value) -> &mut Self {
        let params: ParamMap = params
            .as_object()
            .map(|m| m.iter().map(|(k, v)| (k.clone(), param(v))).collect())
            .unwrap_or_default();
        self.nodes.push(DocumentNode {
            id: id.into(),
            kind: kind.into(),
            params,
        });
        self
    }

    fn edge(&mut self, src: &str, src_port: &str, dst: &str, dst_port: &str) -> &mut Self {
        self.edges.push(DocumentEdge {
            src: src.into(),
            src_port: src_port.into(),
            dst: dst.into(),
            dst_port: dst_port.into(),
        });
        self
    }

    /// Canvas positions: one column per longest-path depth.
    fn layout(&self) -> Value {
        let mut depth: BTreeMap<&str, usize> = self.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
        for _ in 0..self.nodes.len() {
            for e in &self.edges {
                let d = depth[e.src.as_str()] + 1;
                let slot = depth.get_mut(e.dst.as_str()).expect("edge endpoints exist");
                *slot = (*slot).max(d);
            }
        }
        let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
        let mut out = serde_json::Map::new();
        for n in &self.nodes {
            let col = depth[n.id.as_str()];
            let row = rows.entry(col).or_default();
            out.insert(n.id.clone(), json!({ "x": 40 + 240 * col, "y": 40 + 110 * *row }));
            *row += 1;
        }
        json!({ "nodes": out })
    }

    fn document(&self, code: &str) -> WorkspaceDocument {
        WorkspaceDocument {
            schema_version: DOCUMENT_SCHEMA_VERSION,
            access_code: code.into(),
            version: 1,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            layout: Some(self.layout()),
        }
    }
}

fn scenario(v: Value) -> Scenario {
    Scenario::from_json(&v.to_string()).expect("demo scenarios are valid")
}

fn pose(translation: Vec3) -> Value {
    serde_json::to_value(RigidTransform::from_translation(translation)).unwrap()
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

// ---- demo1: shot chart ----

/// Half-court zones in feet, basket at (0, 5.25).
pub fn lebron_shots() -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut rows = Vec::new();
    for yi in 0..8 {
        for xi in 0..13 {
            let x = -24.0 + 4.0 * f64::from(xi);
            let y = 1.0 + 4.0 * f64::from(yi);
            let d = (x * x + (y - 5.25f64).powi(2)).sqrt();
            let rate = 3.0 * (-d * d / 30.0).exp() + 1.2 * (-(d - 23.75f64).powi(2) / 4.0).exp() + 0.3;
            let attempts = (rate * 40.0 + rng.gen_range(0.0..6.0)).round() as u32;
            let pct = 0.35 + 0.3 * (-d / 6.0).exp();
            let successes = (0..attempts).filter(|_| rng.gen::<f64>() < pct).count();
            rows.push(json!({ "x": x, "y": y, "attempts": attempts, "successes": successes }));
        }
    }
    Value::Array(rows)
}

fn demo1() -> Demo {
    let mut g = Graph::default();
    let axis = |field: &str, range: [f64; 2]| json!({ "field": field, "range": range });
    g.node("device", "XRDeviceConnector", json!({}))
        .node("shots", "DataFile", json!({ "path": "data/lebron.json" }))
        .node("corner", "MarkerTracking", json!({ "marker": "court-corner" }))
        .node("court", "TargetPosition", json!({}))
        .node(
            "scatter",
            "VisualEncoding",
            json!({
                "spec_id": "shots",
                "mark": "point",
                "channels": {
                    "x": axis("x", [0.0, 1.5]),
                    "y": axis("y", [0.0, 1.4]),
                    "color": { "field": "attempts", "legend": true },
                    "size": { "field": "successes" },
                },
            }),
        )
        .node(
            "bar_x",
            "VisualEncoding",
            json!({
                "spec_id": "attempts_by_x",
                "mark": "bar",
                "channels": { "x": axis("x", [0.0, 1.5]), "y": axis("attempts", [0.0, 0.4]) },
            }),
        )
        .node(
            "bar_y",
            "VisualEncoding",
            json!({
                "spec_id": "attempts_by_y",
                "mark": "bar",
                "channels": { "y": axis("y", [0.0, 1.4]), "x": axis("attempts", [0.0, 0.4]) },
            }),
        )
        .node("link_x", "VisLinking", json!({ "link": "axis", "field": "x" }))
        .node("link_y", "VisLinking", json!({ "link": "axis", "field": "y" }))
        // Shorter ids are enqueued first among ready nodes: the scatter has
        // to reach the device before the bars linked to it.
        .node("xr_shots", "XRVisualization", json!({}))
        .node("xr_bars_x", "XRVisualization", json!({}))
        .node("xr_bars_y", "XRVisualization", json!({}))
        .node("web_shots", "WebVisualization", json!({}));
    g.edge("device", "device", "corner", "device")
        .edge("corner", "pose", "court", "pose")
        .edge("shots", "table", "scatter", "table")
        .edge("court", "position", "scatter", "position")
        .edge("shots", "table", "bar_x", "table")
        .edge("shots", "table", "bar_y", "table")
        .edge("bar_x", "spec", "link_x", "spec")
        .edge("scatter", "spec", "link_x", "target")
        .edge("bar_y", "spec", "link_y", "spec")
        .edge("scatter", "spec", "link_y", "target")
        .edge("scatter", "spec", "xr_shots", "spec")
        .edge("device", "device", "xr_shots", "device")
        .edge("link_x", "spec", "xr_bars_x", "spec")
        .edge("device", "device", "xr_bars_x", "device")
        .edge("link_y", "spec", "xr_bars_y", "spec")
        .edge("device", "device", "xr_bars_y", "device")
        .edge("scatter", "spec", "web_shots", "spec");
    let court = serde_json::to_value(RigidTransform::from_axis_angle(
        [1.0, 0.0, 0.0],
        -std::f64::consts::FRAC_PI_2,
        COURT_AT,
    ))
    .unwrap();
    let a = scenario(json!({
        "name": "shot chart on the court",
        "workspace": "demo1",
        "markers": { "court-corner": court },
        "script": [
            { "action": "advance_clock", "seconds": 0.2 },
            { "action": "refresh_node", "node": "corner" },
            { "action": "advance_clock", "seconds": 0.3 },
            { "action": "expect_spec", "name": "scatter anchored at the court corner",
              "spec_id": "shots", "mark": "point", "link": "TargetLink", "position": COURT_AT },
            { "action": "expect_spec", "name": "two bar charts axis-linked to the scatter",
              "mark": "bar", "link": "AxisLink", "link_target": "shots", "count": 2, "axis_aligned": 1e-9 },
        ],
    }));
    Demo {
        code: "demo1",
        title: "Shot chart: scatter on a tracked court with axis-linked bar charts",
        document: g.document("demo1"),
        scenarios: vec![a],
    }
}

// ---- demo2: CT overlay ----

pub const CT_DIMS: usize = 48;
pub const CT_SPACING: f64 = 0.004;
pub const SKIN_RADIUS: f64 = 0.08;

/// Center of the head inside the (misplaced) CT volume.
pub fn ct_center() -> Vec3 {
    add(HEAD_CENTER, CT_OFFSET)
}

fn ramp(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Hounsfield-like units: air outside the skin, soft tissue, a skull shell.
pub fn ct_volume() -> Volume3D {
    let c = ct_center();
    let half = (CT_DIMS as f64 - 1.0) / 2.0 * CT_SPACING;
    let origin = [c[0] - half, c[1] - half, c[2] - half];
    Volume3D::from_fn([CT_DIMS; 3], [CT_SPACING; 3], origin, |p| {
        let r = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt();
        let inside = ramp((SKIN_RADIUS - r) / CT_SPACING + 0.5);
        let bone = ramp(((r - 0.045).min(0.06 - r)) / CT_SPACING + 0.5);
        -1000.0 + 1040.0 * inside + 660.0 * bone
    })
    .expect("valid dims")
}

/// Skin voxels on the face side (toward the camera), as a 0/1 mask on the
/// CT grid.
pub fn skin_mask() -> Volume3D {
    let ct = ct_volume();
    let c = ct_center();
    Volume3D::from_fn(ct.dims, ct.spacing, ct.origin, |p| {
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let lateral = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let on_skin = (r - SKIN_RADIUS).abs() <= 0.6 * CT_SPACING;
        f64::from(u8::from(on_skin && d[2] < 0.0 && lateral < 0.065))
    })
    .expect("valid dims")
}

/// Depth camera intrinsics matching the simulated 160x120 sensor, whose
/// bump is centered between pixels 79 and 80.
const DEPTH_FX: f64 = 150.0;
const DEPTH_CX: f64 = 79.5;
const DEPTH_CY: f64 = 59.5;

fn demo2() -> Demo {
    let mut g = Graph::default();
    g.node("device", "XRDeviceConnector", json!({}))
        .node("ct", "Image3DFile", json!({ "path": "data/ct_head.raw" }))
        .node("skin_mask", "Image3DFile", json!({ "path": "data/ct_skin_mask.raw" }))
        .node("bone", "IsoSurface", json!({ "isovalue": 300.0 }))
        .node("skin", "VolumeToPoints", json!({ "threshold": 0.5, "stride": 1 }))
        .node("depth", "XRInput", json!({ "sensor": "DepthFrame" }))
        .node("capture", "RawCapture", json!({ "trigger": "latest" }))
        .node(
            "face",
            "RegionSelection",
            json!({ "u0": 68, "v0": 48, "u1": 91, "v1": 71,
                    "fx": DEPTH_FX, "fy": DEPTH_FX, "cx": DEPTH_CX, "cy": DEPTH_CY }),
        )
        .node("register", "ICPRegistration", json!({ "max_iterations": 100, "tolerance": 1e-10 }))
        .node("placed", "ApplyTransform", json!({}))
        .node("curvature", "CurvatureCalculation", json!({}))
        .node(
            "skull",
            "MeshEncoding",
            json!({ "spec_id": "skull", "channels": { "color": { "field": "vertex_scalars" } } }),
        )
        .node("ct_view", "VolumeEncoding", json!({ "spec_id": "ct" }))
        .node("xr_ct", "XRVisualization", json!({}))
        .node("xr_skull", "XRVisualization", json!({}));
    g.edge("ct", "volume", "bone", "volume")
        .edge("skin_mask", "volume", "skin", "volume")
        .edge("device", "device", "depth", "device")
        .edge("depth", "stream", "capture", "stream")
        .edge("capture", "image", "face", "image")
        .edge("skin", "points", "register", "source")
        .edge("face", "points", "register", "target")
        .edge("bone", "mesh", "placed", "mesh")
        .edge("register", "pose", "placed", "pose")
        .edge("placed", "mesh", "curvature", "mesh")
        .edge("curvature", "mesh", "skull", "mesh")
        .edge("ct", "volume", "ct_view", "volume")
        .edge("register", "pose", "ct_view", "position")
        .edge("ct_view", "spec", "xr_ct", "spec")
        .edge("device", "device", "xr_ct", "device")
        .edge("skull", "spec", "xr_skull", "spec")
        .edge("device", "device", "xr_skull", "device");
    let wall_mm = (HEAD_CENTER[2] * 1000.0) as u16;
    let lateral = HEAD_CENTER[2] / DEPTH_FX;
    let radius_px = SKIN_RADIUS / lateral;
    let registered = [-CT_OFFSET[0], -CT_OFFSET[1], -CT_OFFSET[2]];
    let a = scenario(json!({
        "name": "CT registered to the face",
        "workspace": "demo2",
        "depth": {
            "rate_hz": 5.0, "width": 160, "height": 120, "wall_mm": wall_mm,
            "bump_radius_px": radius_px, "mm_per_px": SKIN_RADIUS * 1000.0 / radius_px,
        },
        "script": [
            { "action": "advance_clock", "seconds": 0.6 },
            { "action": "refresh_node", "node": "capture" },
            { "action": "advance_clock", "seconds": 0.2 },
            { "action": "expect_spec", "name": "skull mesh overlaid", "spec_id": "skull", "mark": "mesh" },
            { "action": "expect_spec", "name": "CT volume moved onto the face",
              "spec_id": "ct", "mark": "volume", "link": "TargetLink",
              "position": registered, "tolerance": 0.005 },
        ],
    }));
    Demo {
        code: "demo2",
        title: "CT overlay: skin points registered to a depth capture by ICP",
        document: g.document("demo2"),
        scenarios: vec![a],
    }
}

// ---- demo3: shared microscopy ROI ----

pub const BRAIN_DIMS: usize = 48;
pub const BRAIN_SPACING: f64 = 0.005;

/// Bright tubes (traced neurites) in a dim noisy background, u8 range.
pub fn brain_volume() -> Volume3D {
    let segments: [(Vec3, Vec3); 4] = [
        ([0.02, 0.03, 0.05], [0.22, 0.20, 0.18]),
        ([0.12, 0.12, 0.12], [0.05, 0.21, 0.20]),
        ([0.12, 0.12, 0.12], [0.21, 0.04, 0.09]),
        ([0.03, 0.18, 0.03], [0.19, 0.15, 0.21]),
    ];
    let sigma = 0.006;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = BRAIN_DIMS;
    let mut samples = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = [i, j, k].map(|c| c as f64 * BRAIN_SPACING);
                let d2 = segments
                    .iter()
                    .map(|(a, b)| segment_distance2(p, *a, *b))
                    .fold(f64::INFINITY, f64::min);
                let v = rng.gen_range(0.0..15.0) + 220.0 * (-d2 / (2.0 * sigma * sigma)).exp();
                samples.push(v.min(255.0) as f32);
            }
        }
    }
    Volume3D::new([n; 3], [BRAIN_SPACING; 3], [0.0; 3], samples).expect("valid dims")
}

fn segment_distance2(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab.iter().map(|x| x * x).sum::<f64>();
    let t = (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0);
    (0..3).map(|k| (ap[k] - t * ab[k]).powi(2)).sum()
}

fn demo3() -> Demo {
    let mut g = Graph::default();
    let extent = BRAIN_DIMS as f64 * BRAIN_SPACING;
    let axis = |f: &str| json!({ "field": f, "domain": [0.0, extent], "range": [0.0, extent] });
    g.node("device_a", "XRDeviceConnector", json!({}))
        .node("device_b", "XRDeviceConnector", json!({}))
        .node("brain", "Image3DFile", json!({ "path": "data/brain.raw" }))
        .node("slide", "MarkerTracking", json!({ "marker": "slide" }))
        .node("brain_view", "VolumeEncoding", json!({ "spec_id": "brain" }))
        .node(
            "trace",
            "CustomVolumeToTable",
            json!({ "endpoint": "builtin", "function": "trace_neurons", "params": { "threshold": 120.0 } }),
        )
        .node(
            "neurons",
            "VisualEncoding",
            json!({
                "spec_id": "neurons",
                "mark": "point",
                "channels": { "x": axis("x"), "y": axis("y"), "z": axis("z"), "color": { "field": "intensity" } },
            }),
        )
        .node("group", "VisLinking", json!({ "link": "object" }))
        .node("hands", "XRInput", json!({ "sensor": "HandJoints" }))
        .node("tap", "GestureRecognition", json!({}))
        .node("roi", "FindVolumeROI", json!({ "extent_x": 0.06, "extent_y": 0.06, "extent_z": 0.06 }))
        .node("anchor", "GenerateSpatialAnchor", json!({}))
        .node("roi_view", "VolumeEncoding", json!({ "spec_id": "roi" }));
    g.edge("device_a", "device", "slide", "device")
        .edge("brain", "volume", "brain_view", "volume")
        .edge("slide", "pose", "brain_view", "position")
        .edge("brain", "volume", "trace", "volume")
        .edge("trace", "table", "neurons", "table")
        .edge("neurons", "spec", "group", "spec")
        .edge("brain_view", "spec", "group", "target")
        .edge("device_a", "device", "hands", "device")
        .edge("hands", "stream", "tap", "stream")
        .edge("brain", "volume", "roi", "volume")
        .edge("tap", "pose", "roi", "center")
        .edge("brain_view", "spec", "roi", "spec")
        .edge("tap", "pose", "anchor", "position")
        .edge("roi", "volume", "roi_view", "volume")
        .edge("anchor", "anchor", "roi_view", "position");
    for (dev, suffix) in [("device_a", "a"), ("device_b", "b")] {
        for (spec_node, name) in [("brain_view", "brain"), ("group", "neurons"), ("roi_view", "roi")] {
            // xr_a_roi < xr_a_brain < xr_a_neurons: the group target comes
            // before the linked spec.
            let id = format!("xr_{suffix}_{name}");
            g.node(&id, "XRVisualization", json!({}));
            g.edge(spec_node, "spec", &id, "spec").edge(dev, "device", &id, "device");
        }
    }
    let shared = |label: &str| {
        vec![
            json!({ "action": "expect_spec", "name": format!("{label}: volume on the slide"),
                    "spec_id": "brain", "mark": "volume", "position": SLIDE_AT }),
            json!({ "action": "expect_spec", "name": format!("{label}: traced neurons grouped with the volume"),
                    "spec_id": "neurons", "link": "ObjectLink", "link_target": "brain" }),
            json!({ "action": "expect_spec", "name": format!("{label}: ROI at the tap anchor"),
                    "spec_id": "roi", "mark": "volume", "link": "TargetLink", "position": TAP_AT }),
        ]
    };
    let mut script_a = vec![
        json!({ "action": "advance_clock", "seconds": 0.2 }),
        json!({ "action": "refresh_node", "node": "slide" }),
        json!({ "action": "advance_clock", "seconds": 0.2 }),
        json!({ "action": "air_tap", "position": TAP_AT }),
        json!({ "action": "advance_clock", "seconds": 0.2 }),
        json!({ "action": "refresh_node", "node": "tap" }),
        json!({ "action": "advance_clock", "seconds": 0.2 }),
    ];
    script_a.extend(shared("A"));
    let mut script_b = vec![
        json!({ "action": "advance_clock", "seconds": 1.2 }),
        json!({ "action": "resolve_anchors" }),
    ];
    script_b.extend(shared("B"));
    let a = scenario(json!({
        "name": "ROI picked by air tap",
        "workspace": "demo3",
        "markers": { "slide": pose(SLIDE_AT) },
        "tracks": { "HandJoints": { "rate_hz": 30.0, "keyframes": [{ "t": 0.0, "position": add(TAP_AT, [0.0, -0.1, 0.1]) }] } },
        "script": script_a,
    }));
    let b = scenario(json!({
        "name": "collaborator viewing the shared ROI",
        "workspace": "demo3",
        "script": script_b,
    }));
    Demo {
        code: "demo3",
        title: "Microscopy: neuron tracing and an ROI shared across two devices",
        document: g.document("demo3"),
        scenarios: vec![a, b],
    }
}

// ---- demo4: telemetry and a filtered chart ----

pub fn cars_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let origins = ["usa", "europe", "japan"];
    let mut out = String::from("name,origin,horsepower,weight,mpg\n");
    for i in 1..=40 {
        let origin = origins[rng.gen_range(0..3)];
        let hp: f64 = rng.gen_range(60.0..230.0);
        let weight: f64 = rng.gen_range(1800.0..4800.0);
        let mpg = (50.0 - 0.1 * hp - 0.004 * (weight - 1800.0) + rng.gen_range(-3.0..3.0)).clamp(9.0, 46.0);
        out.push_str(&format!("car-{i:02},{origin},{hp:.0},{weight:.0},{mpg:.1}\n"));
    }
    out
}

fn demo4() -> Demo {
    let mut g = Graph::default();
    g.node("device", "XRDeviceConnector", json!({}))
        .node("head", "XRInput", json!({ "sensor": "HeadPose" }))
        .node("trail", "DataQueue", json!({ "capacity": 64, "window": 64 }))
        .node(
            "path",
            "VisualEncoding",
            json!({
                "spec_id": "head_path",
                "mark": "line",
                "channels": {
                    "x": { "field": "tx", "domain": [0.0, 1.0], "range": [0.0, 1.0] },
                    "z": { "field": "tz", "domain": [-1.0, 0.0], "range": [-1.0, 0.0] },
                    "color": { "field": "timestamp" },
                },
            }),
        )
        .node("cars", "DataFile", json!({ "path": "data/cars.csv" }))
        .node(
            "chart",
            "VisualEncoding",
            json!({
                "spec_id": "cars",
                "mark": "point",
                "coordinate_type": "view",
                "transform": { "rotation": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                               "translation": [-0.2, -0.1, 0.6], "scale": 0.4 },
                "channels": {
                    "x": { "field": "horsepower" },
                    "y": { "field": "mpg" },
                    "color": { "field": "origin", "legend": true },
                    "size": { "field": "weight" },
                },
            }),
        )
        .node(
            "filter",
            "SpecInteraction",
            json!({ "actions": [
                { "type": "threshold_filter", "field": "mpg", "lo": 15.0, "hi": 50.0 },
                { "type": "detail_on_demand", "field": "horsepower" },
            ] }),
        )
        .node("xr_path", "XRVisualization", json!({}))
        .node("xr_cars", "XRVisualization", json!({}))
        .node("web_cars", "WebVisualization", json!({}))
        .node("web_path", "WebVisualization", json!({}));
    g.edge("device", "device", "head", "device")
        .edge("head", "stream", "trail", "stream")
        .edge("trail", "table", "path", "table")
        .edge("cars", "table", "chart", "table")
        .edge("chart", "spec", "filter", "spec")
        .edge("path", "spec", "xr_path", "spec")
        .edge("device", "device", "xr_path", "device")
        .edge("filter", "spec", "xr_cars", "spec")
        .edge("device", "device", "xr_cars", "device")
        .edge("filter", "spec", "web_cars", "spec")
        .edge("path", "spec", "web_path", "spec");
    let walk = json!({ "rate_hz": 60.0, "keyframes": [
        { "t": 0.0, "position": [0.0, 1.6, 0.0] },
        { "t": 1.0, "position": [1.0, 1.6, 0.0] },
        { "t": 2.0, "position": [1.0, 1.6, -1.0] },
        { "t": 3.0, "position": [0.0, 1.6, -1.0] },
        { "t": 4.0, "position": [0.0, 1.6, 0.0] },
    ] });
    let a = scenario(json!({
        "name": "walking a square",
        "workspace": "demo4",
        "tracks": { "HeadPose": walk },
        "script": [
            { "action": "expect_spec", "name": "filtered car chart in view space", "spec_id": "cars", "mark": "point" },
            { "action": "advance_clock", "seconds": 2.0 },
            { "action": "refresh_node", "node": "trail" },
            { "action": "advance_clock", "seconds": 0.2 },
            { "action": "expect_spec", "name": "head path drawn", "spec_id": "head_path", "mark": "line" },
        ],
    }));
    Demo {
        code: "demo4",
        title: "Telemetry: head-pose trail from a data queue and a filtered chart",
        document: g.document("demo4"),
        scenarios: vec![a],
    }
}

pub fn demos() -> Vec<Demo> {
    vec![demo1(), demo2(), demo3(), demo4()]
}

pub fn scenario_path(data_root: &Path, code: &str, index: usize) -> PathBuf {
    data_root.join("scenarios").join(format!("{code}-{}.json", index + 1))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Writes data files, workspace documents and default scenarios under
/// `data_root`, replacing earlier copies and their anchors.
pub fn seed_demos(data_root: &Path) -> Result<Vec<String>, CliError> {
    let data = data_root.join("data");
    fs::create_dir_all(&data).map_err(io_err(&data))?;
    write(
        &data.join("lebron.json"),
        serde_json::to_string_pretty(&lebron_shots()).unwrap().as_bytes(),
    )?;
    write(&data.join("cars.csv"), cars_csv().as_bytes())?;
    let volumes = [
        ("ct_head.raw", ct_volume(), SampleType::F32),
        ("ct_skin_mask.raw", skin_mask(), SampleType::U8),
        ("brain.raw", brain_volume(), SampleType::U8),
    ];
    for (name, vol, dtype) in volumes {
        write_volume(&data.join(name), &vol, dtype).map_err(CliError::Config)?;
    }

    let registry = Arc::new(builtin_registry());
    let workspaces = data_root.join("workspaces");
    let mut codes = Vec::new();
    for demo in demos() {
        deserialize_workspace(&demo.document, registry.clone())
            .map_err(|e| CliError::Config(format!("{}: {e}", demo.code)))?;
        write(
            &workspaces.join(format!("{}.json", demo.code)),
            demo.document.to_json().as_bytes(),
        )?;
        let anchors = workspaces.join(format!("{}.anchors.json", demo.code));
        if anchors.exists() {
            fs::remove_file(&anchors).map_err(io_err(&anchors))?;
        }
        for (i, sc) in demo.scenarios.iter().enumerate() {
            write(
                &scenario_path(data_root, demo.code, i),
                serde_json::to_string_pretty(sc).unwrap().as_bytes(),
            )?;
        }
        codes.push(demo.code.to_string());
    }
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_demo_document_builds() {
        let registry = Arc::new(builtin_registry());
        for d in demos() {
            let wf = deserialize_workspace(&d.document, registry.clone()).unwrap();
            assert_eq!(wf.len(), d.document.nodes.len(), "{}", d.code);
            let text = d.document.to_json();
            assert_eq!(WorkspaceDocument::from_json(&text).unwrap(), d.document);
        }
    }

    #[test]
    fn skin_mask_is_a_cap() {
        let m = skin_mask();
        let on = m.samples.iter().filter(|s| **s > 0.5).count();
        assert!((200..3000).contains(&on), "{on} skin voxels");
    }

    #[test]
    fn demo_data_is_stable() {
        assert_eq!(lebron_shots(), lebron_shots());
        assert_eq!(cars_csv(), cars_csv());
        assert_eq!(brain_volume().samples, brain_volume().samples);
    }
}
