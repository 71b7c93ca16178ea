//! Kernels callable from a web page: iso-surfacing, ICP registration and
//! link resolution. Inputs and outputs are flat arrays or JSON text so the
//! page needs no bindings beyond what `wasm-bindgen` generates.
//!
//! The `*_json` functions hold the logic and work natively; the exported
//! wrappers only turn their errors into `JsError`.

use std::collections::BTreeMap;

use immerflow_core::grammar::{parse_spec, VisSpec};
use immerflow_core::kernels::{self, IcpParams};
use immerflow_core::transform::Vec3;
use immerflow_core::value::{PointCloud, Volume3D};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct MeshOut {
    vertices: Vec<f32>,
    indices: Vec<u32>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct IcpOut {
    rotation: [f64; 9],
    translation: Vec3,
    rms: f64,
    iterations: usize,
    converged: bool,
}

fn triples(flat: &[f64], what: &str) -> Result<Vec<Vec3>, String> {
    if flat.len() % 3 != 0 {
        return Err(format!("{what}: length {} is not a multiple of 3", flat.len()));
    }
    Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Triangulates the `isovalue` level set of an x-fastest `dims` grid.
/// Returns `{vertices: [x, y, z, ...], indices: [...], warnings}`.
pub fn iso_surface_json(
    dims: &[usize],
    spacing: &[f64],
    samples: Vec<f32>,
    isovalue: f64,
) -> Result<String, String> {
    let (Ok(dims), Ok(spacing)) = (<[usize; 3]>::try_from(dims), <[f64; 3]>::try_from(spacing)) else {
        return Err("dims and spacing need three entries".into());
    };
    let volume = Volume3D::new(dims, spacing, [0.0; 3], samples).map_err(|e| e.to_string())?;
    let out = kernels::iso_surface(&volume, isovalue).map_err(|e| e.to_string())?;
    let mesh = MeshOut {
        vertices: out.value.vertices.iter().flatten().map(|&c| c as f32).collect(),
        indices: out.value.triangles.iter().flatten().copied().collect(),
        warnings: out.warnings.iter().map(|w| format!("{w:?}")).collect(),
    };
    Ok(serde_json::to_string(&mesh).expect("mesh serializes"))
}

/// Rigid transform taking `source` onto `target`, both flat xyz arrays.
pub fn icp_json(source: &[f64], target: &[f64], max_iterations: usize) -> Result<String, String> {
    let source = PointCloud::new(triples(source, "source")?);
    let target = PointCloud::new(triples(target, "target")?);
    let params = IcpParams {
        max_iterations,
        ..IcpParams::default()
    };
    let r = kernels::register_icp(&source, &target, params).map_err(|e| e.to_string())?;
    let out = IcpOut {
        rotation: r.transform.rotation,
        translation: r.transform.translation,
        rms: r.rms,
        iterations: r.iterations,
        converged: r.converged,
    };
    Ok(serde_json::to_string(&out).expect("result serializes"))
}

/// World placement of `spec` given the other specs already placed, as a
/// JSON similarity `{rotation, translation, scale}`.
pub fn resolve_link_json(spec: &str, placed: &str) -> Result<String, String> {
    let spec = parse_spec(spec).map_err(|e| e.to_string())?;
    let others: Vec<serde_json::Value> = serde_json::from_str(placed).map_err(|e| format!("placed specs: {e}"))?;
    let mut registry: BTreeMap<String, VisSpec> = BTreeMap::new();
    for v in others {
        let s = parse_spec(&v.to_string()).map_err(|e| e.to_string())?;
        registry.insert(s.spec_id.clone(), s);
    }
    let world = immerflow_core::grammar::resolve_link(&spec, &registry).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&world).expect("similarity serializes"))
}

/// Sphere signed-distance samples on an `n³` grid over the unit cube, for
/// trying `iso_surface` without loading data.
#[wasm_bindgen]
pub fn sphere_samples(n: usize, radius: f64) -> Vec<f32> {
    kernels::synth::sphere_sdf_volume(n, radius).samples
}

#[wasm_bindgen]
pub fn iso_surface(dims: &[usize], spacing: &[f64], samples: Vec<f32>, isovalue: f64) -> Result<String, JsError> {
    iso_surface_json(dims, spacing, samples, isovalue).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn icp(source: &[f64], target: &[f64], max_iterations: usize) -> Result<String, JsError> {
    icp_json(source, target, max_iterations).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn resolve_link(spec: &str, placed: &str) -> Result<String, JsError> {
    resolve_link_json(spec, placed).map_err(|e| JsError::new(&e))
}
