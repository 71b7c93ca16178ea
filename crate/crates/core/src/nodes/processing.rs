use std::collections::BTreeMap;
use std::sync::Arc;

use super::{as_image, as_mesh, as_points, as_pose, as_spec, as_volume};
use crate::dataflow::{Category, EvalOutput, NodeError, NodeSpec, ParamType, Registry};
use crate::grammar::{resolve_link, Link, LinkError, Scale, VisSpec};
use crate::kernels::{
    compute_curvature, extract_roi, iso_surface, register_icp, select_region, volume_to_points,
    IcpParams, Intrinsics, KernelWarning, PixelRect,
};
use crate::transform::{RigidTransform, Similarity};
use crate::value::{DataKind, DataValue, Mesh};

fn with_warnings(out: EvalOutput, warnings: Vec<KernelWarning>) -> EvalOutput {
    warnings.into_iter().fold(out, |o, w| o.warn(w.to_string()))
}

fn transform_mesh(mesh: &Mesh, t: &RigidTransform) -> Mesh {
    let r = t.rotation_matrix();
    Mesh {
        vertices: mesh.vertices.iter().map(|p| t.apply(*p)).collect(),
        normals: mesh.normals.as_ref().map(|ns| {
            ns.iter()
                .map(|n| {
                    let v = r * nalgebra::Vector3::from(*n);
                    [v.x, v.y, v.z]
                })
                .collect()
        }),
        triangles: mesh.triangles.clone(),
        vertex_scalars: mesh.vertex_scalars.clone(),
    }
}

fn is_linear_axis(spec: &VisSpec, field: &str) -> bool {
    spec.channel_for_field(field)
        .is_some_and(|(_, enc)| matches!(enc.scale, Scale::Linear { .. }))
}

pub(super) fn register(r: &mut Registry) {
    r.register(
        NodeSpec::new("IsoSurface", Category::Data, |req| {
            let v = as_volume("volume", req.input("volume")?)?;
            let out = iso_surface(v, req.params.number("isovalue")?)?;
            Ok(with_warnings(
                EvalOutput::single("mesh", DataValue::mesh(out.value)),
                out.warnings,
            ))
        })
        .describe("Marching-cubes surface at an isovalue")
        .input("volume", DataKind::Volume3D)
        .param("isovalue", ParamType::Number, 0.0)
        .output("mesh", DataKind::Mesh),
    );

    r.register(
        NodeSpec::new("VolumeToPoints", Category::Data, |req| {
            let v = as_volume("volume", req.input("volume")?)?;
            let stride = req.params.integer("stride")?;
            if stride < 1 {
                return Err(NodeError::Param("stride must be positive".into()));
            }
            let out = volume_to_points(v, req.params.number("threshold")?, stride as usize)?;
            Ok(with_warnings(
                EvalOutput::single("points", DataValue::points(out.value)),
                out.warnings,
            ))
        })
        .describe("One point per voxel at or above a threshold")
        .input("volume", DataKind::Volume3D)
        .param("threshold", ParamType::Number, 0.5)
        .param("stride", ParamType::Integer, 1.0)
        .output("points", DataKind::PointCloud),
    );

    r.register(
        NodeSpec::new("RegionSelection", Category::Data, |req| {
            let img = as_image("image", req.input("image")?)?;
            let p = req.params;
            let coord = |name: &str| -> Result<u32, NodeError> {
                let v = p.integer(name)?;
                u32::try_from(v).map_err(|_| NodeError::Param(format!("`{name}` must be >= 0")))
            };
            let rect = PixelRect {
                u0: coord("u0")?,
                v0: coord("v0")?,
                u1: coord("u1")?,
                v1: coord("v1")?,
            };
            let intrinsics = Intrinsics {
                fx: p.number("fx")?,
                fy: p.number("fy")?,
                cx: p.number("cx")?,
                cy: p.number("cy")?,
            };
            let cloud = select_region(img, rect, intrinsics)?;
            Ok(EvalOutput::single("points", DataValue::points(cloud)))
        })
        .describe("Back-projects a pixel rectangle of a depth image into world points")
        .input("image", DataKind::Image2D)
        .param("u0", ParamType::Integer, 0.0)
        .param("v0", ParamType::Integer, 0.0)
        .param("u1", ParamType::Integer, 0.0)
        .param("v1", ParamType::Integer, 0.0)
        .param("fx", ParamType::Number, 365.0)
        .param("fy", ParamType::Number, 365.0)
        .param("cx", ParamType::Number, 256.0)
        .param("cy", ParamType::Number, 212.0)
        .output("points", DataKind::PointCloud),
    );

    r.register(
        NodeSpec::new("ICPRegistration", Category::Data, |req| {
            let src = as_points("source", req.input("source")?)?;
            let tgt = as_points("target", req.input("target")?)?;
            let iters = req.params.integer("max_iterations")?;
            if iters < 1 {
                return Err(NodeError::Param("max_iterations must be positive".into()));
            }
            let params = IcpParams {
                max_iterations: iters as usize,
                tolerance: req.params.number("tolerance")?,
            };
            let res = register_icp(src, tgt, params)?;
            let mut out = EvalOutput::single("pose", DataValue::Pose(res.transform))
                .with("rms", DataValue::Scalar(res.rms));
            if !res.converged {
                out = out.warn(KernelWarning::IterationCap(res.iterations).to_string());
            }
            Ok(out)
        })
        .describe("Rigid transform aligning the source cloud to the target (point-to-point ICP)")
        .input("source", DataKind::PointCloud)
        .input("target", DataKind::PointCloud)
        .param("max_iterations", ParamType::Integer, 100.0)
        .param("tolerance", ParamType::Number, 1e-8)
        .output("pose", DataKind::Pose)
        .output("rms", DataKind::Scalar),
    );

    r.register(
        NodeSpec::new("ApplyTransform", Category::Data, |req| {
            let mesh = as_mesh("mesh", req.input("mesh")?)?;
            let pose = as_pose("pose", req.input("pose")?)?;
            Ok(EvalOutput::single(
                "mesh",
                DataValue::mesh(transform_mesh(mesh, pose)),
            ))
        })
        .describe("Moves a mesh by a rigid transform")
        .input("mesh", DataKind::Mesh)
        .input("pose", DataKind::Pose)
        .output("mesh", DataKind::Mesh),
    );

    r.register(
        NodeSpec::new("CurvatureCalculation", Category::Data, |req| {
            let mesh = as_mesh("mesh", req.input("mesh")?)?;
            let out = compute_curvature(mesh)?;
            Ok(with_warnings(
                EvalOutput::single("mesh", DataValue::mesh(out.value)),
                out.warnings,
            ))
        })
        .describe("Per-vertex mean curvature stored as vertex scalars")
        .input("mesh", DataKind::Mesh)
        .output("mesh", DataKind::Mesh),
    );

    r.register(
        NodeSpec::new("FindVolumeROI", Category::Data, |req| {
            let volume = as_volume("volume", req.input("volume")?)?;
            let center = as_pose("center", req.input("center")?)?.translation;
            // The volume may be displayed under a transform; the box is
            // given in world space around the tapped point.
            let shown = match req.opt_input("spec") {
                Some(v) => resolve_link(as_spec("spec", v)?, &BTreeMap::new())?,
                None => Similarity::identity(),
            };
            let p = req.params;
            let extent = [p.number("extent_x")?, p.number("extent_y")?, p.number("extent_z")?];
            let roi = extract_roi(volume, center, extent, &shown)?;
            Ok(EvalOutput::single("volume", DataValue::volume(roi)))
        })
        .describe("Sub-volume inside a world-space box centered on a position")
        .input("volume", DataKind::Volume3D)
        .input("center", DataKind::Pose)
        .optional_input("spec", DataKind::VisSpec)
        .param("extent_x", ParamType::Number, 0.1)
        .param("extent_y", ParamType::Number, 0.1)
        .param("extent_z", ParamType::Number, 0.1)
        .output("volume", DataKind::Volume3D),
    );

    r.register(
        NodeSpec::new("TargetPosition", Category::Position, |req| {
            let p = req.params;
            let offset = RigidTransform::from_translation([p.number("x")?, p.number("y")?, p.number("z")?]);
            let pose = match req.opt_input("pose") {
                Some(v) => as_pose("pose", v)?.compose(&offset),
                None => offset,
            };
            Ok(EvalOutput::single("position", DataValue::Pose(pose)))
        })
        .describe("A world position, optionally offset from an input pose")
        .optional_input("pose", DataKind::Pose)
        .param("x", ParamType::Number, 0.0)
        .param("y", ParamType::Number, 0.0)
        .param("z", ParamType::Number, 0.0)
        .output("position", DataKind::Pose),
    );

    r.register(
        NodeSpec::new("VisLinking", Category::Position, |req| {
            let spec = as_spec("spec", req.input("spec")?)?;
            let target = as_spec("target", req.input("target")?)?;
            if spec.spec_id == target.spec_id
                || target.link.as_ref().and_then(Link::target_spec) == Some(spec.spec_id.as_str())
            {
                return Err(LinkError::Cycle(spec.spec_id.clone()).into());
            }
            let link = match req.params.text("link")? {
                "axis" => {
                    let field = req.params.text("field")?;
                    for s in [&**spec, &**target] {
                        if !is_linear_axis(s, field) {
                            return Err(LinkError::SharedFieldMissing {
                                spec_id: s.spec_id.clone(),
                                field: field.to_string(),
                            }
                            .into());
                        }
                    }
                    Link::AxisLink {
                        spec_id: target.spec_id.clone(),
                        field: field.to_string(),
                    }
                }
                _ => Link::ObjectLink {
                    spec_id: target.spec_id.clone(),
                },
            };
            let mut linked = (**spec).clone();
            linked.link = Some(link);
            let mut out = EvalOutput::single("spec", DataValue::VisSpec(Arc::new(linked.clone())));
            let mut reg = BTreeMap::new();
            reg.insert(target.spec_id.clone(), (**target).clone());
            if crate::grammar::axis_domains_differ(&linked, &reg) {
                out = out.warn("axis-linked domains differ; aligned by domain value");
            }
            Ok(out)
        })
        .describe("Places a spec relative to another by shared axis or as a group")
        .input("spec", DataKind::VisSpec)
        .input("target", DataKind::VisSpec)
        .param(
            "link",
            ParamType::Choice(vec!["axis".into(), "object".into()]),
            "axis",
        )
        .param("field", ParamType::Text, "")
        .output("spec", DataKind::VisSpec),
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transformed_mesh_keeps_unit_normals() {
        let m = Mesh {
            vertices: vec![[0.0; 3]],
            normals: Some(vec![[0.0, 0.0, 1.0]]),
            triangles: vec![],
            vertex_scalars: None,
        };
        let t = RigidTransform::from_axis_angle([1.0, 0.0, 0.0], 0.5, [1.0, 2.0, 3.0]);
        let out = transform_mesh(&m, &t);
        assert_eq!(out.vertices[0], [1.0, 2.0, 3.0]);
        out.validate().unwrap();
    }
}
