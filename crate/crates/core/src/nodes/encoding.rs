use std::collections::BTreeMap;

use super::{as_device, as_pose, as_spec, as_table, as_volume};
use crate::dataflow::{Category, EvalOutput, EvalRequest, NodeError, NodeSpec, ParamType, Registry};
use crate::grammar::{
    apply_interaction, build_spec, Channel, ChannelDraft, CoordinateType, Interaction, Link, Mark,
    SpecRequest,
};
use crate::hub::RemoteError;
use crate::transform::Similarity;
use crate::value::{DataKind, DataValue};

fn encode(req: &EvalRequest, port: &str, mark: Mark) -> Result<EvalOutput, NodeError> {
    let data = req.input(port)?;
    let p = req.params;
    let spec_id = p.opt_text("spec_id").unwrap_or(req.node_id).to_string();
    let channels: BTreeMap<Channel, ChannelDraft> = p.json("channels")?.unwrap_or_default();
    let transform: Similarity = p.json("transform")?.unwrap_or_default();
    let coordinate_type = match p.text("coordinate_type")? {
        "view" => CoordinateType::View,
        _ => CoordinateType::World,
    };
    // A position input anchors the spec there, rotation included.
    let link = match req.opt_input("position") {
        Some(v) => {
            let pose = as_pose("position", v)?;
            Some(Link::TargetLink {
                position: pose.translation,
                rotation: Some(pose.rotation),
            })
        }
        None => None,
    };
    let request = SpecRequest {
        spec_id,
        mark,
        channels,
        coordinate_type,
        transform,
        link,
    };
    let spec = build_spec(data, request, req.ctx.store.as_ref())?;
    Ok(EvalOutput::single("spec", DataValue::spec(spec)))
}

fn encoding_node(kind: &str, port: &str, data: DataKind, marks: &[Mark], describe: &str) -> NodeSpec {
    let port_name = port.to_string();
    let fixed = marks.len() == 1;
    let only = marks[0];
    let mut spec = NodeSpec::new(kind, Category::Encoding, move |req| {
        let mark = if fixed {
            only
        } else {
            req.params.text("mark")?.parse().map_err(NodeError::Grammar)?
        };
        encode(req, &port_name, mark)
    })
    .describe(describe)
    .input(port, data)
    .optional_input("position", DataKind::Pose)
    .param("spec_id", ParamType::Text, "")
    .param("channels", ParamType::Json, "{}")
    .param(
        "coordinate_type",
        ParamType::Choice(vec!["world".into(), "view".into()]),
        "world",
    )
    .optional_param("transform", ParamType::Json);
    if !fixed {
        let names = marks.iter().map(|m| m.as_str().to_string()).collect();
        spec = spec.param("mark", ParamType::Choice(names), marks[0].as_str());
    }
    spec.output("spec", DataKind::VisSpec)
}

fn remote_call(req: &EvalRequest, input: &DataValue) -> Result<DataValue, NodeError> {
    let remote = req
        .ctx
        .remote
        .as_deref()
        .ok_or_else(|| RemoteError::EndpointUnreachable("no remote client".into()))?;
    let params: serde_json::Value = req.params.json("params")?.unwrap_or(serde_json::json!({}));
    let endpoint = req.params.text("endpoint")?;
    let function = req.params.text("function")?;
    Ok(remote.call(endpoint, function, &params, input)?)
}

pub(super) fn register(r: &mut Registry) {
    r.register(encoding_node(
        "VisualEncoding",
        "table",
        DataKind::Table,
        &[Mark::Point, Mark::Bar, Mark::Line, Mark::Text],
        "Encodes table fields as point, bar, line or text marks",
    ));
    r.register(encoding_node(
        "MeshEncoding",
        "mesh",
        DataKind::Mesh,
        &[Mark::Mesh],
        "Single mesh mark; color may encode vertex_scalars",
    ));
    r.register(encoding_node(
        "VolumeEncoding",
        "volume",
        DataKind::Volume3D,
        &[Mark::Volume],
        "Single volume mark with a transfer function",
    ));
    r.register(encoding_node(
        "ImageEncoding",
        "image",
        DataKind::Image2D,
        &[Mark::Image],
        "Single image mark",
    ));
    r.register(encoding_node(
        "PointCloudEncoding",
        "points",
        DataKind::PointCloud,
        &[Mark::Point],
        "Point marks at cloud positions",
    ));

    r.register(
        NodeSpec::new("SpecInteraction", Category::Encoding, |req| {
            let spec = as_spec("spec", req.input("spec")?)?;
            let actions: Vec<Interaction> = req.params.json("actions")?.unwrap_or_default();
            let mut out = (**spec).clone();
            for a in &actions {
                out = apply_interaction(&out, a)?;
            }
            Ok(EvalOutput::single("spec", DataValue::spec(out)))
        })
        .describe("Applies transform, filter and detail interactions to a spec")
        .input("spec", DataKind::VisSpec)
        .param("actions", ParamType::Json, "[]")
        .output("spec", DataKind::VisSpec),
    );

    r.register(
        NodeSpec::new("XRVisualization", Category::Rendering, |req| {
            let spec = as_spec("spec", req.input("spec")?)?;
            let device = as_device("device", req.input("device")?)?;
            let task = req.ctx.hub()?.enqueue_render(device, spec)?;
            Ok(EvalOutput::single("task", DataValue::Text(task)))
        })
        .describe("Sends a spec to an XR device's scheduler")
        .input("spec", DataKind::VisSpec)
        .input("device", DataKind::DeviceKey)
        .output("task", DataKind::Text),
    );

    r.register(
        NodeSpec::new("WebVisualization", Category::Rendering, |req| {
            let spec = as_spec("spec", req.input("spec")?)?;
            let url = req.ctx.hub()?.publish_web(&req.ctx.workspace, spec)?;
            Ok(EvalOutput::single("url", DataValue::Text(url)))
        })
        .describe("Publishes a spec for browser preview")
        .input("spec", DataKind::VisSpec)
        .output("url", DataKind::Text),
    );

    r.register(
        NodeSpec::new("Custom", Category::Data, |req| {
            let input = req.input("table")?;
            as_table("table", input)?;
            let out = remote_call(req, input)?;
            as_table("output", &out)?;
            Ok(EvalOutput::single("table", out))
        })
        .describe("Runs a remote table-to-table function")
        .input("table", DataKind::Table)
        .required_param("endpoint", ParamType::Text)
        .required_param("function", ParamType::Text)
        .optional_param("params", ParamType::Json)
        .output("table", DataKind::Table),
    );

    r.register(
        NodeSpec::new("CustomVolumeToTable", Category::Data, |req| {
            let input = req.input("volume")?;
            as_volume("volume", input)?;
            let out = remote_call(req, input)?;
            as_table("output", &out)?;
            Ok(EvalOutput::single("table", out))
        })
        .describe("Runs a remote volume-to-table function, e.g. tracing")
        .input("volume", DataKind::Volume3D)
        .required_param("endpoint", ParamType::Text)
        .required_param("function", ParamType::Text)
        .optional_param("params", ParamType::Json)
        .output("table", DataKind::Table),
    );
}
