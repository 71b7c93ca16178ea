use super::{as_device, as_pose, as_stream};
use crate::dataflow::{Category, EvalOutput, NodeError, NodeSpec, ParamType, Registry};
use crate::sensor::{detect_air_taps, SensorFrame, SensorKind};
use crate::transform::RigidTransform;
use crate::value::{DataKind, DataValue};

fn last_tap(frames: &[SensorFrame], threshold: f64) -> Result<crate::sensor::AirTap, NodeError> {
    detect_air_taps(frames, threshold)
        .pop()
        .ok_or_else(|| NodeError::Failed("no air tap in the hand stream yet".into()))
}

pub(super) fn register(r: &mut Registry) {
    r.register(
        NodeSpec::new("GestureRecognition", Category::Sensor, |req| {
            let stream = as_stream("stream", req.input("stream")?)?;
            if stream.kind != SensorKind::HandJoints {
                return Err(NodeError::Param(format!(
                    "gesture recognition reads HandJoints, got {}",
                    stream.kind
                )));
            }
            let frames = req
                .ctx
                .hub()?
                .recent_frames(&stream.device_key, stream.kind)?;
            let tap = last_tap(&frames, req.params.number("pinch_threshold")?)?;
            Ok(EvalOutput::single(
                "pose",
                DataValue::Pose(RigidTransform::from_translation(tap.position)),
            )
            .with("timestamp", DataValue::Scalar(tap.timestamp)))
        })
        .describe("World position of the latest air tap (thumb and index pinch)")
        .input("stream", DataKind::StreamHandle)
        .param("pinch_threshold", ParamType::Number, 0.015)
        .output("pose", DataKind::Pose)
        .output("timestamp", DataKind::Scalar),
    );

    r.register(
        NodeSpec::new("MarkerTracking", Category::Sensor, |req| {
            let device = as_device("device", req.input("device")?)?;
            let pose = req
                .ctx
                .hub()?
                .marker_pose(device, req.params.text("marker")?)?;
            Ok(EvalOutput::single("pose", DataValue::Pose(pose)))
        })
        .describe("Pose of a tracked marker as reported by the device")
        .input("device", DataKind::DeviceKey)
        .required_param("marker", ParamType::Text)
        .output("pose", DataKind::Pose),
    );

    r.register(
        NodeSpec::new("GenerateSpatialAnchor", Category::Sensor, |req| {
            let at = as_pose("position", req.input("position")?)?;
            let anchor = req
                .ctx
                .hub()?
                .create_anchor(&req.ctx.workspace, at.translation)?;
            Ok(EvalOutput::single(
                "anchor",
                DataValue::Pose(RigidTransform::from_translation(anchor.position)),
            )
            .with("anchor_id", DataValue::Text(anchor.anchor_id)))
        })
        .describe("Persists a shared world anchor in the workspace")
        .input("position", DataKind::Pose)
        .output("anchor", DataKind::Pose)
        .output("anchor_id", DataKind::Text),
    );

    r.register(
        NodeSpec::new("RawCapture", Category::Sensor, |req| {
            let stream = as_stream("stream", req.input("stream")?)?;
            if !matches!(stream.kind, SensorKind::DepthFrame | SensorKind::ColorFrame) {
                return Err(NodeError::Param(format!(
                    "raw capture reads depth or color frames, got {}",
                    stream.kind
                )));
            }
            let hub = req.ctx.hub()?;
            let frames = hub.recent_frames(&stream.device_key, stream.kind)?;
            let frame = match req.params.text("trigger")? {
                "air_tap" => {
                    let hands = hub.recent_frames(&stream.device_key, SensorKind::HandJoints)?;
                    let tap = last_tap(&hands, req.params.number("pinch_threshold")?)?;
                    // Latest frame taken at or before the tap.
                    frames.iter().rev().find(|f| f.timestamp <= tap.timestamp)
                }
                _ => frames.last(),
            }
            .ok_or_else(|| NodeError::Failed(format!("no {} frame received yet", stream.kind)))?;
            let image = frame
                .to_image()
                .ok_or_else(|| NodeError::Failed("frame carries no image".into()))?;
            Ok(EvalOutput::single("image", DataValue::image(image))
                .with("timestamp", DataValue::Scalar(frame.timestamp)))
        })
        .describe("Captures a depth or color frame, latest or at the last air tap")
        .input("stream", DataKind::StreamHandle)
        .param(
            "trigger",
            ParamType::Choice(vec!["latest".into(), "air_tap".into()]),
            "latest",
        )
        .param("pinch_threshold", ParamType::Number, 0.015)
        .output("image", DataKind::Image2D)
        .output("timestamp", DataKind::Scalar),
    );
}
