use std::str::FromStr;

use super::loaders::{load_input, InputKind};
use super::{as_device, as_stream, sensor_choices};
use crate::dataflow::{Category, EvalOutput, NodeError, NodeSpec, ParamType, Registry};
use crate::sensor::SensorKind;
use crate::transform::RigidTransform;
use crate::value::{DataKind, DataValue, StreamHandle, Table};

pub(super) fn register(r: &mut Registry) {
    r.register(
        NodeSpec::new("XRDeviceConnector", Category::Device, |req| {
            let hub = req.ctx.hub()?;
            let key = hub.attach_device(req.params.text("username")?, req.params.text("password")?)?;
            Ok(EvalOutput::single("device", DataValue::DeviceKey(key)))
        })
        .describe("Connects an XR device using the credentials it displays")
        .param("username", ParamType::Text, "")
        .param("password", ParamType::Text, "")
        .output("device", DataKind::DeviceKey),
    );

    r.register(
        NodeSpec::new("DataFile", Category::Input, |req| {
            let v = load_input(InputKind::DataFile, &req.ctx.data_root, req.params.text("path")?)?;
            Ok(EvalOutput::single("table", v))
        })
        .describe("Loads a table from .json (array of objects) or .csv")
        .required_param("path", ParamType::Path)
        .output("table", DataKind::Table),
    );

    r.register(
        NodeSpec::new("ImageData", Category::Input, |req| {
            let mut v = load_input(InputKind::ImageData, &req.ctx.data_root, req.params.text("path")?)?;
            // A recorded frame may carry the camera pose it was taken from.
            if let Some(pose) = req.params.json::<RigidTransform>("pose")? {
                if let DataValue::Image2D(img) = &mut v {
                    std::sync::Arc::make_mut(img).pose = Some(pose);
                }
            }
            Ok(EvalOutput::single("image", v))
        })
        .describe("Loads a .png or .pgm image; 16-bit gray is depth in millimeters")
        .required_param("path", ParamType::Path)
        .optional_param("pose", ParamType::Json)
        .output("image", DataKind::Image2D),
    );

    r.register(
        NodeSpec::new("Image3DFile", Category::Input, |req| {
            let v = load_input(InputKind::Image3DFile, &req.ctx.data_root, req.params.text("path")?)?;
            Ok(EvalOutput::single("volume", v))
        })
        .describe("Loads a .raw volume described by a .json sidecar")
        .required_param("path", ParamType::Path)
        .output("volume", DataKind::Volume3D),
    );

    r.register(
        NodeSpec::new("XRInput", Category::Input, |req| {
            let device = as_device("device", req.input("device")?)?;
            let kind = SensorKind::from_str(req.params.text("sensor")?).map_err(NodeError::Param)?;
            Ok(EvalOutput::single(
                "stream",
                DataValue::StreamHandle(StreamHandle {
                    device_key: device.clone(),
                    kind,
                }),
            ))
        })
        .describe("Selects one sensor stream of a connected device")
        .input("device", DataKind::DeviceKey)
        .param("sensor", ParamType::Choice(sensor_choices()), "HeadPose")
        .output("stream", DataKind::StreamHandle),
    );

    r.register(
        NodeSpec::new("DataQueue", Category::Input, |req| {
            let stream = as_stream("stream", req.input("stream")?)?;
            let capacity = req.params.integer("capacity")?;
            let window = req.params.integer("window")?;
            if capacity < 1 || window < 0 {
                return Err(NodeError::Param("capacity must be positive".into()));
            }
            let subscription = format!("{}/{}", req.ctx.workspace, req.node_id);
            let queue = req.ctx.hub()?.subscribe(
                &subscription,
                &stream.device_key,
                stream.kind,
                capacity as usize,
            )?;
            let table: Table = queue.dequeue_window(window as usize);
            Ok(EvalOutput::single("table", DataValue::table(table)))
        })
        .describe("Buffers the latest sensor records and exposes a window as a table")
        .input("stream", DataKind::StreamHandle)
        .param("capacity", ParamType::Integer, 64.0)
        .param("window", ParamType::Integer, 64.0)
        .output("table", DataKind::Table),
    );
}
