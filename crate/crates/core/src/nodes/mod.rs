//! Built-in node kinds: loaders, processing kernels, sensor abstractions,
//! encoders and renderers.

mod encoding;
mod input;
mod loaders;
mod processing;
mod sensing;

pub use loaders::{
    load_input, parse_csv_table, parse_json_table, resolve_path, write_depth_pgm, write_volume,
    InputKind, LoadError, SampleType, VolumeHeader,
};

use std::sync::Arc;

use crate::dataflow::{NodeError, Registry};
use crate::grammar::VisSpec;
use crate::sensor::SensorKind;
use crate::transform::RigidTransform;
use crate::value::{
    DataKind, DataValue, Image2D, Mesh, PointCloud, StreamHandle, Table, Volume3D,
};

/// Every built-in kind.
pub fn builtin_registry() -> Registry {
    let mut r = Registry::new();
    input::register(&mut r);
    processing::register(&mut r);
    sensing::register(&mut r);
    encoding::register(&mut r);
    r
}

fn bad(port: &str, expected: DataKind, got: &DataValue) -> NodeError {
    NodeError::BadInput {
        port: port.to_string(),
        expected,
        got: got.kind(),
    }
}

macro_rules! accessor {
    ($name:ident, $variant:ident, $ty:ty) => {
        pub(crate) fn $name<'a>(port: &str, v: &'a DataValue) -> Result<&'a $ty, NodeError> {
            match v {
                DataValue::$variant(x) => Ok(x),
                other => Err(bad(port, DataKind::$variant, other)),
            }
        }
    };
}

accessor!(as_table, Table, Arc<Table>);
accessor!(as_image, Image2D, Arc<Image2D>);
accessor!(as_volume, Volume3D, Arc<Volume3D>);
accessor!(as_mesh, Mesh, Arc<Mesh>);
accessor!(as_points, PointCloud, Arc<PointCloud>);
accessor!(as_pose, Pose, RigidTransform);
accessor!(as_spec, VisSpec, Arc<VisSpec>);
accessor!(as_device, DeviceKey, String);
accessor!(as_stream, StreamHandle, StreamHandle);

pub(crate) fn sensor_choices() -> Vec<String> {
    SensorKind::ALL.iter().map(|k| k.as_str().to_string()).collect()
}
