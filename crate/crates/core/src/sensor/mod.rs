//! Sensor frames streamed from XR devices, their binary wire form, and the
//! bounded data queue that accumulates them for tabular use.

mod queue;
mod wire;

pub use queue::DataQueue;
pub use wire::{decode_frame_payload, encode_frame, encode_frame_payload, FrameHeader, WireError, MAX_FRAME_BYTES};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::transform::{RigidTransform, Vec3};
use crate::value::{Cell, Column, ColumnType, Image2D, Pixels};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorKind {
    HeadPose,
    EyeGaze,
    HandJoints,
    DepthFrame,
    ColorFrame,
}

impl SensorKind {
    pub const ALL: [SensorKind; 5] = [
        SensorKind::HeadPose,
        SensorKind::EyeGaze,
        SensorKind::HandJoints,
        SensorKind::DepthFrame,
        SensorKind::ColorFrame,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SensorKind::HeadPose => "HeadPose",
            SensorKind::EyeGaze => "EyeGaze",
            SensorKind::HandJoints => "HandJoints",
            SensorKind::DepthFrame => "DepthFrame",
            SensorKind::ColorFrame => "ColorFrame",
        }
    }

    pub fn is_tracking(&self) -> bool {
        matches!(self, SensorKind::HeadPose | SensorKind::EyeGaze)
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SensorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown sensor kind `{s}`"))
    }
}

/// Pose in its f32 wire precision: quaternion `[x, y, z, w]` then translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub rotation: [f32; 4],
    pub translation: [f32; 3],
}

impl PoseSample {
    pub fn from_transform(t: &RigidTransform) -> Self {
        let q = t.quaternion();
        PoseSample {
            rotation: q.map(|c| c as f32),
            translation: t.translation.map(|c| c as f32),
        }
    }

    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_quaternion(
            self.rotation.map(f64::from),
            self.translation.map(f64::from),
        )
    }

    pub fn to_array(&self) -> [f32; 7] {
        let [qx, qy, qz, qw] = self.rotation;
        let [tx, ty, tz] = self.translation;
        [qx, qy, qz, qw, tx, ty, tz]
    }

    pub fn from_array(a: [f32; 7]) -> Self {
        PoseSample {
            rotation: [a[0], a[1], a[2], a[3]],
            translation: [a[4], a[5], a[6]],
        }
    }
}

/// Joint slots in a `HandJoints` payload.
pub mod joint {
    pub const WRIST: usize = 0;
    pub const THUMB_TIP: usize = 1;
    pub const INDEX_TIP: usize = 2;
    pub const COUNT: usize = 3;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FramePayload {
    Pose(PoseSample),
    Hand(Vec<[f32; 3]>),
    Depth {
        width: u32,
        height: u32,
        millimeters: Vec<u16>,
    },
    Color {
        width: u32,
        height: u32,
        rgba: Vec<u8>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub device_key: String,
    pub kind: SensorKind,
    /// Seconds on the device's monotonic clock.
    pub timestamp: f64,
    pub payload: FramePayload,
    /// Camera pose for depth/color frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_pose: Option<PoseSample>,
}

impl SensorFrame {
    pub fn pose(device_key: &str, kind: SensorKind, timestamp: f64, pose: PoseSample) -> Self {
        SensorFrame {
            device_key: device_key.to_string(),
            kind,
            timestamp,
            payload: FramePayload::Pose(pose),
            camera_pose: None,
        }
    }

    pub fn hand(device_key: &str, timestamp: f64, joints: Vec<[f32; 3]>) -> Self {
        SensorFrame {
            device_key: device_key.to_string(),
            kind: SensorKind::HandJoints,
            timestamp,
            payload: FramePayload::Hand(joints),
            camera_pose: None,
        }
    }

    /// Image view of a depth or color frame, carrying the camera pose.
    pub fn to_image(&self) -> Option<Image2D> {
        let (width, height, pixels) = match &self.payload {
            FramePayload::Depth {
                width,
                height,
                millimeters,
            } => (*width, *height, Pixels::Depth16(millimeters.clone())),
            FramePayload::Color {
                width,
                height,
                rgba,
            } => (*width, *height, Pixels::Rgba8(rgba.clone())),
            _ => return None,
        };
        Some(Image2D {
            width,
            height,
            pixels,
            pose: self.camera_pose.map(|p| p.to_transform()),
        })
    }

    /// Thumb-tip to index-tip distance for hand frames.
    pub fn pinch(&self) -> Option<(f64, Vec3)> {
        let FramePayload::Hand(joints) = &self.payload else {
            return None;
        };
        if joints.len() < joint::COUNT {
            return None;
        }
        let a = joints[joint::THUMB_TIP].map(f64::from);
        let b = joints[joint::INDEX_TIP].map(f64::from);
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0];
        Some((crate::transform::distance(a, b), mid))
    }

    /// Queue row for this frame, matching [`queue_columns`] for its kind.
    pub fn to_row(&self) -> Vec<Cell> {
        let mut row = vec![Cell::Number(self.timestamp)];
        match &self.payload {
            FramePayload::Pose(p) => {
                row.extend(p.to_array().iter().map(|&v| Cell::Number(f64::from(v))));
            }
            FramePayload::Hand(joints) => {
                let (pinch, mid) = self
                    .pinch()
                    .map(|(d, m)| (Cell::Number(d), m.map(Cell::Number)))
                    .unwrap_or((Cell::Null, [Cell::Null, Cell::Null, Cell::Null]));
                row.push(Cell::Number(joints.len() as f64));
                row.push(pinch);
                row.extend(mid);
            }
            FramePayload::Depth { width, height, .. } | FramePayload::Color { width, height, .. } => {
                row.push(Cell::Number(f64::from(*width)));
                row.push(Cell::Number(f64::from(*height)));
            }
        }
        row
    }
}

/// Column schema of a data queue fed by `kind` frames.
pub fn queue_columns(kind: SensorKind) -> Vec<Column> {
    let names: &[&str] = match kind {
        SensorKind::HeadPose | SensorKind::EyeGaze => {
            &["timestamp", "qx", "qy", "qz", "qw", "tx", "ty", "tz"]
        }
        SensorKind::HandJoints => &["timestamp", "joints", "pinch", "px", "py", "pz"],
        SensorKind::DepthFrame | SensorKind::ColorFrame => &["timestamp", "width", "height"],
    };
    names
        .iter()
        .map(|n| Column {
            name: n.to_string(),
            ty: ColumnType::Number,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirTap {
    pub timestamp: f64,
    pub position: Vec3,
}

/// Air taps in a hand-joint stream: a tap fires on each frame where the pinch
/// distance drops below `pinch_threshold` after being at or above it.
pub fn detect_air_taps(frames: &[SensorFrame], pinch_threshold: f64) -> Vec<AirTap> {
    let mut taps = Vec::new();
    let mut pinched = false;
    for frame in frames {
        let Some((dist, mid)) = frame.pinch() else {
            continue;
        };
        let now = dist < pinch_threshold;
        if now && !pinched {
            taps.push(AirTap {
                timestamp: frame.timestamp,
                position: mid,
            });
        }
        pinched = now;
    }
    taps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_tips_yield_tap_at_that_point() {
        let open = SensorFrame::hand("d", 0.0, vec![[0.0; 3], [1.0, 0.1, 0.0], [1.0, -0.1, 0.0]]);
        let pinch = SensorFrame::hand("d", 0.1, vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let taps = detect_air_taps(&[open, pinch], 0.015);
        assert_eq!(taps.len(), 1);
        assert_eq!(taps[0].position, [1.0, 0.0, 0.0]);
        assert_eq!(taps[0].timestamp, 0.1);
    }

    #[test]
    fn held_pinch_is_one_tap() {
        let p = |t| SensorFrame::hand("d", t, vec![[0.0; 3], [0.5; 3], [0.5; 3]]);
        assert_eq!(detect_air_taps(&[p(0.0), p(0.1), p(0.2)], 0.015).len(), 1);
    }

    #[test]
    fn sensor_kind_parses_from_name() {
        for k in SensorKind::ALL {
            assert_eq!(k.as_str().parse::<SensorKind>().unwrap(), k);
        }
        assert!("Lidar".parse::<SensorKind>().is_err());
    }
}
