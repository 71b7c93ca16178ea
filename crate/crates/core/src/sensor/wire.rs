//! Length-prefixed TCP framing for sensor streams.
//!
//! ```text
//! u32 LE  frame length N
//! N bytes JSON header {device_key, kind, timestamp, payload_bytes[, pose]}
//!         followed by payload_bytes of binary body
//! ```
//!
//! Bodies: poses are 7 x f32 LE `[qx, qy, qz, qw, tx, ty, tz]`; hand joints are
//! u32 count then count x 3 f32; depth frames are u32 width, u32 height then
//! u16 millimeters row-major; color frames are u32 width, u32 height then RGBA8.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FramePayload, PoseSample, SensorFrame, SensorKind};

/// Upper bound on one frame, guarding the reader against garbage lengths.
pub const MAX_FRAME_BYTES: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("frame header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("header announces {announced} payload bytes, frame carries {actual}")]
    PayloadLength { announced: usize, actual: usize },
    #[error("truncated {0} body")]
    Truncated(&'static str),
    #[error("{kind} body is malformed: {reason}")]
    Body { kind: SensorKind, reason: String },
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub device_key: String,
    pub kind: SensorKind,
    pub timestamp: f64,
    pub payload_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<[f32; 7]>,
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn body_bytes(payload: &FramePayload) -> Vec<u8> {
    let mut out = Vec::new();
    match payload {
        FramePayload::Pose(p) => put_f32s(&mut out, &p.to_array()),
        FramePayload::Hand(joints) => {
            out.extend_from_slice(&(joints.len() as u32).to_le_bytes());
            for j in joints {
                put_f32s(&mut out, j);
            }
        }
        FramePayload::Depth {
            width,
            height,
            millimeters,
        } => {
            out.extend_from_slice(&width.to_le_bytes());
            out.extend_from_slice(&height.to_le_bytes());
            for d in millimeters {
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
        FramePayload::Color {
            width,
            height,
            rgba,
        } => {
            out.extend_from_slice(&width.to_le_bytes());
            out.extend_from_slice(&height.to_le_bytes());
            out.extend_from_slice(rgba);
        }
    }
    out
}

/// Frame payload without the length prefix.
pub fn encode_frame_payload(frame: &SensorFrame) -> Vec<u8> {
    let body = body_bytes(&frame.payload);
    let header = FrameHeader {
        device_key: frame.device_key.clone(),
        kind: frame.kind,
        timestamp: frame.timestamp,
        payload_bytes: body.len(),
        pose: frame.camera_pose.map(|p| p.to_array()),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.extend_from_slice(&body);
    out
}

/// Complete frame including the 4-byte little-endian length prefix.
pub fn encode_frame(frame: &SensorFrame) -> Vec<u8> {
    let payload = encode_frame_payload(frame);
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.bytes.len() < n {
            return Err(WireError::Truncated(self.what));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn body_error(kind: SensorKind, reason: impl Into<String>) -> WireError {
    WireError::Body {
        kind,
        reason: reason.into(),
    }
}

/// Decodes a frame payload (the bytes after the length prefix).
pub fn decode_frame_payload(bytes: &[u8]) -> Result<SensorFrame, WireError> {
    let mut stream = serde_json::Deserializer::from_slice(bytes).into_iter::<FrameHeader>();
    let header = match stream.next() {
        Some(h) => h?,
        None => return Err(WireError::Truncated("header")),
    };
    let body = &bytes[stream.byte_offset()..];
    if body.len() != header.payload_bytes {
        return Err(WireError::PayloadLength {
            announced: header.payload_bytes,
            actual: body.len(),
        });
    }
    let kind = header.kind;
    let mut r = Reader {
        bytes: body,
        what: kind.as_str(),
    };
    let payload = match kind {
        SensorKind::HeadPose | SensorKind::EyeGaze => {
            let mut a = [0f32; 7];
            for v in a.iter_mut() {
                *v = r.f32()?;
            }
            FramePayload::Pose(PoseSample::from_array(a))
        }
        SensorKind::HandJoints => {
            let n = r.u32()? as usize;
            if n.saturating_mul(12) != r.bytes.len() {
                return Err(body_error(kind, format!("{n} joints do not fill the body")));
            }
            let mut joints = Vec::with_capacity(n);
            for _ in 0..n {
                joints.push([r.f32()?, r.f32()?, r.f32()?]);
            }
            FramePayload::Hand(joints)
        }
        SensorKind::DepthFrame => {
            let (width, height) = (r.u32()?, r.u32()?);
            let n = width as usize * height as usize;
            let raw = r.take(n * 2)?;
            let millimeters = raw
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            FramePayload::Depth {
                width,
                height,
                millimeters,
            }
        }
        SensorKind::ColorFrame => {
            let (width, height) = (r.u32()?, r.u32()?);
            let n = width as usize * height as usize * 4;
            FramePayload::Color {
                width,
                height,
                rgba: r.take(n)?.to_vec(),
            }
        }
    };
    if !r.bytes.is_empty() {
        return Err(body_error(kind, format!("{} trailing bytes", r.bytes.len())));
    }
    Ok(SensorFrame {
        device_key: header.device_key,
        kind,
        timestamp: header.timestamp,
        payload,
        camera_pose: header.pose.map(PoseSample::from_array),
    })
}
