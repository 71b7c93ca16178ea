//! Scripted sensor sources.

use immerflow_core::sensor::{joint, FramePayload, PoseSample, SensorFrame, SensorKind};
use immerflow_core::transform::{RigidTransform, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

fn identity_quat() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

fn default_rate() -> f64 {
    60.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    #[serde(default)]
    pub position: Vec3,
    /// Quaternion `[x, y, z, w]`.
    #[serde(default = "identity_quat")]
    pub rotation: [f64; 4],
}

/// Piecewise pose track. A single keyframe is constant for all time;
/// otherwise the domain is `[first.t, last.t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseTrack {
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    pub keyframes: Vec<Keyframe>,
}

impl PoseTrack {
    pub fn constant(position: Vec3, rotation: [f64; 4]) -> Self {
        PoseTrack {
            rate_hz: default_rate(),
            keyframes: vec![Keyframe {
                t: 0.0,
                position,
                rotation,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        if self.keyframes.is_empty() {
            return bad("track without keyframes");
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return bad("track rate must be positive");
        }
        if self.keyframes.windows(2).any(|w| w[1].t <= w[0].t) {
            return bad("keyframe times must increase");
        }
        let n = self.keyframes.iter().map(|k| {
            let q = k.rotation;
            (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
        });
        if n.into_iter().any(|n| !(n > 1e-9)) {
            return bad("keyframe rotation must be a non-zero quaternion");
        }
        Ok(())
    }

    /// Interpolated pose: linear translation, shortest-arc normalized lerp
    /// of the rotation.
    pub fn sample(&self, t: f64) -> Result<([f64; 4], Vec3), SimError> {
        let first = &self.keyframes[0];
        let last = &self.keyframes[self.keyframes.len() - 1];
        if self.keyframes.len() == 1 {
            return Ok((normalize(first.rotation), first.position));
        }
        if !(t >= first.t && t <= last.t) {
            return Err(SimError::OutOfTrackRange {
                t,
                start: first.t,
                end: last.t,
            });
        }
        let i = self
            .keyframes
            .windows(2)
            .position(|w| t <= w[1].t)
            .unwrap_or(self.keyframes.len() - 2);
        let (a, b) = (&self.keyframes[i], &self.keyframes[i + 1]);
        let u = (t - a.t) / (b.t - a.t);
        let p = [0, 1, 2].map(|k| (1.0 - u) * a.position[k] + u * b.position[k]);
        Ok((nlerp(a.rotation, b.rotation, u), p))
    }
}

fn normalize(q: [f64; 4]) -> [f64; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    q.map(|c| c / n)
}

pub fn nlerp(a: [f64; 4], b: [f64; 4], u: f64) -> [f64; 4] {
    let a = normalize(a);
    let mut b = normalize(b);
    if a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() < 0.0 {
        b = b.map(|c| -c);
    }
    normalize([0, 1, 2, 3].map(|k| (1.0 - u) * a[k] + u * b[k]))
}

/// Pose frame of `track` at time `t`, stamped `t`.
pub fn emit_tracking(
    track: &PoseTrack,
    device_key: &str,
    kind: SensorKind,
    t: f64,
) -> Result<SensorFrame, SimError> {
    let (q, p) = track.sample(t)?;
    let pose = PoseSample::from_transform(&RigidTransform::from_quaternion(q, p));
    Ok(SensorFrame::pose(device_key, kind, t, pose))
}

/// Thumb and index tip offsets from the wrist for an open hand, in meters.
const THUMB_OPEN: Vec3 = [0.03, 0.07, 0.0];
const INDEX_OPEN: Vec3 = [-0.02, 0.09, 0.0];

/// Hand joints for a wrist pose; a pinch puts both tips on `pinch_at`.
pub fn hand_frame(device_key: &str, t: f64, wrist: &RigidTransform, pinch_at: Option<Vec3>) -> SensorFrame {
    let f = |p: Vec3| p.map(|c| c as f32);
    let mut joints = vec![[0.0f32; 3]; joint::COUNT];
    joints[joint::WRIST] = f(wrist.translation);
    match pinch_at {
        Some(p) => {
            joints[joint::THUMB_TIP] = f(p);
            joints[joint::INDEX_TIP] = f(p);
        }
        None => {
            joints[joint::THUMB_TIP] = f(wrist.apply(THUMB_OPEN));
            joints[joint::INDEX_TIP] = f(wrist.apply(INDEX_OPEN));
        }
    }
    SensorFrame::hand(device_key, t, joints)
}

/// Synthetic depth camera: a flat wall with a hemispherical bump facing the
/// camera, as u16 millimeters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthSource {
    #[serde(default = "default_depth_rate")]
    pub rate_hz: f64,
    pub width: u32,
    pub height: u32,
    pub wall_mm: u16,
    /// Bump radius in pixels; its height in millimeters equals the radius
    /// scaled by `mm_per_px`.
    pub bump_radius_px: f64,
    #[serde(default = "default_mm_per_px")]
    pub mm_per_px: f64,
    #[serde(default)]
    pub camera: Option<RigidTransform>,
}

fn default_depth_rate() -> f64 {
    5.0
}

fn default_mm_per_px() -> f64 {
    1.0
}

impl DepthSource {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.width == 0 || self.height == 0 || !(self.rate_hz > 0.0) {
            return Err(SimError::InvalidScenario("depth source needs a size and a positive rate".into()));
        }
        Ok(())
    }

    pub fn millimeters(&self) -> Vec<u16> {
        let (cx, cy) = (f64::from(self.width) / 2.0, f64::from(self.height) / 2.0);
        let r = self.bump_radius_px;
        let mut out = Vec::with_capacity((self.width * self.height) as usize);
        for v in 0..self.height {
            for u in 0..self.width {
                let d2 = (f64::from(u) + 0.5 - cx).powi(2) + (f64::from(v) + 0.5 - cy).powi(2);
                let bump = if d2 < r * r { (r * r - d2).sqrt() * self.mm_per_px } else { 0.0 };
                out.push((f64::from(self.wall_mm) - bump).round().max(1.0) as u16);
            }
        }
        out
    }

    pub fn frame(&self, device_key: &str, t: f64) -> SensorFrame {
        SensorFrame {
            device_key: device_key.to_string(),
            kind: SensorKind::DepthFrame,
            timestamp: t,
            payload: FramePayload::Depth {
                width: self.width,
                height: self.height,
                millimeters: self.millimeters(),
            },
            camera_pose: self.camera.as_ref().map(PoseSample::from_transform),
        }
    }
}
