use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::transform::RigidTransform;
use crate::value::{Image2D, Pixels, PointCloud};

/// Pinhole camera model, pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Inclusive pixel bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub u0: u32,
    pub v0: u32,
    pub u1: u32,
    pub v1: u32,
}

/// Back-projects depth pixels inside `rect` into world space. Depth is
/// millimeters; zero-depth pixels are skipped. Camera space is
/// `((u - cx) d / fx, (v - cy) d / fy, d)`; the frame pose (identity when
/// absent) maps camera to world.
pub fn select_region(
    frame: &Image2D,
    rect: PixelRect,
    intrinsics: Intrinsics,
) -> Result<PointCloud, KernelError> {
    frame.validate()?;
    let Pixels::Depth16(depth) = &frame.pixels else {
        return Err(KernelError::NotDepthImage);
    };
    if !(intrinsics.fx > 0.0 && intrinsics.fy > 0.0) {
        return Err(KernelError::BadIntrinsics);
    }
    if rect.u0 > rect.u1 || rect.v0 > rect.v1 || rect.u1 >= frame.width || rect.v1 >= frame.height
    {
        return Err(KernelError::RectOutOfBounds {
            rect,
            width: frame.width,
            height: frame.height,
        });
    }
    let pose = frame.pose.unwrap_or_else(RigidTransform::identity);
    let mut points = Vec::new();
    for v in rect.v0..=rect.v1 {
        for u in rect.u0..=rect.u1 {
            let mm = depth[(v * frame.width + u) as usize];
            if mm == 0 {
                continue;
            }
            let d = f64::from(mm) / 1000.0;
            let cam = [
                (f64::from(u) - intrinsics.cx) * d / intrinsics.fx,
                (f64::from(v) - intrinsics.cy) * d / intrinsics.fy,
                d,
            ];
            points.push(pose.apply(cam));
        }
    }
    if points.is_empty() {
        return Err(KernelError::AllPixelsInvalid);
    }
    Ok(PointCloud::new(points))
}
