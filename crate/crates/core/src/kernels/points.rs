use super::{Flagged, KernelError, KernelWarning};
use crate::value::{PointCloud, Volume3D};

/// One point per voxel with `sample >= threshold`, visiting every
/// `stride`-th index along each axis. Weights carry the sample values.
pub fn volume_to_points(
    volume: &Volume3D,
    threshold: f64,
    stride: usize,
) -> Result<Flagged<PointCloud>, KernelError> {
    volume.validate()?;
    if stride == 0 {
        return Err(KernelError::ZeroStride);
    }
    let [nx, ny, nz] = volume.dims;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in (0..nz).step_by(stride) {
        for j in (0..ny).step_by(stride) {
            for i in (0..nx).step_by(stride) {
                let s = volume.sample(i, j, k);
                if f64::from(s) >= threshold {
                    points.push(volume.world_position(i, j, k));
                    weights.push(f64::from(s));
                }
            }
        }
    }
    let cloud = PointCloud {
        points,
        weights: Some(weights),
    };
    if cloud.is_empty() {
        Ok(Flagged::flagged(cloud, KernelWarning::EmptySelection))
    } else {
        Ok(Flagged::clean(cloud))
    }
}
