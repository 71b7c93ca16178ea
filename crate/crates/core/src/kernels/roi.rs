use super::KernelError;
use crate::transform::{Similarity, Vec3};
use crate::value::Volume3D;

const SNAP: f64 = 1e-9;

/// Sub-volume under a world-space box.
///
/// The box (`center ± extent / 2`) is mapped through the inverse of the
/// transform under which the volume is displayed, then into index space. The
/// result holds every voxel whose index coordinates fall inside the box's
/// bounding range, clamped to the volume.
pub fn extract_roi(
    volume: &Volume3D,
    center: Vec3,
    extent: Vec3,
    vis_transform: &Similarity,
) -> Result<Volume3D, KernelError> {
    volume.validate()?;
    if extent.iter().any(|&e| !(e > 0.0) || !e.is_finite()) || !vis_transform.is_valid() {
        return Err(KernelError::BadExtent);
    }
    let to_local = vis_transform.inverse();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for corner in 0..8 {
        let mut p = center;
        for a in 0..3 {
            let sign = if corner & (1 << a) != 0 { 0.5 } else { -0.5 };
            p[a] += sign * extent[a];
        }
        let local = to_local.apply(p);
        for a in 0..3 {
            let g = (local[a] - volume.origin[a]) / volume.spacing[a];
            lo[a] = lo[a].min(g);
            hi[a] = hi[a].max(g);
        }
    }
    let mut start = [0usize; 3];
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let last = (volume.dims[a] - 1) as f64;
        let first_idx = (lo[a] - SNAP).ceil().max(0.0);
        let last_idx = (hi[a] + SNAP).floor().min(last);
        if first_idx > last_idx {
            return Err(KernelError::RoiOutsideVolume);
        }
        start[a] = first_idx as usize;
        dims[a] = (last_idx - first_idx) as usize + 1;
    }
    let mut samples = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            let row = volume.index(start[0], start[1] + j, start[2] + k);
            samples.extend_from_slice(&volume.samples[row..row + dims[0]]);
        }
    }
    Ok(Volume3D {
        dims,
        spacing: volume.spacing,
        origin: volume.world_position(start[0], start[1], start[2]),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::RigidTransform;

    fn ramp(n: usize) -> Volume3D {
        let samples = (0..n * n * n).map(|i| i as f32).collect();
        Volume3D::new([n; 3], [0.01; 3], [0.2, -0.1, 0.0], samples).unwrap()
    }

    #[test]
    fn identity_full_roi_copies_everything() {
        let v = ramp(8);
        let out = extract_roi(&v, v.center(), v.physical_size(), &Similarity::identity()).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn disjoint_box_is_rejected() {
        let v = ramp(8);
        let err = extract_roi(&v, [10.0, 10.0, 10.0], [0.1; 3], &Similarity::identity());
        assert_eq!(err, Err(KernelError::RoiOutsideVolume));
    }

    #[test]
    fn axis_aligned_slab_matches_slicing() {
        let n = 64;
        let v = ramp(n);
        let sp = v.spacing[0];
        let center = [
            v.origin[0] + 31.5 * sp,
            v.origin[1] + 31.5 * sp,
            v.origin[2] + 31.5 * sp,
        ];
        let out = extract_roi(&v, center, [32.0 * sp; 3], &Similarity::identity()).unwrap();
        assert_eq!(out.dims, [32; 3]);
        // Slicing oracle: direct triple loop over [16, 48)³.
        let mut expected = Vec::new();
        for k in 16..48 {
            for j in 16..48 {
                for i in 16..48 {
                    expected.push(v.sample(i, j, k));
                }
            }
        }
        let bytes = |s: &[f32]| s.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>();
        assert_eq!(bytes(&out.samples), bytes(&expected));
        assert_eq!(out.origin, v.world_position(16, 16, 16));
    }

    #[test]
    fn displayed_transform_is_undone() {
        let v = ramp(16);
        // Volume shown scaled x2 and shifted; a box around the shown center
        // maps back onto the true center.
        let shown = Similarity::new(RigidTransform::from_translation([1.0, 0.0, 0.0]), 2.0);
        let c = shown.apply(v.center());
        let whole = v.physical_size().map(|e| e * 2.0);
        let out = extract_roi(&v, c, whole, &shown).unwrap();
        assert_eq!(out.dims, v.dims);
    }
}
