use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{KdTree, KernelError};
use crate::transform::{RigidTransform, Vec3};
use crate::value::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once one iteration improves the RMS by less than this.
    pub tolerance: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iterations: 100,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    /// Maps source points into the target frame.
    pub transform: RigidTransform,
    /// Nearest-neighbor RMS distance under `transform`.
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Correspondence RMS at the start of each iteration, then the final RMS.
    pub rms_history: Vec<f64>,
}

fn centroid(points: &[Vec3]) -> Vector3<f64> {
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p));
    sum / points.len() as f64
}

/// A cloud is usable when it spans at least a plane.
fn is_degenerate(points: &[Vec3]) -> bool {
    if points.len() < 3 {
        return true;
    }
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - c;
        cov += d * d.transpose();
    }
    let mut sv: Vec<f64> = cov.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    !(sv[0] > 0.0) || sv[1] <= sv[0] * 1e-12
}

/// Least-squares rotation and translation taking `source[i]` onto
/// `target[i]` (closed form via SVD of the cross-covariance). A reflection is
/// repaired by flipping the singular vector of the smallest singular value.
pub fn kabsch(source: &[Vec3], target: &[Vec3]) -> Result<RigidTransform, KernelError> {
    if is_degenerate(source) {
        return Err(KernelError::DegenerateCloud { which: "source" });
    }
    let cs = centroid(source);
    let ct = centroid(target);
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (Vector3::from(*s) - cs) * (Vector3::from(*t) - ct).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let smallest = (0..3)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(smallest, smallest)] = -1.0;
    }
    let r = v * d * u.transpose();
    let t = ct - r * cs;
    Ok(RigidTransform::from_parts(&r, &t))
}

fn correspond(tree: &KdTree, source: &[Vec3], t: &RigidTransform) -> (Vec<Vec3>, f64) {
    let mut matched = Vec::with_capacity(source.len());
    let mut sum = 0.0;
    for p in source {
        let (idx, d2) = tree.nearest(t.apply(*p)).expect("target is non-empty");
        matched.push(tree.point(idx));
        sum += d2;
    }
    (matched, (sum / source.len() as f64).sqrt())
}

/// Point-to-point ICP. Starts from the translation aligning the centroids,
/// then alternates exact nearest-neighbor matching and Kabsch alignment.
/// Hitting `max_iterations` is not an error; the best transform is returned
/// with `converged = false`.
pub fn register_icp(
    source: &PointCloud,
    target: &PointCloud,
    params: IcpParams,
) -> Result<IcpResult, KernelError> {
    source.validate()?;
    target.validate()?;
    if is_degenerate(&source.points) {
        return Err(KernelError::DegenerateCloud { which: "source" });
    }
    if is_degenerate(&target.points) {
        return Err(KernelError::DegenerateCloud { which: "target" });
    }
    let tree = KdTree::new(&target.points);
    let offset = centroid(&target.points) - centroid(&source.points);
    let mut transform = RigidTransform::from_translation([offset.x, offset.y, offset.z]);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut previous: Option<f64> = None;

    while iterations < params.max_iterations {
        let (matched, rms) = correspond(&tree, &source.points, &transform);
        history.push(rms);
        if let Some(prev) = previous {
            if prev - rms < params.tolerance {
                converged = true;
                break;
            }
        }
        if rms == 0.0 {
            converged = true;
            break;
        }
        transform = kabsch(&source.points, &matched)?;
        previous = Some(rms);
        iterations += 1;
    }

    let (_, rms) = correspond(&tree, &source.points, &transform);
    history.push(rms);
    Ok(IcpResult {
        transform,
        rms,
        iterations,
        converged,
        rms_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(-0.2..0.2),
                ]
            })
            .collect()
    }

    #[test]
    fn identical_clouds_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = PointCloud::new(random_cloud(&mut rng, 200));
        let out = register_icp(&pts, &pts, IcpParams::default()).unwrap();
        assert!(out.rms < 1e-12);
        assert!(out.transform.rotation_angle_to(&RigidTransform::identity()) < 1e-12);
        assert!(out.transform.translation_distance_to(&RigidTransform::identity()) < 1e-12);
    }

    #[test]
    fn collinear_source_is_degenerate() {
        let line = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let ok = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(
            register_icp(&line, &ok, IcpParams::default()),
            Err(KernelError::DegenerateCloud { which: "source" })
        );
    }

    #[test]
    fn kabsch_recovers_exact_correspondences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = random_cloud(&mut rng, 50);
        let truth = RigidTransform::from_axis_angle([0.2, 1.0, -0.4], 2.5, [3.0, -1.0, 0.5]);
        let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(*p)).collect();
        let est = kabsch(&src, &dst).unwrap();
        assert!(est.rotation_angle_to(&truth) < 1e-10);
        assert!(est.translation_distance_to(&truth) < 1e-10);
        let (err, det) = est.orthonormality_error();
        assert!(err < 1e-9 && (det - 1.0).abs() < 1e-9);
    }

    #[test]
    fn recovers_synthetic_transform_with_monotone_rms() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let src = random_cloud(&mut rng, 1000);
            let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let angle = rng.gen_range(0.0..30f64.to_radians());
            let t = [rng.gen_range(-0.29..0.29), rng.gen_range(-0.29..0.29), rng.gen_range(-0.29..0.29)];
            let truth = RigidTransform::from_axis_angle(axis, angle, t);
            let dst = PointCloud::new(src.iter().map(|p| truth.apply(*p)).collect());
            let out = register_icp(&PointCloud::new(src), &dst, IcpParams::default()).unwrap();
            assert!(out.transform.rotation_angle_to(&truth) < 1e-3);
            assert!(out.transform.translation_distance_to(&truth) < 1e-3);
            assert!(out.rms < 1e-6);
            for w in out.rms_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "rms increased: {:?}", out.rms_history);
            }
        }
    }
}
