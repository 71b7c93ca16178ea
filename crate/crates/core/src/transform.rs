//! Rigid and similarity transforms.
//!
//! World frame convention everywhere in this crate: right-handed, meters, Y-up.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

const IDENTITY_ROWS: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

/// Rotation (row-major 3x3, orthonormal, det = +1) followed by translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: [f64; 9],
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: IDENTITY_ROWS,
            translation: [0.0; 3],
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            rotation: IDENTITY_ROWS,
            translation: t,
        }
    }

    pub fn from_parts(rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            rotation: matrix_to_rows(rotation),
            translation: [translation.x, translation.y, translation.z],
        }
    }

    /// Builds a transform from an `[x, y, z, w]` quaternion (normalized here).
    pub fn from_quaternion(q: [f64; 4], translation: Vec3) -> Self {
        let uq = UnitQuaternion::from_quaternion(Quaternion::new(q[3], q[0], q[1], q[2]));
        Self {
            rotation: matrix_to_rows(uq.to_rotation_matrix().matrix()),
            translation,
        }
    }

    /// Rotation by `angle` radians about `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let axis = nalgebra::Unit::new_normalize(Vector3::from(axis));
        let rot = Rotation3::from_axis_angle(&axis, angle);
        Self {
            rotation: matrix_to_rows(rot.matrix()),
            translation,
        }
    }

    /// Quaternion `[x, y, z, w]` with non-negative `w`.
    pub fn quaternion(&self) -> [f64; 4] {
        let rot = Rotation3::from_matrix_unchecked(self.rotation_matrix());
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let mut out = [q.i, q.j, q.k, q.w];
        if out[3] < 0.0 {
            out.iter_mut().for_each(|c| *c = -*c);
        }
        out
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.rotation)
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let v = self.rotation_matrix() * Vector3::from(p) + self.translation_vector();
        [v.x, v.y, v.z]
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let r = self.rotation_matrix();
        RigidTransform::from_parts(
            &(r * other.rotation_matrix()),
            &(r * other.translation_vector() + self.translation_vector()),
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation_matrix().transpose();
        RigidTransform::from_parts(&rt, &(-(rt * self.translation_vector())))
    }

    /// Largest entry of |RᵀR − I| and the determinant of R.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let r = self.rotation_matrix();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        (err, r.determinant())
    }

    /// Angle of the relative rotation between `self` and `other`, in radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation_matrix().transpose() * other.rotation_matrix();
        // atan2 stays accurate near zero where acos of the trace does not.
        let c = (rel.trace() - 1.0) / 2.0;
        let s = 0.5
            * nalgebra::Vector3::new(
                rel[(2, 1)] - rel[(1, 2)],
                rel[(0, 2)] - rel[(2, 0)],
                rel[(1, 0)] - rel[(0, 1)],
            )
            .norm();
        s.atan2(c)
    }

    pub fn translation_distance_to(&self, other: &RigidTransform) -> f64 {
        (self.translation_vector() - other.translation_vector()).norm()
    }
}

/// Rigid transform with a uniform scale: `p ↦ R (s p) + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub rotation: [f64; 9],
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for Similarity {
    fn default() -> Self {
        Self::identity()
    }
}

impl From<RigidTransform> for Similarity {
    fn from(t: RigidTransform) -> Self {
        Similarity {
            rotation: t.rotation,
            translation: t.translation,
            scale: 1.0,
        }
    }
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            rotation: IDENTITY_ROWS,
            translation: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    pub fn new(rigid: RigidTransform, scale: f64) -> Self {
        Self {
            rotation: rigid.rotation,
            translation: rigid.translation,
            scale,
        }
    }

    pub fn rigid(&self) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation,
            translation: self.translation,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.rotation)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let v = self.rotation_matrix() * (Vector3::from(p) * self.scale)
            + Vector3::from(self.translation);
        [v.x, v.y, v.z]
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Similarity) -> Similarity {
        let r = self.rotation_matrix();
        let t = r * (Vector3::from(other.translation) * self.scale) + Vector3::from(self.translation);
        Similarity {
            rotation: matrix_to_rows(&(r * other.rotation_matrix())),
            translation: [t.x, t.y, t.z],
            scale: self.scale * other.scale,
        }
    }

    /// Inverse map. Panics only on a zero scale, which [`Similarity::is_valid`] rejects.
    pub fn inverse(&self) -> Similarity {
        let rt = self.rotation_matrix().transpose();
        let inv_s = 1.0 / self.scale;
        let t = -(rt * Vector3::from(self.translation)) * inv_s;
        Similarity {
            rotation: matrix_to_rows(&rt),
            translation: [t.x, t.y, t.z],
            scale: inv_s,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.scale.is_finite()
            && self.scale > 0.0
            && self.translation.iter().all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
    }

    /// Max absolute entry difference across rotation, translation and scale.
    pub fn max_abs_diff(&self, other: &Similarity) -> f64 {
        let r = self
            .rotation
            .iter()
            .zip(&other.rotation)
            .map(|(a, b)| (a - b).abs());
        let t = self
            .translation
            .iter()
            .zip(&other.translation)
            .map(|(a, b)| (a - b).abs());
        r.chain(t)
            .chain(std::iter::once((self.scale - other.scale).abs()))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn matrix_to_rows(m: &Matrix3<f64>) -> [f64; 9] {
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quaternion_round_trip() {
        let t = RigidTransform::from_axis_angle([0.0, 1.0, 0.0], 0.7, [1.0, 2.0, 3.0]);
        let q = t.quaternion();
        let back = RigidTransform::from_quaternion(q, t.translation);
        let diff = back
            .rotation
            .iter()
            .zip(&t.rotation)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = RigidTransform::from_axis_angle([1.0, 1.0, 0.0], 1.1, [0.3, -2.0, 5.0]);
        let id = t.compose(&t.inverse());
        let p = id.apply([1.0, 2.0, 3.0]);
        assert!(distance(p, [1.0, 2.0, 3.0]) < 1e-12);

        let s = Similarity::new(t, 2.5);
        let q = s.compose(&s.inverse()).apply([-4.0, 0.5, 9.0]);
        assert!(distance(q, [-4.0, 0.5, 9.0]) < 1e-12);
    }

    #[test]
    fn similarity_compose_applies_right_first() {
        let parent = Similarity::from_translation([1.0, 1.0, 1.0]);
        let child = Similarity::from_translation([0.1, 0.0, 0.0]);
        let world = parent.compose(&child);
        assert!(distance(world.translation, [1.1, 1.0, 1.0]) < 1e-15);
    }
}
