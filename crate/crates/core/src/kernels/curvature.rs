use std::collections::HashMap;

use super::{Flagged, KernelError, KernelWarning};
use crate::value::Mesh;

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross_norm(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    dot(c, c).sqrt()
}

/// Cotangent of the angle between `a` and `b`.
fn cot(a: [f64; 3], b: [f64; 3]) -> f64 {
    let s = cross_norm(a, b);
    if s < 1e-300 {
        return 0.0;
    }
    dot(a, b) / s
}

#[derive(Clone, Copy, PartialEq)]
enum VertexClass {
    Interior,
    Boundary,
    NonManifold,
}

fn classify(mesh: &Mesh) -> Vec<VertexClass> {
    let n = mesh.vertices.len();
    let mut edge_faces: HashMap<(u32, u32), usize> = HashMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edge_faces.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut faces = vec![0usize; n];
    for t in &mesh.triangles {
        for &v in t {
            faces[v as usize] += 1;
        }
    }
    let mut edges = vec![0usize; n];
    let mut class = vec![VertexClass::Interior; n];
    for (&(a, b), &count) in &edge_faces {
        for v in [a, b] {
            edges[v as usize] += 1;
            let c = &mut class[v as usize];
            if count > 2 {
                *c = VertexClass::NonManifold;
            } else if count == 1 && *c == VertexClass::Interior {
                *c = VertexClass::Boundary;
            }
        }
    }
    for v in 0..n {
        if faces[v] == 0 {
            class[v] = VertexClass::NonManifold;
        } else if class[v] == VertexClass::Interior && edges[v] != faces[v] {
            // Closed fans have as many edges as faces; more means several fans.
            class[v] = VertexClass::NonManifold;
        }
    }
    class
}

/// Discrete mean curvature per vertex: half the norm of the cotangent
/// Laplacian of position, normalized by the mixed Voronoi area of the
/// one-ring. Boundary and non-manifold vertices get 0 and a warning.
pub fn compute_curvature(mesh: &Mesh) -> Result<Flagged<Mesh>, KernelError> {
    mesh.validate()?;
    if mesh.triangles.is_empty() {
        return Err(KernelError::EmptyMesh);
    }
    let n = mesh.vertices.len();
    let mut laplace = vec![[0.0f64; 3]; n];
    let mut area = vec![0.0f64; n];
    let x = &mesh.vertices;

    for t in &mesh.triangles {
        let idx = [t[0] as usize, t[1] as usize, t[2] as usize];
        let p = [x[idx[0]], x[idx[1]], x[idx[2]]];
        let tri_area = 0.5 * cross_norm(sub(p[1], p[0]), sub(p[2], p[0]));
        if tri_area <= 0.0 {
            continue;
        }
        // cots[c] is the cotangent of the angle at corner c.
        let mut cots = [0.0; 3];
        let mut obtuse = None;
        for c in 0..3 {
            let (q, r) = ((c + 1) % 3, (c + 2) % 3);
            let e1 = sub(p[q], p[c]);
            let e2 = sub(p[r], p[c]);
            cots[c] = cot(e1, e2);
            if dot(e1, e2) < 0.0 {
                obtuse = Some(c);
            }
        }
        for c in 0..3 {
            let (q, r) = ((c + 1) % 3, (c + 2) % 3);
            let w = cots[c];
            let d = sub(p[q], p[r]);
            for a in 0..3 {
                laplace[idx[q]][a] += w * d[a];
                laplace[idx[r]][a] -= w * d[a];
            }
        }
        for c in 0..3 {
            let (q, r) = ((c + 1) % 3, (c + 2) % 3);
            let voronoi = match obtuse {
                None => {
                    let pq = sub(p[q], p[c]);
                    let pr = sub(p[r], p[c]);
                    (dot(pr, pr) * cots[q] + dot(pq, pq) * cots[r]) / 8.0
                }
                Some(o) if o == c => tri_area / 2.0,
                Some(_) => tri_area / 4.0,
            };
            area[idx[c]] += voronoi;
        }
    }

    let class = classify(mesh);
    let mut scalars = vec![0.0; n];
    let (mut boundary, mut nonmanifold) = (0usize, 0usize);
    for v in 0..n {
        match class[v] {
            VertexClass::Boundary => boundary += 1,
            VertexClass::NonManifold => nonmanifold += 1,
            VertexClass::Interior if area[v] > 0.0 => {
                let l = laplace[v];
                // K = L / (2A) is the mean-curvature normal times 2.
                scalars[v] = dot(l, l).sqrt() / (2.0 * area[v]) / 2.0;
            }
            VertexClass::Interior => {}
        }
    }

    let mut warnings = Vec::new();
    if boundary > 0 {
        warnings.push(KernelWarning::BoundaryVertices(boundary));
    }
    if nonmanifold > 0 {
        warnings.push(KernelWarning::NonManifoldVertices(nonmanifold));
    }
    let mut out = mesh.clone();
    out.vertex_scalars = Some(scalars);
    Ok(Flagged {
        value: out,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::synth;

    #[test]
    fn unit_icosphere_has_unit_mean_curvature() {
        let out = compute_curvature(&synth::icosphere(4, 1.0)).unwrap();
        assert!(out.warnings.is_empty());
        let s = out.value.vertex_scalars.unwrap();
        let within = s.iter().filter(|&&h| (h - 1.0).abs() <= 0.05).count();
        assert!(within as f64 >= 0.95 * s.len() as f64, "{within}/{}", s.len());
    }

    #[test]
    fn sphere_of_radius_two_has_half_curvature() {
        let s = compute_curvature(&synth::icosphere(3, 2.0))
            .unwrap()
            .value
            .vertex_scalars
            .unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn flat_grid_interior_is_zero() {
        let n = 6;
        let out = compute_curvature(&synth::planar_grid(n)).unwrap();
        assert_eq!(out.warnings, vec![KernelWarning::BoundaryVertices(4 * (n - 1))]);
        let s = out.value.vertex_scalars.unwrap();
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                assert!(s[j * n + i].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = Mesh {
            vertices: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            ..Default::default()
        };
        let out = compute_curvature(&m).unwrap();
        assert_eq!(out.value.vertex_scalars, Some(vec![0.0; 3]));
        assert_eq!(out.warnings, vec![KernelWarning::BoundaryVertices(3)]);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        assert_eq!(compute_curvature(&Mesh::default()), Err(KernelError::EmptyMesh));
    }
}
