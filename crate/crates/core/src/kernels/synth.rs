//! Synthetic geometry: analytic level sets, icospheres and grids used by the
//! demo fixtures and by tests.

use std::collections::HashMap;

use crate::value::{Mesh, Volume3D};

/// Signed distance to a sphere of `radius` centered in the unit cube,
/// sampled on `n³` points spanning `[0, 1]³`.
pub fn sphere_sdf_volume(n: usize, radius: f64) -> Volume3D {
    let spacing = 1.0 / (n - 1) as f64;
    Volume3D::from_fn([n, n, n], [spacing; 3], [0.0; 3], |p| {
        let d = [p[0] - 0.5, p[1] - 0.5, p[2] - 0.5];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - radius
    })
    .expect("sphere volume is well formed")
}

/// Icosahedron refined `subdivisions` times, vertices projected onto a sphere.
pub fn icosphere(subdivisions: usize, radius: f64) -> Mesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let project = |v: [f64; 3]| {
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / len, v[1] / len, v[2] / len]
    };
    vertices.iter_mut().for_each(|v| *v = project(*v));

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<[f64; 3]>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vertices[a as usize], vertices[b as usize]);
                vertices.push(project([
                    (p[0] + q[0]) / 2.0,
                    (p[1] + q[1]) / 2.0,
                    (p[2] + q[2]) / 2.0,
                ]));
                (vertices.len() - 1) as u32
            })
        };
        for [a, b, c] in triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }

    let normals = vertices.clone();
    Mesh {
        vertices: vertices.iter().map(|v| v.map(|c| c * radius)).collect(),
        normals: Some(normals),
        triangles,
        vertex_scalars: None,
    }
}

/// Flat `n x n` vertex grid in the y = 0 plane with unit cell size.
pub fn planar_grid(n: usize) -> Mesh {
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push([i as f64, 0.0, j as f64]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let a = (j * n + i) as u32;
            let b = a + 1;
            let c = a + n as u32;
            let d = c + 1;
            triangles.push([a, c, b]);
            triangles.push([b, c, d]);
        }
    }
    Mesh {
        vertices,
        normals: None,
        triangles,
        vertex_scalars: None,
    }
}
