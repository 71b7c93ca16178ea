use std::collections::HashMap;

use super::mc_tables::{EDGE_TABLE, TRI_TABLE};
use super::{Flagged, KernelError, KernelWarning};
use crate::value::{Mesh, Volume3D};

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Each table edge as (corner it starts from, axis it runs along).
const EDGES: [(usize, usize); 12] = [
    (0, 0),
    (1, 1),
    (3, 0),
    (0, 1),
    (4, 0),
    (5, 1),
    (7, 0),
    (4, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 2),
];

/// Endpoint corners of each table edge.
#[cfg(test)]
const EDGE_CORNERS: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Marching-cubes isosurface in world coordinates.
///
/// Samples below `isovalue` are inside. Vertices sit on cell edges at the
/// linearly interpolated crossing; normals follow the interpolated sample
/// gradient (pointing toward higher values) and triangle winding agrees with
/// them. Vertices on shared cell edges are welded.
pub fn iso_surface(volume: &Volume3D, isovalue: f64) -> Result<Flagged<Mesh>, KernelError> {
    volume.validate()?;
    if !isovalue.is_finite() {
        return Err(KernelError::NonFiniteIsovalue);
    }
    let [nx, ny, nz] = volume.dims;
    let mut mesh = Mesh::default();
    let mut normals: Vec<[f64; 3]> = Vec::new();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();

    if nx >= 2 && ny >= 2 && nz >= 2 {
        for k in 0..nz - 1 {
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut values = [0f64; 8];
                    let mut case = 0usize;
                    for (c, off) in CORNERS.iter().enumerate() {
                        values[c] = f64::from(volume.sample(i + off[0], j + off[1], k + off[2]));
                        if values[c] < isovalue {
                            case |= 1 << c;
                        }
                    }
                    let mask = EDGE_TABLE[case];
                    if mask == 0 {
                        continue;
                    }
                    let mut ids = [u32::MAX; 12];
                    for e in 0..12 {
                        if mask & (1 << e) == 0 {
                            continue;
                        }
                        let (corner, axis) = EDGES[e];
                        let off = CORNERS[corner];
                        let base = [i + off[0], j + off[1], k + off[2]];
                        let key = (volume.index(base[0], base[1], base[2]), axis);
                        ids[e] = *edge_vertex.entry(key).or_insert_with(|| {
                            let (p, n) = edge_crossing(volume, base, axis, isovalue);
                            mesh.vertices.push(p);
                            normals.push(n);
                            (mesh.vertices.len() - 1) as u32
                        });
                    }
                    for tri in TRI_TABLE[case].chunks_exact(3) {
                        if tri[0] < 0 {
                            break;
                        }
                        let t = [
                            ids[tri[0] as usize],
                            ids[tri[1] as usize],
                            ids[tri[2] as usize],
                        ];
                        mesh.triangles.push(orient(&mesh.vertices, &normals, t));
                    }
                }
            }
        }
    }

    fill_degenerate_normals(&mesh, &mut normals);
    mesh.normals = Some(normals);
    if mesh.triangles.is_empty() {
        return Ok(Flagged::flagged(mesh, KernelWarning::EmptySurface));
    }
    Ok(Flagged::clean(mesh))
}

fn gradient(volume: &Volume3D, p: [usize; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for axis in 0..3 {
        let n = volume.dims[axis];
        if n < 2 {
            continue;
        }
        let mut lo = p;
        let mut hi = p;
        if p[axis] > 0 {
            lo[axis] -= 1;
        }
        if p[axis] + 1 < n {
            hi[axis] += 1;
        }
        let steps = (hi[axis] - lo[axis]) as f64;
        let d = f64::from(volume.sample(hi[0], hi[1], hi[2]))
            - f64::from(volume.sample(lo[0], lo[1], lo[2]));
        g[axis] = d / (steps * volume.spacing[axis]);
    }
    g
}

fn edge_crossing(
    volume: &Volume3D,
    base: [usize; 3],
    axis: usize,
    isovalue: f64,
) -> ([f64; 3], [f64; 3]) {
    let mut other = base;
    other[axis] += 1;
    let va = f64::from(volume.sample(base[0], base[1], base[2]));
    let vb = f64::from(volume.sample(other[0], other[1], other[2]));
    let t = if vb == va {
        0.5
    } else {
        ((isovalue - va) / (vb - va)).clamp(0.0, 1.0)
    };
    let mut p = volume.world_position(base[0], base[1], base[2]);
    p[axis] += t * volume.spacing[axis];
    let ga = gradient(volume, base);
    let gb = gradient(volume, other);
    let g = [
        ga[0] + t * (gb[0] - ga[0]),
        ga[1] + t * (gb[1] - ga[1]),
        ga[2] + t * (gb[2] - ga[2]),
    ];
    (p, normalize(g).unwrap_or([0.0; 3]))
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: [f64; 3]) -> Option<[f64; 3]> {
    let len = dot(v, v).sqrt();
    (len > 1e-12).then(|| [v[0] / len, v[1] / len, v[2] / len])
}

fn face_normal(vertices: &[[f64; 3]], t: [u32; 3]) -> [f64; 3] {
    let a = vertices[t[0] as usize];
    let b = vertices[t[1] as usize];
    let c = vertices[t[2] as usize];
    cross(sub(b, a), sub(c, a))
}

fn orient(vertices: &[[f64; 3]], normals: &[[f64; 3]], t: [u32; 3]) -> [u32; 3] {
    let fnrm = face_normal(vertices, t);
    let vn = t.iter().fold([0.0; 3], |acc, &i| {
        let n = normals[i as usize];
        [acc[0] + n[0], acc[1] + n[1], acc[2] + n[2]]
    });
    if dot(fnrm, vn) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn fill_degenerate_normals(mesh: &Mesh, normals: &mut [[f64; 3]]) {
    let missing: Vec<usize> = (0..normals.len())
        .filter(|&i| normals[i] == [0.0; 3])
        .collect();
    if missing.is_empty() {
        return;
    }
    let mut acc = vec![[0.0; 3]; normals.len()];
    for &t in &mesh.triangles {
        let f = face_normal(&mesh.vertices, t);
        for &i in &t {
            let a = &mut acc[i as usize];
            a[0] += f[0];
            a[1] += f[1];
            a[2] += f[2];
        }
    }
    for i in missing {
        normals[i] = normalize(acc[i]).unwrap_or([0.0, 1.0, 0.0]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::synth;
    use std::collections::{BTreeSet, HashMap};

    #[test]
    fn tables_agree_with_corner_signs() {
        // For every case, the intersected edges are exactly those whose
        // endpoints fall on opposite sides, and the triangles use each of them.
        for case in 0..256usize {
            let below = |c: usize| case & (1 << c) != 0;
            let mut mask = 0u16;
            for (e, &(a, b)) in EDGE_CORNERS.iter().enumerate() {
                if below(a) != below(b) {
                    mask |= 1 << e;
                }
            }
            assert_eq!(mask, EDGE_TABLE[case], "edge mask for case {case}");
            let mut used = 0u16;
            for &e in TRI_TABLE[case].iter().take_while(|&&e| e >= 0) {
                used |= 1 << e;
            }
            assert_eq!(used, mask, "triangle edges for case {case}");
        }
        for (e, &(corner, axis)) in EDGES.iter().enumerate() {
            let (a, b) = EDGE_CORNERS[e];
            let mut end = CORNERS[corner];
            end[axis] += 1;
            let pair = [CORNERS[a], CORNERS[b]];
            assert!(pair.contains(&CORNERS[corner]) && pair.contains(&end), "edge {e}");
        }
    }

    #[test]
    fn constant_volume_is_flagged_empty() {
        let v = Volume3D::new([3, 3, 3], [1.0; 3], [0.0; 3], vec![5.0; 27]).unwrap();
        let out = iso_surface(&v, 7.0).unwrap();
        assert!(out.value.triangles.is_empty());
        assert!(out.has(&KernelWarning::EmptySurface));
    }

    #[test]
    fn single_corner_above_gives_one_triangle() {
        // Corner (1,1,1) above the isovalue: the surface cuts its three edges
        // at their midpoints.
        let mut samples = vec![0.0f32; 8];
        samples[1 + 2 * (1 + 2)] = 1.0;
        let v = Volume3D::new([2, 2, 2], [1.0; 3], [0.0; 3], samples).unwrap();
        let mesh = iso_surface(&v, 0.5).unwrap().value;
        assert_eq!(mesh.triangles.len(), 1);
        let got: BTreeSet<[i64; 3]> = mesh
            .vertices
            .iter()
            .map(|p| p.map(|c| (c * 2.0).round() as i64))
            .collect();
        let expected: BTreeSet<[i64; 3]> = [[2, 1, 2], [1, 2, 2], [2, 2, 1]].into_iter().collect();
        assert_eq!(got, expected);
        // Normal points toward the high corner.
        let n = mesh.normals.unwrap()[0];
        assert!(n.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn vertices_lie_on_straddling_edges() {
        let v = synth::sphere_sdf_volume(16, 0.3);
        let iso = 0.0;
        let mesh = iso_surface(&v, iso).unwrap().value;
        assert!(!mesh.vertices.is_empty());
        for p in &mesh.vertices {
            let g: Vec<f64> = (0..3).map(|a| (p[a] - v.origin[a]) / v.spacing[a]).collect();
            let frac: Vec<usize> = (0..3).filter(|&a| (g[a] - g[a].round()).abs() > 1e-9).collect();
            assert!(frac.len() <= 1, "vertex off grid edges: {p:?}");
            let axis = frac.first().copied().unwrap_or(0);
            let mut lo = [0usize; 3];
            for a in 0..3 {
                lo[a] = if a == axis { g[a].floor() as usize } else { g[a].round() as usize };
            }
            let mut hi = lo;
            hi[axis] = (hi[axis] + 1).min(v.dims[axis] - 1);
            let a = f64::from(v.sample(lo[0], lo[1], lo[2]));
            let b = f64::from(v.sample(hi[0], hi[1], hi[2]));
            assert!((a - iso) * (b - iso) <= 0.0, "edge does not straddle at {p:?}");
            let w = g[axis] - lo[axis] as f64;
            assert!((0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn torus_has_genus_one() {
        let n = 48;
        let spacing = 1.0 / (n - 1) as f64;
        let v = Volume3D::from_fn([n, n, n], [spacing; 3], [0.0; 3], |p| {
            let (x, y, z) = (p[0] - 0.5, p[1] - 0.5, p[2] - 0.5);
            let q = (x * x + z * z).sqrt() - 0.3;
            (q * q + y * y).sqrt() - 0.1
        })
        .unwrap();
        let mesh = iso_surface(&v, 0.0).unwrap().value;
        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &mesh.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
        let chi = mesh.vertices.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64;
        assert_eq!(chi, 0);
    }
}
