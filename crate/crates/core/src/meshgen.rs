//! Structured fixture generators: Kuhn-subdivided boxes, icospheres,
//! discs, cylinders. Used by the test suites and to pre-build the ASCII
//! fixtures that ship with the CLI.

use crate::error::Result;
use crate::mesh::{face_key, tet_volume, BodyMesh, BoundaryTag, FaceKey, TET_FACES};
use crate::tensor::Vec3;
use std::collections::{BTreeMap, HashMap, HashSet};

/// Structured box mesh: `nx * ny * nz` cells of size `h`, each split
/// into 6 tets sharing the cell's main diagonal (Kuhn subdivision, so
/// neighboring cells' face diagonals match).
///
/// * Gamma0 = the x = 0 and x = nx*h end faces, with Dirichlet data
///   `y0(x) = (lambda * x, y, z)` (identity at the x = 0 end).
/// * Candidate crack faces = all interior faces on the mid-plane
///   x = nx*h/2 when `midplane_candidates` is set (requires even nx).
pub fn structured_bar(
    nx: usize,
    ny: usize,
    nz: usize,
    h: f64,
    lambda: f64,
    midplane_candidates: bool,
) -> Result<BodyMesh> {
    assert!(nx >= 1 && ny >= 1 && nz >= 1);
    if midplane_candidates {
        assert!(nx % 2 == 0, "mid-plane candidates need even nx");
    }
    let node_id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    // rebuild in (i fastest) order matching node_id
    let mut ordered = vec![[0.0; 3]; nodes.len()];
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                ordered[node_id(i, j, k)] = [i as f64 * h, j as f64 * h, k as f64 * h];
            }
        }
    }
    let nodes = ordered;

    // 6 Kuhn tets per cell: paths from corner 000 to 111 along axis
    // permutations.
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corner = |d: [usize; 3]| node_id(i + d[0], j + d[1], k + d[2]);
                for perm in &PERMS {
                    let mut d = [0usize; 3];
                    let v0 = corner(d);
                    d[perm[0]] = 1;
                    let v1 = corner(d);
                    d[perm[1]] = 1;
                    let v2 = corner(d);
                    d[perm[2]] = 1;
                    let v3 = corner(d);
                    let mut tet = [v0, v1, v2, v3];
                    if tet_volume(&nodes, &tet) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }

    // face census for boundary detection
    let mut face_count: HashMap<FaceKey, Vec<[usize; 3]>> = HashMap::new();
    for tet in &tets {
        for f in &TET_FACES {
            let tri = [tet[f[0]], tet[f[1]], tet[f[2]]];
            face_count.entry(face_key(tri)).or_default().push(tri);
        }
    }

    let lx = nx as f64 * h;
    let on_plane = |tri: &[usize; 3], axis: usize, value: f64| {
        tri.iter().all(|&n| (nodes[n][axis] - value).abs() < 1e-12)
    };

    let mut boundary_faces = Vec::new();
    let mut candidate_faces = Vec::new();
    let mut keys: Vec<&FaceKey> = face_count.keys().collect();
    keys.sort_unstable();
    for key in keys {
        let tris = &face_count[key];
        if tris.len() == 1 {
            let tri = tris[0];
            let tag = if on_plane(&tri, 0, 0.0) || on_plane(&tri, 0, lx) {
                BoundaryTag::Gamma0
            } else {
                BoundaryTag::Gamma1
            };
            boundary_faces.push((tri, tag));
        } else if midplane_candidates && on_plane(&tris[0], 0, lx / 2.0) {
            candidate_faces.push(tris[0]);
        }
    }

    let mut dirichlet = BTreeMap::new();
    for (f, tag) in &boundary_faces {
        if *tag == BoundaryTag::Gamma0 {
            for &n in f {
                let x = nodes[n];
                dirichlet.insert(n, [lambda * x[0], x[1], x[2]]);
            }
        }
    }

    BodyMesh::new(nodes, tets, boundary_faces, candidate_faces, dirichlet)
}

/// The 6-tet unit cube fixture: Gamma0 = face x = 0 with identity
/// Dirichlet data, all 6 interior faces tagged as crack candidates.
pub fn unit_cube() -> Result<BodyMesh> {
    let bar = structured_bar(1, 1, 1, 1.0, 1.0, false)?;
    // retag: Gamma0 only at x = 0
    let boundary_faces: Vec<_> = bar
        .boundary_faces
        .iter()
        .map(|(f, _)| {
            let tag = if f.iter().all(|&n| bar.nodes[n][0].abs() < 1e-12) {
                BoundaryTag::Gamma0
            } else {
                BoundaryTag::Gamma1
            };
            (*f, tag)
        })
        .collect();
    // all interior faces become candidates
    let mut face_count: HashMap<FaceKey, Vec<[usize; 3]>> = HashMap::new();
    for tet in &bar.tets {
        for f in &TET_FACES {
            let tri = [tet[f[0]], tet[f[1]], tet[f[2]]];
            face_count.entry(face_key(tri)).or_default().push(tri);
        }
    }
    let mut candidates = Vec::new();
    let mut keys: Vec<&FaceKey> = face_count.keys().collect();
    keys.sort_unstable();
    for key in keys {
        if face_count[key].len() == 2 {
            candidates.push(face_count[key][0]);
        }
    }
    let mut dirichlet = BTreeMap::new();
    for (f, tag) in &boundary_faces {
        if *tag == BoundaryTag::Gamma0 {
            for &n in f {
                dirichlet.insert(n, bar.nodes[n]);
            }
        }
    }
    BodyMesh::new(
        bar.nodes.clone(),
        bar.tets.clone(),
        boundary_faces,
        candidates,
        dirichlet,
    )
}

/// Triangulated surface: shared vertex list + oriented triangles.
pub struct TriSurface {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Icosphere of the given radius, `subdiv` midpoint refinements of the
/// icosahedron (20 * 4^subdiv triangles).
pub fn icosphere(radius: f64, subdiv: usize) -> TriSurface {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
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
    let norm = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [
            radius * v[0] / n,
            radius * v[1] / n,
            radius * v[2] / n,
        ]
    };
    let mut vertices: Vec<Vec3> = raw.iter().map(|&v| norm(v)).collect();
    let mut triangles: Vec<[usize; 3]> = vec![
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
    for _ in 0..subdiv {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for t in &triangles {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let m = [
                        (vertices[a][0] + vertices[b][0]) / 2.0,
                        (vertices[a][1] + vertices[b][1]) / 2.0,
                        (vertices[a][2] + vertices[b][2]) / 2.0,
                    ];
                    vertices.push(norm(m));
                    vertices.len() - 1
                });
            }
            next.push([t[0], mid[0], mid[2]]);
            next.push([t[1], mid[1], mid[0]]);
            next.push([t[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        triangles = next;
    }
    TriSurface {
        vertices,
        triangles,
    }
}

/// Flat disc of the given radius in the z = 0 plane: `rings` concentric
/// rings with `segs` angular segments (segs * (2 rings - 1) triangles).
pub fn disc(radius: f64, rings: usize, segs: usize) -> TriSurface {
    assert!(rings >= 1 && segs >= 3);
    let mut vertices: Vec<Vec3> = vec![[0.0, 0.0, 0.0]];
    for k in 1..=rings {
        let r = radius * k as f64 / rings as f64;
        for j in 0..segs {
            let t = 2.0 * std::f64::consts::PI * j as f64 / segs as f64;
            vertices.push([r * t.cos(), r * t.sin(), 0.0]);
        }
    }
    let ring_start = |k: usize| 1 + (k - 1) * segs;
    let mut triangles = Vec::new();
    for j in 0..segs {
        triangles.push([0, ring_start(1) + j, ring_start(1) + (j + 1) % segs]);
    }
    for k in 1..rings {
        let a = ring_start(k);
        let b = ring_start(k + 1);
        for j in 0..segs {
            let j1 = (j + 1) % segs;
            triangles.push([a + j, b + j, b + j1]);
            triangles.push([a + j, b + j1, a + j1]);
        }
    }
    TriSurface {
        vertices,
        triangles,
    }
}

/// Two triangles tiling the unit square in the z = 0 plane.
pub fn unit_square() -> TriSurface {
    TriSurface {
        vertices: vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ],
        triangles: vec![[0, 1, 2], [0, 2, 3]],
    }
}

/// `nx` by `ny` grid of square cells in the z = 0 plane, each split
/// into two triangles with consistent +z orientation.
pub fn flat_grid(nx: usize, ny: usize, h: f64) -> TriSurface {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 * h, j as f64 * h, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriSurface {
        vertices,
        triangles,
    }
}

/// Open axis-aligned cylinder (axis = z), radius `r`, height `h`.
pub fn open_cylinder(r: f64, h: f64, segs: usize, stacks: usize) -> TriSurface {
    let mut vertices = Vec::new();
    for k in 0..=stacks {
        let z = h * k as f64 / stacks as f64;
        for j in 0..segs {
            let t = 2.0 * std::f64::consts::PI * j as f64 / segs as f64;
            vertices.push([r * t.cos(), r * t.sin(), z]);
        }
    }
    let mut triangles = Vec::new();
    for k in 0..stacks {
        let a = k * segs;
        let b = (k + 1) * segs;
        for j in 0..segs {
            let j1 = (j + 1) % segs;
            // alternate the cell diagonal so interior vertex fans are
            // mirror-symmetric along the axis
            if (j + k) % 2 == 0 {
                triangles.push([a + j, b + j, b + j1]);
                triangles.push([a + j, b + j1, a + j1]);
            } else {
                triangles.push([a + j, b + j, a + j1]);
                triangles.push([b + j, b + j1, a + j1]);
            }
        }
    }
    TriSurface {
        vertices,
        triangles,
    }
}

/// Candidate-face indices lying on the bar mid-plane (all of them, in
/// stored order). Convenience for crack fixtures.
pub fn all_candidates(mesh: &BodyMesh) -> Vec<usize> {
    (0..mesh.candidate_faces.len()).collect()
}

/// Sanity helper used by fixtures: count of distinct candidate keys.
pub fn candidate_key_set(mesh: &BodyMesh) -> HashSet<FaceKey> {
    (0..mesh.candidate_faces.len())
        .map(|i| mesh.candidate_key(i))
        .collect()
}
