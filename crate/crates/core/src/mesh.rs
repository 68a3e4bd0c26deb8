//! Tetrahedral discretization of the body: node/element connectivity,
//! boundary tagging, candidate crack faces, and Dirichlet data.

use crate::error::{Error, Result};
use crate::tensor::{vec, Vec3};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

/// Sorted node triple identifying a face independently of orientation.
pub type FaceKey = [usize; 3];

pub fn face_key(nodes: [usize; 3]) -> FaceKey {
    let mut k = nodes;
    k.sort_unstable();
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryTag {
    /// Dirichlet part of the boundary.
    Gamma0,
    /// Free part of the boundary.
    Gamma1,
}

/// Immutable tetrahedral body mesh.
#[derive(Debug, Clone)]
pub struct BodyMesh {
    pub nodes: Vec<Vec3>,
    /// Positively oriented node 4-tuples.
    pub tets: Vec<[usize; 4]>,
    pub boundary_faces: Vec<([usize; 3], BoundaryTag)>,
    /// Candidate crack faces; must be interior.
    pub candidate_faces: Vec<[usize; 3]>,
    /// Dirichlet values per Gamma0 node.
    pub dirichlet: BTreeMap<usize, Vec3>,
    /// Face incidence: sorted triple -> incident tet ids.
    face_tets: HashMap<FaceKey, Vec<usize>>,
}

/// Local corner triples of a tet's four faces.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

pub fn tet_volume(nodes: &[Vec3], tet: &[usize; 4]) -> f64 {
    let a = vec::sub(&nodes[tet[1]], &nodes[tet[0]]);
    let b = vec::sub(&nodes[tet[2]], &nodes[tet[0]]);
    let c = vec::sub(&nodes[tet[3]], &nodes[tet[0]]);
    vec::dot(&vec::cross(&a, &b), &c) / 6.0
}

pub fn triangle_area(nodes: &[Vec3], f: &[usize; 3]) -> f64 {
    let a = vec::sub(&nodes[f[1]], &nodes[f[0]]);
    let b = vec::sub(&nodes[f[2]], &nodes[f[0]]);
    vec::norm(&vec::cross(&a, &b)) / 2.0
}

impl BodyMesh {
    /// Builds the mesh and validates every structural invariant.
    pub fn new(
        nodes: Vec<Vec3>,
        tets: Vec<[usize; 4]>,
        boundary_faces: Vec<([usize; 3], BoundaryTag)>,
        candidate_faces: Vec<[usize; 3]>,
        dirichlet: BTreeMap<usize, Vec3>,
    ) -> Result<BodyMesh> {
        let mut face_tets: HashMap<FaceKey, Vec<usize>> = HashMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for corner in tet {
                if *corner >= nodes.len() {
                    return Err(Error::Validation(format!(
                        "tet {t} references node {corner} out of range"
                    )));
                }
            }
            for f in &TET_FACES {
                let key = face_key([tet[f[0]], tet[f[1]], tet[f[2]]]);
                face_tets.entry(key).or_default().push(t);
            }
        }
        let mesh = BodyMesh {
            nodes,
            tets,
            boundary_faces,
            candidate_faces,
            dirichlet,
            face_tets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        for (t, tet) in self.tets.iter().enumerate() {
            let v = tet_volume(&self.nodes, tet);
            if v <= 0.0 {
                return Err(Error::Validation(format!(
                    "tet {t} has non-positive volume {v}"
                )));
            }
        }
        for (incidence, tets) in &self.face_tets {
            if tets.len() > 2 {
                return Err(Error::Validation(format!(
                    "face {incidence:?} shared by {} tets",
                    tets.len()
                )));
            }
        }
        for (f, _) in &self.boundary_faces {
            let key = face_key(*f);
            match self.face_tets.get(&key) {
                Some(ts) if ts.len() == 1 => {}
                Some(_) => {
                    return Err(Error::Validation(format!(
                        "tagged boundary face {f:?} is interior"
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "tagged boundary face {f:?} is not a tet face"
                    )))
                }
            }
        }
        for (i, f) in self.candidate_faces.iter().enumerate() {
            let key = face_key(*f);
            match self.face_tets.get(&key) {
                Some(ts) if ts.len() == 2 => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "candidate crack face {i} {f:?} is not an interior face"
                    )))
                }
            }
        }
        if self.gamma0_area() <= 0.0 {
            return Err(Error::Validation("Gamma0 has zero total area".into()));
        }
        for (f, tag) in &self.boundary_faces {
            if *tag == BoundaryTag::Gamma0 {
                for n in f {
                    if !self.dirichlet.contains_key(n) {
                        return Err(Error::Validation(format!(
                            "Gamma0 node {n} has no Dirichlet value"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn gamma0_area(&self) -> f64 {
        self.boundary_area(BoundaryTag::Gamma0)
    }

    pub fn gamma1_area(&self) -> f64 {
        self.boundary_area(BoundaryTag::Gamma1)
    }

    fn boundary_area(&self, tag: BoundaryTag) -> f64 {
        self.boundary_faces
            .iter()
            .filter(|(_, t)| *t == tag)
            .map(|(f, _)| triangle_area(&self.nodes, f))
            .sum()
    }

    /// The two tets adjacent to an interior face.
    pub fn face_adjacency(&self, key: &FaceKey) -> Option<(usize, usize)> {
        match self.face_tets.get(key).map(|v| v.as_slice()) {
            Some([a, b]) => Some((*a.min(b), *a.max(b))),
            _ => None,
        }
    }

    pub fn candidate_key(&self, idx: usize) -> FaceKey {
        face_key(self.candidate_faces[idx])
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for n in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(n[k]);
                hi[k] = hi[k].max(n[k]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        vec::norm(&vec::sub(&hi, &lo))
    }

    pub fn total_volume(&self) -> f64 {
        self.tets.iter().map(|t| tet_volume(&self.nodes, t)).sum()
    }

    /// Scale-invariant default tolerance for trace-jump detection.
    pub fn jump_tolerance(&self) -> f64 {
        1e-8 * self.bbox_diagonal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen;

    #[test]
    fn cube_fixture_counts() {
        let mesh = meshgen::unit_cube().unwrap();
        assert_eq!(mesh.nodes.len(), 8);
        assert_eq!(mesh.tets.len(), 6);
        // 12 boundary triangles on the cube, 6 interior faces.
        assert_eq!(mesh.boundary_faces.len(), 12);
        assert_eq!(mesh.candidate_faces.len(), 6);
        assert!((mesh.total_volume() - 1.0).abs() < 1e-14);
        assert!((mesh.gamma0_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverted_tet_is_rejected_with_index() {
        let mesh = meshgen::unit_cube().unwrap();
        let mut tets = mesh.tets.clone();
        tets[3].swap(0, 1);
        let err = BodyMesh::new(
            mesh.nodes.clone(),
            tets,
            mesh.boundary_faces.clone(),
            mesh.candidate_faces.clone(),
            mesh.dirichlet.clone(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("tet 3"), "{err}");
    }

    #[test]
    fn boundary_face_as_candidate_is_rejected() {
        let mesh = meshgen::unit_cube().unwrap();
        let bface = mesh.boundary_faces[0].0;
        let err = BodyMesh::new(
            mesh.nodes.clone(),
            mesh.tets.clone(),
            mesh.boundary_faces.clone(),
            vec![bface],
            mesh.dirichlet.clone(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn missing_dirichlet_is_rejected() {
        let mesh = meshgen::unit_cube().unwrap();
        let err = BodyMesh::new(
            mesh.nodes.clone(),
            mesh.tets.clone(),
            mesh.boundary_faces.clone(),
            mesh.candidate_faces.clone(),
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}
