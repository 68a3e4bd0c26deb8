//! Piecewise-affine deformations with crack-induced jumps.
//!
//! Cracks are realized by mesh cutting: nodes along activated candidate
//! faces are duplicated so that elements on opposite sides carry
//! independent values. Per-element deformation gradients are exact for
//! the P1 interpolant; the minor fields `cof grad y` and `det grad y`
//! are element-constant, and their gradients are recovered by weighted
//! least squares over face-adjacent neighbors, excluding pairs that
//! straddle an activated crack face so that jumps stay out of the
//! absolutely continuous part.

use crate::energy::{eval_density, grad_density, DensitySpec};
use crate::error::{Error, Result};
use crate::mesh::{face_key, triangle_area, BodyMesh, FaceKey, TET_FACES};
use crate::tensor::{cof3, d_cof, det3, vec, Mat3, Tensor3, Vec3, ZERO_TENSOR3};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

/// Per-activated-face bookkeeping after a cut.
#[derive(Debug, Clone)]
pub struct ActiveFace {
    /// Index into the mesh's candidate face list.
    pub candidate: usize,
    /// Original (uncut) node ids in stored candidate order.
    pub orig_nodes: [usize; 3],
    pub area: f64,
    /// Adjacent elements: plus = lower tet id.
    pub tet_plus: usize,
    pub tet_minus: usize,
    /// Cut node ids seen from each side, aligned with `orig_nodes`.
    pub nodes_plus: [usize; 3],
    pub nodes_minus: [usize; 3],
}

/// Cut topology: everything derived from (mesh, activated face set)
/// that does not depend on nodal values.
#[derive(Debug, Clone)]
pub struct CutTopology {
    pub active: BTreeSet<usize>,
    /// Cut-node reference coordinates (original nodes first, then
    /// duplicates).
    pub coords: Vec<Vec3>,
    /// Original node id of each cut node.
    pub orig_of: Vec<usize>,
    /// Tets in cut numbering.
    pub tets: Vec<[usize; 4]>,
    /// Dirichlet values in cut numbering.
    pub dirichlet: BTreeMap<usize, Vec3>,
    pub volumes: Vec<f64>,
    /// Shape-function gradients per tet corner.
    pub shape_grads: Vec<[Vec3; 4]>,
    pub centroids: Vec<Vec3>,
    /// Usable face-adjacent neighbors (crack-crossing pairs excluded).
    pub neighbors: Vec<Vec<usize>>,
    /// Least-squares reconstruction coefficients per element:
    /// grad = sum_n coeff_n (value_n - value_e). Empty = degenerate
    /// stencil, gradient pinned to 0.
    pub stencil: Vec<Vec<(usize, Vec3)>>,
    pub active_faces: Vec<ActiveFace>,
    pub jump_tol: f64,
}

/// Deformation state: cut topology plus nodal values.
#[derive(Debug, Clone)]
pub struct DeformationState {
    pub topo: CutTopology,
    /// Nodal deformation values in cut numbering.
    pub y: Vec<Vec3>,
}

/// Per-element fields derived from the nodal values.
pub struct ElementFields {
    pub grads: Vec<Mat3>,
    pub cofs: Vec<Mat3>,
    pub dets: Vec<f64>,
    /// Reconstructed gradient of the cofactor field, `[k][i][j]`.
    pub d1: Vec<Tensor3>,
    /// Reconstructed gradient of the determinant field.
    pub d2: Vec<Vec3>,
}

/// A face of the deformation jump set.
#[derive(Debug, Clone, Serialize)]
pub struct JumpFace {
    pub candidate: usize,
    pub area: f64,
    pub mean_jump: f64,
    pub max_jump: f64,
}

/// Jumps of the minor fields across activated faces.
#[derive(Debug, Clone, Serialize)]
pub struct MinorFieldJumps {
    pub faces: Vec<MinorJumpFace>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinorJumpFace {
    pub candidate: usize,
    pub area: f64,
    pub cof_jump: f64,
    pub det_jump: f64,
}

/// Cuts the mesh along the given candidate faces and returns a state
/// initialized to the identity map.
pub fn cut_mesh(mesh: &BodyMesh, active: &[usize]) -> Result<DeformationState> {
    for &a in active {
        if a >= mesh.candidate_faces.len() {
            return Err(Error::Topology(format!(
                "active face {a} is not a candidate (have {})",
                mesh.candidate_faces.len()
            )));
        }
    }
    let active: BTreeSet<usize> = active.iter().copied().collect();
    let active_keys: HashSet<FaceKey> = active.iter().map(|&i| mesh.candidate_key(i)).collect();

    // incident tets per node
    let mut node_tets: HashMap<usize, Vec<usize>> = HashMap::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        for &n in tet {
            node_tets.entry(n).or_default().push(t);
        }
    }

    // nodes that may split: those on an activated face
    let mut split_nodes: BTreeSet<usize> = BTreeSet::new();
    for key in &active_keys {
        split_nodes.extend(key.iter().copied());
    }

    // component labelling of the tet fan around each split node; two
    // incident tets connect if they share a non-activated face that
    // contains the node.
    let mut coords: Vec<Vec3> = mesh.nodes.clone();
    let mut orig_of: Vec<usize> = (0..mesh.nodes.len()).collect();
    // (node, tet) -> cut node id for split nodes
    let mut corner_map: HashMap<(usize, usize), usize> = HashMap::new();

    for &n in &split_nodes {
        let fan = &node_tets[&n];
        let fan_set: HashSet<usize> = fan.iter().copied().collect();
        let mut comp: HashMap<usize, usize> = HashMap::new();
        let mut n_comp = 0;
        for &seed in fan {
            if comp.contains_key(&seed) {
                continue;
            }
            let label = n_comp;
            n_comp += 1;
            let mut stack = vec![seed];
            comp.insert(seed, label);
            while let Some(t) = stack.pop() {
                let tet = &mesh.tets[t];
                for f in &TET_FACES {
                    let tri = [tet[f[0]], tet[f[1]], tet[f[2]]];
                    if !tri.contains(&n) {
                        continue;
                    }
                    let key = face_key(tri);
                    if active_keys.contains(&key) {
                        continue;
                    }
                    if let Some((a, b)) = mesh.face_adjacency(&key) {
                        let other = if a == t { b } else { a };
                        if fan_set.contains(&other) && !comp.contains_key(&other) {
                            comp.insert(other, label);
                            stack.push(other);
                        }
                    }
                }
            }
        }
        // component 0 keeps the original id; extra components get
        // duplicated nodes in deterministic (label) order.
        let mut dup_ids = vec![n; n_comp];
        for id in dup_ids.iter_mut().take(n_comp).skip(1) {
            coords.push(mesh.nodes[n]);
            orig_of.push(n);
            *id = coords.len() - 1;
        }
        for &t in fan {
            corner_map.insert((n, t), dup_ids[comp[&t]]);
        }
    }

    let tets: Vec<[usize; 4]> = mesh
        .tets
        .iter()
        .enumerate()
        .map(|(t, tet)| {
            let mut out = *tet;
            for c in &mut out {
                if let Some(&id) = corner_map.get(&(*c, t)) {
                    *c = id;
                }
            }
            out
        })
        .collect();

    let mut dirichlet = BTreeMap::new();
    for (cut, &orig) in orig_of.iter().enumerate() {
        if let Some(&y0) = mesh.dirichlet.get(&orig) {
            dirichlet.insert(cut, y0);
        }
    }

    // per-tet reference geometry
    let mut volumes = Vec::with_capacity(tets.len());
    let mut shape_grads = Vec::with_capacity(tets.len());
    let mut centroids = Vec::with_capacity(tets.len());
    for tet in &tets {
        let x0 = coords[tet[0]];
        let e = Mat3::from_cols(
            vec::sub(&coords[tet[1]], &x0),
            vec::sub(&coords[tet[2]], &x0),
            vec::sub(&coords[tet[3]], &x0),
        );
        let d = det3(&e);
        volumes.push(d / 6.0);
        // rows of E^{-1} are the gradients of the barycentric
        // coordinates of corners 1..3.
        let inv = cof3(&e).transpose().scale(1.0 / d);
        let b1 = [inv.0[0][0], inv.0[0][1], inv.0[0][2]];
        let b2 = [inv.0[1][0], inv.0[1][1], inv.0[1][2]];
        let b3 = [inv.0[2][0], inv.0[2][1], inv.0[2][2]];
        let b0 = [
            -(b1[0] + b2[0] + b3[0]),
            -(b1[1] + b2[1] + b3[1]),
            -(b1[2] + b2[2] + b3[2]),
        ];
        shape_grads.push([b0, b1, b2, b3]);
        let mut c = [0.0; 3];
        for &n in tet {
            for k in 0..3 {
                c[k] += coords[n][k] / 4.0;
            }
        }
        centroids.push(c);
    }

    // usable neighbors: face adjacency minus activated faces
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); tets.len()];
    let mut seen: HashSet<FaceKey> = HashSet::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        for f in &TET_FACES {
            let key = face_key([tet[f[0]], tet[f[1]], tet[f[2]]]);
            if !seen.insert(key) {
                continue;
            }
            if active_keys.contains(&key) {
                continue;
            }
            if let Some((a, b)) = mesh.face_adjacency(&key) {
                let _ = t;
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
    }

    // weighted least-squares stencils (weights 1/centroid-distance)
    let mut stencil: Vec<Vec<(usize, Vec3)>> = vec![Vec::new(); tets.len()];
    for e in 0..tets.len() {
        if neighbors[e].len() < 3 {
            continue;
        }
        let mut a = Mat3::ZERO;
        let mut rows: Vec<(usize, Vec3, f64)> = Vec::new();
        for &n in &neighbors[e] {
            let dx = vec::sub(&centroids[n], &centroids[e]);
            let w = 1.0 / vec::norm(&dx);
            for i in 0..3 {
                for j in 0..3 {
                    a.0[i][j] += w * dx[i] * dx[j];
                }
            }
            rows.push((n, dx, w));
        }
        // coeff_n = A^{-1} (w_n dx_n); skip degenerate stencils.
        let d = det3(&a);
        let scale = a.max_abs();
        if d.abs() <= 1e-10 * scale * scale * scale {
            continue;
        }
        let inv = cof3(&a).transpose().scale(1.0 / d).transpose();
        stencil[e] = rows
            .into_iter()
            .map(|(n, dx, w)| (n, inv.apply(&vec::scale(&dx, w))))
            .collect();
    }

    // activated face sides
    let mut active_faces = Vec::new();
    for &cand in &active {
        let orig_nodes = mesh.candidate_faces[cand];
        let key = mesh.candidate_key(cand);
        let (tp, tm) = mesh
            .face_adjacency(&key)
            .ok_or_else(|| Error::Topology(format!("candidate {cand} lost adjacency")))?;
        let side = |t: usize| -> [usize; 3] {
            let mut out = [0usize; 3];
            for (k, &n) in orig_nodes.iter().enumerate() {
                out[k] = *corner_map.get(&(n, t)).unwrap_or(&n);
            }
            out
        };
        active_faces.push(ActiveFace {
            candidate: cand,
            orig_nodes,
            area: triangle_area(&mesh.nodes, &orig_nodes),
            tet_plus: tp,
            tet_minus: tm,
            nodes_plus: side(tp),
            nodes_minus: side(tm),
        });
    }

    let topo = CutTopology {
        active,
        coords: coords.clone(),
        orig_of,
        tets,
        dirichlet,
        volumes,
        shape_grads,
        centroids,
        neighbors,
        stencil,
        active_faces,
        jump_tol: mesh.jump_tolerance(),
    };

    Ok(DeformationState { y: coords, topo })
}

impl DeformationState {
    pub fn n_elements(&self) -> usize {
        self.topo.tets.len()
    }

    pub fn n_duplicated_nodes(&self) -> usize {
        // duplicates are exactly the tail beyond the original node count
        self.topo
            .orig_of
            .iter()
            .enumerate()
            .filter(|(cut, &orig)| *cut != orig)
            .count()
    }

    /// Overwrites Dirichlet nodes with their boundary values.
    pub fn apply_dirichlet(&mut self) {
        for (&n, &y0) in &self.topo.dirichlet {
            self.y[n] = y0;
        }
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.topo.dirichlet.contains_key(&node)
    }

    /// Per-element deformation gradient of the P1 interpolant.
    pub fn element_gradients(&self) -> Vec<Mat3> {
        self.topo
            .tets
            .iter()
            .zip(&self.topo.shape_grads)
            .map(|(tet, grads)| {
                let mut g = Mat3::ZERO;
                for (a, &n) in tet.iter().enumerate() {
                    let ya = self.y[n];
                    let ba = grads[a];
                    for j in 0..3 {
                        for i in 0..3 {
                            g.0[j][i] += ya[j] * ba[i];
                        }
                    }
                }
                g
            })
            .collect()
    }

    /// Per-element cofactor and determinant of the gradient.
    pub fn minor_fields(&self, grads: &[Mat3]) -> (Vec<Mat3>, Vec<f64>) {
        let cofs = grads.iter().map(cof3).collect();
        let dets = grads.iter().map(det3).collect();
        (cofs, dets)
    }

    /// Least-squares gradient of an arbitrary per-element scalar field
    /// over the crack-respecting stencils. Exposed so synthetic fields
    /// can exercise the reconstruction directly.
    pub fn reconstruct_scalar_field(&self, values: &[f64]) -> Vec<Vec3> {
        self.topo
            .stencil
            .iter()
            .enumerate()
            .map(|(e, st)| {
                let mut g = [0.0; 3];
                for (n, coeff) in st {
                    let dv = values[*n] - values[e];
                    for k in 0..3 {
                        g[k] += coeff[k] * dv;
                    }
                }
                g
            })
            .collect()
    }

    /// Reconstructed per-element gradients of the minor fields.
    pub fn reconstruct_minor_gradients(
        &self,
        cofs: &[Mat3],
        dets: &[f64],
    ) -> (Vec<Tensor3>, Vec<Vec3>) {
        let d2 = self.reconstruct_scalar_field(dets);
        let mut d1 = vec![ZERO_TENSOR3; cofs.len()];
        for (e, st) in self.topo.stencil.iter().enumerate() {
            for (n, coeff) in st {
                for i in 0..3 {
                    for j in 0..3 {
                        let dv = cofs[*n].0[i][j] - cofs[e].0[i][j];
                        for k in 0..3 {
                            d1[e][k][i][j] += coeff[k] * dv;
                        }
                    }
                }
            }
        }
        (d1, d2)
    }

    /// All per-element fields in one pass.
    pub fn fields(&self) -> ElementFields {
        let grads = self.element_gradients();
        let (cofs, dets) = self.minor_fields(&grads);
        let (d1, d2) = self.reconstruct_minor_gradients(&cofs, &dets);
        ElementFields {
            grads,
            cofs,
            dets,
            d1,
            d2,
        }
    }

    /// Discrete bulk energy: one-point quadrature per element. Returns
    /// `+inf` when any element has `det grad y <= 0`.
    pub fn bulk_energy(&self, spec: &DensitySpec) -> f64 {
        let f = self.fields();
        self.bulk_energy_with(spec, &f)
    }

    pub fn bulk_energy_with(&self, spec: &DensitySpec, f: &ElementFields) -> f64 {
        let mut total = 0.0;
        for e in 0..self.n_elements() {
            let w = eval_density(spec, &f.grads[e], &f.d1[e], &f.d2[e]);
            if w.is_infinite() {
                return f64::INFINITY;
            }
            total += self.topo.volumes[e] * w;
        }
        total
    }

    /// Exact gradient of the discrete bulk energy with respect to the
    /// free nodal values (Dirichlet rows zeroed). The chain rule runs
    /// through the minor fields and the reconstruction stencils.
    pub fn bulk_gradient(&self, spec: &DensitySpec) -> Result<Vec<Vec3>> {
        let f = self.fields();
        let ne = self.n_elements();

        // volume-weighted density partials
        let mut pg = Vec::with_capacity(ne);
        let mut pd1 = Vec::with_capacity(ne);
        let mut pd2 = Vec::with_capacity(ne);
        for e in 0..ne {
            let (dg, dd1, dd2) = grad_density(spec, &f.grads[e], &f.d1[e], &f.d2[e])
                .map_err(|_| Error::Domain("bulk energy is infinite".into()))?;
            let v = self.topo.volumes[e];
            pg.push(dg.scale(v));
            pd1.push(crate::tensor::t3::scale(&dd1, v));
            pd2.push(vec::scale(&dd2, v));
        }

        // adjoint of the reconstruction: sensitivities of the energy to
        // each element's cof matrix and det value.
        let mut s_cof = vec![Mat3::ZERO; ne];
        let mut s_det = vec![0.0; ne];
        for e in 0..ne {
            for (n, coeff) in &self.topo.stencil[e] {
                let alpha = vec::dot(&pd2[e], coeff);
                s_det[*n] += alpha;
                s_det[e] -= alpha;
                for i in 0..3 {
                    for j in 0..3 {
                        let beta = pd1[e][0][i][j] * coeff[0]
                            + pd1[e][1][i][j] * coeff[1]
                            + pd1[e][2][i][j] * coeff[2];
                        s_cof[*n].0[i][j] += beta;
                        s_cof[e].0[i][j] -= beta;
                    }
                }
            }
        }

        // per-element total sensitivity to G, then back to the nodes
        let mut grad = vec![[0.0; 3]; self.y.len()];
        for e in 0..ne {
            // d_cof is self-adjoint: it evaluates the adjoint too.
            let t = pg[e] + d_cof(&f.grads[e], &s_cof[e]) + cof3(&f.grads[e]).scale(s_det[e]);
            let tet = &self.topo.tets[e];
            for (a, &n) in tet.iter().enumerate() {
                let ba = self.topo.shape_grads[e][a];
                for j in 0..3 {
                    grad[n][j] += t.0[j][0] * ba[0] + t.0[j][1] * ba[1] + t.0[j][2] * ba[2];
                }
            }
        }
        for &n in self.topo.dirichlet.keys() {
            grad[n] = [0.0; 3];
        }
        Ok(grad)
    }

    /// Activated faces whose one-sided traces differ by more than `tol`
    /// (default: scale-invariant mesh tolerance) in the max norm.
    pub fn deformation_jump_set(&self, tol: Option<f64>) -> Vec<JumpFace> {
        let tol = tol.unwrap_or(self.topo.jump_tol);
        let mut out = Vec::new();
        for af in &self.topo.active_faces {
            let mut max_inf = 0.0f64;
            let mut mean = 0.0;
            for k in 0..3 {
                let d = vec::sub(&self.y[af.nodes_plus[k]], &self.y[af.nodes_minus[k]]);
                let inf = d[0].abs().max(d[1].abs()).max(d[2].abs());
                max_inf = max_inf.max(inf);
                mean += vec::norm(&d) / 3.0;
            }
            if max_inf > tol {
                out.push(JumpFace {
                    candidate: af.candidate,
                    area: af.area,
                    mean_jump: mean,
                    max_jump: max_inf,
                });
            }
        }
        out
    }

    /// Jump magnitudes of the minor fields across activated faces.
    pub fn minor_field_jumps(&self) -> MinorFieldJumps {
        let grads = self.element_gradients();
        let (cofs, dets) = self.minor_fields(&grads);
        self.minor_field_jumps_of(&cofs, &dets)
    }

    /// Same, with caller-supplied per-element fields (used by tests
    /// with synthetic fields).
    pub fn minor_field_jumps_of(&self, cofs: &[Mat3], dets: &[f64]) -> MinorFieldJumps {
        let faces = self
            .topo
            .active_faces
            .iter()
            .map(|af| MinorJumpFace {
                candidate: af.candidate,
                area: af.area,
                cof_jump: (cofs[af.tet_plus] - cofs[af.tet_minus]).frobenius(),
                det_jump: (dets[af.tet_plus] - dets[af.tet_minus]).abs(),
            })
            .collect();
        MinorFieldJumps { faces }
    }

    /// Number of connected components of the cut mesh (elements joined
    /// by shared cut nodes).
    pub fn connected_components(&self) -> usize {
        let ne = self.n_elements();
        let mut node_tets: HashMap<usize, Vec<usize>> = HashMap::new();
        for (t, tet) in self.topo.tets.iter().enumerate() {
            for &n in tet {
                node_tets.entry(n).or_default().push(t);
            }
        }
        let mut comp = vec![usize::MAX; ne];
        let mut n_comp = 0;
        for seed in 0..ne {
            if comp[seed] != usize::MAX {
                continue;
            }
            comp[seed] = n_comp;
            let mut stack = vec![seed];
            while let Some(t) = stack.pop() {
                for &n in &self.topo.tets[t] {
                    for &o in &node_tets[&n] {
                        if comp[o] == usize::MAX {
                            comp[o] = n_comp;
                            stack.push(o);
                        }
                    }
                }
            }
            n_comp += 1;
        }
        n_comp
    }

    pub fn max_y_norm(&self) -> f64 {
        self.y.iter().map(|v| vec::norm(v)).fold(0.0, f64::max)
    }

    pub fn min_det(&self) -> f64 {
        self.element_gradients()
            .iter()
            .map(det3)
            .fold(f64::INFINITY, f64::min)
    }

    /// Deformed positions of the cut nodes.
    pub fn deformed_coords(&self) -> &[Vec3] {
        &self.y
    }

    /// Total area of the deformed boundary: uncovered tet faces in the
    /// cut topology (outer boundary plus both crack flanks), measured
    /// in the deformed configuration.
    pub fn deformed_surface_area(&self) -> f64 {
        let mut count: HashMap<FaceKey, (usize, [usize; 3])> = HashMap::new();
        for tet in &self.topo.tets {
            for f in &TET_FACES {
                let tri = [tet[f[0]], tet[f[1]], tet[f[2]]];
                let e = count.entry(face_key(tri)).or_insert((0, tri));
                e.0 += 1;
            }
        }
        count
            .values()
            .filter(|(c, _)| *c == 1)
            .map(|(_, tri)| triangle_area(&self.y, tri))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{DensitySpec, EnergyParams};
    use crate::meshgen;
    use rand::{Rng, SeedableRng};

    fn w_ref() -> DensitySpec {
        DensitySpec::reference(&EnergyParams::default())
    }

    #[test]
    fn uncut_cube_has_no_duplicates() {
        let mesh = meshgen::unit_cube().unwrap();
        let state = cut_mesh(&mesh, &[]).unwrap();
        assert_eq!(state.topo.coords.len(), 8);
        assert_eq!(state.n_duplicated_nodes(), 0);
        assert!(state.deformation_jump_set(None).is_empty());
    }

    #[test]
    fn cut_rejects_non_candidate() {
        let mesh = meshgen::unit_cube().unwrap();
        assert!(matches!(
            cut_mesh(&mesh, &[99]),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn single_face_cut_duplicates_match_fan_oracle() {
        // independent oracle: for each node of the cut face, count the
        // connected components of its tet fan with the face removed.
        let mesh = meshgen::unit_cube().unwrap();
        for cand in 0..mesh.candidate_faces.len() {
            let state = cut_mesh(&mesh, &[cand]).unwrap();
            let key = mesh.candidate_key(cand);
            let mut expected = 0;
            for &n in &key {
                let fan: Vec<usize> = mesh
                    .tets
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.contains(&n))
                    .map(|(i, _)| i)
                    .collect();
                // brute-force component count
                let mut comp: Vec<usize> = (0..fan.len()).collect();
                loop {
                    let mut changed = false;
                    for a in 0..fan.len() {
                        for b in 0..fan.len() {
                            if comp[a] == comp[b] {
                                continue;
                            }
                            let ta = &mesh.tets[fan[a]];
                            let tb = &mesh.tets[fan[b]];
                            let shared: Vec<usize> = ta
                                .iter()
                                .filter(|x| tb.contains(x))
                                .copied()
                                .collect();
                            if shared.len() == 3 && shared.contains(&n) {
                                let fk = face_key([shared[0], shared[1], shared[2]]);
                                if fk != key {
                                    let m = comp[a].min(comp[b]);
                                    comp[a] = m;
                                    comp[b] = m;
                                    changed = true;
                                }
                            }
                        }
                    }
                    if !changed {
                        break;
                    }
                }
                let distinct: std::collections::HashSet<usize> = comp.into_iter().collect();
                expected += distinct.len() - 1;
            }
            assert_eq!(state.n_duplicated_nodes(), expected, "candidate {cand}");
        }
    }

    #[test]
    fn full_midplane_cut_splits_bar() {
        let mesh = meshgen::structured_bar(2, 1, 1, 1.0, 1.0, true).unwrap();
        let all: Vec<usize> = (0..mesh.candidate_faces.len()).collect();
        let state = cut_mesh(&mesh, &all).unwrap();
        assert_eq!(state.connected_components(), 2);
        let uncut = cut_mesh(&mesh, &[]).unwrap();
        assert_eq!(uncut.connected_components(), 1);
    }

    #[test]
    fn identity_gradients() {
        let mesh = meshgen::unit_cube().unwrap();
        let state = cut_mesh(&mesh, &[]).unwrap();
        for g in state.element_gradients() {
            assert!((g - Mat3::identity()).max_abs() < 1e-13);
        }
    }

    #[test]
    fn affine_gradients_exact() {
        let mesh = meshgen::structured_bar(2, 2, 2, 0.5, 1.0, true).unwrap();
        let mut state = cut_mesh(&mesh, &[]).unwrap();
        let a = Mat3([[1.2, 0.1, 0.0], [0.0, 0.9, 0.2], [0.3, 0.0, 1.1]]);
        let b = [0.5, -0.25, 1.0];
        for (n, x) in state.topo.coords.clone().iter().enumerate() {
            state.y[n] = vec::add(&a.apply(x), &b);
        }
        for g in state.element_gradients() {
            assert!((g - a).max_abs() < 1e-13);
        }
        let (cofs, dets) = state.minor_fields(&state.element_gradients());
        for (c, d) in cofs.iter().zip(&dets) {
            assert!((*c - cof3(&a)).max_abs() < 1e-12);
            assert!((d - det3(&a)).abs() < 1e-12);
        }
        // reconstructed minor gradients vanish for affine maps
        let (d1, d2) = state.reconstruct_minor_gradients(&cofs, &dets);
        for e in 0..state.n_elements() {
            assert!(crate::tensor::t3::frobenius(&d1[e]) < 1e-10);
            assert!(vec::norm(&d2[e]) < 1e-10);
        }
    }

    #[test]
    fn doubling_one_side_of_a_cut() {
        let mesh = meshgen::structured_bar(2, 1, 1, 1.0, 1.0, true).unwrap();
        let all: Vec<usize> = (0..mesh.candidate_faces.len()).collect();
        let mut state = cut_mesh(&mesh, &all).unwrap();
        // scale the right half (x in (1, 2]) about the plane x = 1
        for n in 0..state.y.len() {
            let c = state.topo.coords[n];
            if c[0] > 1.0 - 1e-9 {
                // nodes at exactly x = 1 belong to whichever side uses
                // them; scale by element membership instead.
            }
        }
        // assign per element: right-half elements double all their
        // (duplicated) nodes' x-offsets
        let mut right_nodes: HashSet<usize> = HashSet::new();
        for (e, tet) in state.topo.tets.iter().enumerate() {
            if state.topo.centroids[e][0] > 1.0 {
                right_nodes.extend(tet.iter().copied());
            }
        }
        for &n in &right_nodes {
            let c = state.topo.coords[n];
            state.y[n] = [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]];
        }
        for (e, g) in state.element_gradients().iter().enumerate() {
            let expected = if state.topo.centroids[e][0] > 1.0 {
                Mat3::identity().scale(2.0)
            } else {
                Mat3::identity()
            };
            assert!((*g - expected).max_abs() < 1e-12, "element {e}");
        }
    }

    #[test]
    fn synthetic_linear_field_reconstruction() {
        let mesh = meshgen::structured_bar(4, 4, 4, 0.25, 1.0, true).unwrap();
        let state = cut_mesh(&mesh, &[]).unwrap();
        let values: Vec<f64> = state.topo.centroids.iter().map(|c| c[0]).collect();
        let grads = state.reconstruct_scalar_field(&values);
        for (e, g) in grads.iter().enumerate() {
            if state.topo.neighbors[e].len() == 4 {
                assert!(
                    (g[0] - 1.0).abs() < 1e-10 && g[1].abs() < 1e-10 && g[2].abs() < 1e-10,
                    "element {e}: {g:?}"
                );
            }
        }
    }

    #[test]
    fn cut_plane_jump_does_not_pollute_reconstruction() {
        let mesh = meshgen::structured_bar(4, 2, 2, 0.5, 1.0, true).unwrap();
        let all: Vec<usize> = (0..mesh.candidate_faces.len()).collect();
        let state = cut_mesh(&mesh, &all).unwrap();
        // linear det field with +5 jump across the mid-plane x = 1
        let values: Vec<f64> = state
            .topo
            .centroids
            .iter()
            .map(|c| c[0] + if c[0] > 1.0 { 5.0 } else { 0.0 })
            .collect();
        let grads = state.reconstruct_scalar_field(&values);
        for (e, g) in grads.iter().enumerate() {
            if state.topo.neighbors[e].len() == 4 {
                assert!(
                    (g[0] - 1.0).abs() < 1e-10 && g[1].abs() < 1e-10 && g[2].abs() < 1e-10,
                    "element {e}: {g:?}"
                );
            }
        }
        // the jump is recorded per face (pure step field, so the jump
        // is exactly the step height)
        let step: Vec<f64> = state
            .topo
            .centroids
            .iter()
            .map(|c| if c[0] > 1.0 { 5.0 } else { 0.0 })
            .collect();
        let cofs = vec![Mat3::ZERO; state.n_elements()];
        let jumps = state.minor_field_jumps_of(&cofs, &step);
        for f in &jumps.faces {
            assert!((f.det_jump - 5.0).abs() < 1e-10);
        }
    }

    #[test]
    fn bulk_energy_identity_cube() {
        let mesh = meshgen::unit_cube().unwrap();
        let state = cut_mesh(&mesh, &[]).unwrap();
        let e = state.bulk_energy(&w_ref());
        let expected = 3.0 * 3.0f64.sqrt() + 5.0;
        assert!((e - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn bulk_energy_affine_matches_closed_form() {
        let mesh = meshgen::structured_bar(2, 2, 2, 0.5, 1.0, true).unwrap();
        let mut state = cut_mesh(&mesh, &[]).unwrap();
        let lam = 1.3;
        for (n, x) in state.topo.coords.clone().iter().enumerate() {
            state.y[n] = [lam * x[0], x[1], x[2]];
        }
        let e = state.bulk_energy(&w_ref());
        let w = eval_density(
            &w_ref(),
            &Mat3::diag(lam, 1.0, 1.0),
            &ZERO_TENSOR3,
            &[0.0; 3],
        );
        let expected = mesh.total_volume() * w;
        assert!((e - expected).abs() < 1e-12 * expected, "{e} vs {expected}");
    }

    #[test]
    fn bulk_energy_inverted_element_is_infinite() {
        let mesh = meshgen::unit_cube().unwrap();
        let mut state = cut_mesh(&mesh, &[]).unwrap();
        // collapse node 7 through the opposite face to invert elements
        state.y[7] = [-2.0, -2.0, -2.0];
        assert!(state.bulk_energy(&w_ref()).is_infinite());
        assert!(state.bulk_gradient(&w_ref()).is_err());
    }

    #[test]
    fn bulk_gradient_matches_fd_on_cube() {
        let mesh = meshgen::unit_cube().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let spec = w_ref();
        for _ in 0..5 {
            let mut state = cut_mesh(&mesh, &[]).unwrap();
            for n in 0..state.y.len() {
                if state.is_dirichlet(n) {
                    continue;
                }
                for k in 0..3 {
                    state.y[n][k] += rng.gen_range(-0.05..0.05);
                }
            }
            let g = state.bulk_gradient(&spec).unwrap();
            let h = 1e-6;
            for n in 0..state.y.len() {
                for k in 0..3 {
                    if state.is_dirichlet(n) {
                        assert_eq!(g[n][k], 0.0);
                        continue;
                    }
                    let mut sp = state.clone();
                    sp.y[n][k] += h;
                    let mut sm = state.clone();
                    sm.y[n][k] -= h;
                    let fd = (sp.bulk_energy(&spec) - sm.bulk_energy(&spec)) / (2.0 * h);
                    assert!(
                        (fd - g[n][k]).abs() <= 2e-5 * (1.0 + g[n][k].abs()),
                        "node {n} comp {k}: fd {fd} vs {}",
                        g[n][k]
                    );
                }
            }
        }
    }

    #[test]
    fn bulk_gradient_matches_fd_with_cut() {
        let mesh = meshgen::structured_bar(2, 1, 1, 1.0, 1.0, true).unwrap();
        let all: Vec<usize> = (0..mesh.candidate_faces.len()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let spec = w_ref();
        let mut state = cut_mesh(&mesh, &all).unwrap();
        for n in 0..state.y.len() {
            if state.is_dirichlet(n) {
                continue;
            }
            for k in 0..3 {
                state.y[n][k] += rng.gen_range(-0.05..0.05);
            }
        }
        let g = state.bulk_gradient(&spec).unwrap();
        let h = 1e-6;
        for n in 0..state.y.len() {
            if state.is_dirichlet(n) {
                continue;
            }
            for k in 0..3 {
                let mut sp = state.clone();
                sp.y[n][k] += h;
                let mut sm = state.clone();
                sm.y[n][k] -= h;
                let fd = (sp.bulk_energy(&spec) - sm.bulk_energy(&spec)) / (2.0 * h);
                assert!(
                    (fd - g[n][k]).abs() <= 2e-5 * (1.0 + g[n][k].abs()),
                    "node {n} comp {k}: fd {fd} vs {}",
                    g[n][k]
                );
            }
        }
    }

    #[test]
    fn translation_leaves_gradient_terms_invariant() {
        // adding a constant to every node leaves element gradients (and
        // so the energy) unchanged.
        let mesh = meshgen::unit_cube().unwrap();
        let state = cut_mesh(&mesh, &[]).unwrap();
        let e0 = state.bulk_energy(&w_ref());
        let mut shifted = state.clone();
        for y in &mut shifted.y {
            *y = vec::add(y, &[0.3, -0.2, 0.7]);
        }
        let e1 = shifted.bulk_energy(&w_ref());
        assert!((e0 - e1).abs() < 1e-12 * e0);
    }

    #[test]
    fn cut_locality_far_elements_bit_identical() {
        let mesh = meshgen::structured_bar(8, 1, 1, 0.5, 1.0, true).unwrap();
        let uncut = cut_mesh(&mesh, &[]).unwrap();
        let cut = cut_mesh(&mesh, &[0]).unwrap();
        let fu = uncut.fields();
        let fc = cut.fields();
        let spec = w_ref();
        // elements at graph distance >= 3 from the cut face's tets
        let af = &cut.topo.active_faces[0];
        let mut dist = vec![usize::MAX; uncut.n_elements()];
        dist[af.tet_plus] = 0;
        dist[af.tet_minus] = 0;
        let mut frontier = vec![af.tet_plus, af.tet_minus];
        while let Some(t) = frontier.pop() {
            for &n in &uncut.topo.neighbors[t] {
                if dist[n] > dist[t] + 1 {
                    dist[n] = dist[t] + 1;
                    frontier.push(n);
                }
            }
        }
        let mut checked = 0;
        for e in 0..uncut.n_elements() {
            if dist[e] >= 3 {
                let wu = eval_density(&spec, &fu.grads[e], &fu.d1[e], &fu.d2[e]);
                let wc = eval_density(&spec, &fc.grads[e], &fc.d1[e], &fc.d2[e]);
                assert_eq!(wu.to_bits(), wc.to_bits(), "element {e}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn jump_set_bookkeeping() {
        let mesh = meshgen::structured_bar(2, 1, 1, 1.0, 1.0, true).unwrap();
        let all: Vec<usize> = (0..mesh.candidate_faces.len()).collect();
        let mut state = cut_mesh(&mesh, &all).unwrap();
        // cut but continuous: empty jump set
        assert!(state.deformation_jump_set(Some(1e-8)).is_empty());
        // offset the right side by e1
        let mut right_nodes: HashSet<usize> = HashSet::new();
        for (e, tet) in state.topo.tets.iter().enumerate() {
            if state.topo.centroids[e][0] > 1.0 {
                right_nodes.extend(tet.iter().copied());
            }
        }
        for &n in &right_nodes {
            state.y[n][0] += 1.0;
        }
        let jumps = state.deformation_jump_set(None);
        assert_eq!(jumps.len(), state.topo.active_faces.len());
        let total_area: f64 = jumps.iter().map(|j| j.area).sum();
        let active_area: f64 = state.topo.active_faces.iter().map(|f| f.area).sum();
        assert!((total_area - active_area).abs() < 1e-12);
        for j in &jumps {
            assert!((j.mean_jump - 1.0).abs() < 1e-12);
        }
    }
}
