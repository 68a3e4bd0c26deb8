//! Discrete integer-multiplicity curvature 2-varifolds with boundary.
//!
//! A varifold is a triangulated surface with a per-triangle integer
//! multiplicity. The curvature tensor A is estimated per vertex as the
//! tangential derivative of the projection field (least squares on
//! projection differences between adjacent triangles); the boundary is
//! the set of orientation-unmatched edges, carrying inward-conormal
//! vector weights. Both enter the crack energy and a numerical residual
//! for the first-variation identity
//!
//! ```text
//! ∫ (Π D_xφ + A D_Πφ + φ tr(A)) dV = −∫ φ d∂V
//! ```

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::meshgen::TriSurface;
use crate::tensor::{t3, vec, Mat3, Tensor3, Vec3, ZERO_TENSOR3};
use serde::Serialize;
use std::collections::BTreeMap;

/// An orientation-unmatched edge with its vector weight.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    /// Unmatched multiplicity |net| across incident triangles.
    pub multiplicity: u32,
    pub length: f64,
    /// length × inward conormal × multiplicity.
    pub weight: Vec3,
}

/// The three-term crack energy.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrackEnergyBreakdown {
    pub mass_term: f64,
    pub curvature_term: f64,
    pub boundary_term: f64,
    pub total: f64,
}

impl CrackEnergyBreakdown {
    pub const ZERO: Self = Self {
        mass_term: 0.0,
        curvature_term: 0.0,
        boundary_term: 0.0,
        total: 0.0,
    };
}

/// Triangulated surface with integer multiplicities and cached
/// geometry. Immutable after construction.
#[derive(Debug, Clone)]
pub struct DiscreteVarifold {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub theta: Vec<u32>,
    pub areas: Vec<f64>,
    pub normals: Vec<Vec3>,
    /// Per-triangle orthogonal projection onto the triangle plane.
    pub projections: Vec<Mat3>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

/// A smooth test function φ(x, Π) with analytic partials, used by the
/// first-variation residual.
pub struct TestFunction {
    pub name: String,
    value: Box<dyn Fn(&Vec3, &Mat3) -> f64 + Send + Sync>,
    dx: Box<dyn Fn(&Vec3, &Mat3) -> Vec3 + Send + Sync>,
    dpi: Box<dyn Fn(&Vec3, &Mat3) -> Mat3 + Send + Sync>,
}

impl TestFunction {
    pub fn eval(&self, x: &Vec3, p: &Mat3) -> f64 {
        (self.value)(x, p)
    }
    pub fn grad_x(&self, x: &Vec3, p: &Mat3) -> Vec3 {
        (self.dx)(x, p)
    }
    pub fn grad_pi(&self, x: &Vec3, p: &Mat3) -> Mat3 {
        (self.dpi)(x, p)
    }

    /// φ = c·x + d.
    pub fn affine(c: Vec3, d: f64) -> Self {
        Self {
            name: format!("affine({c:?},{d})"),
            value: Box::new(move |x, _| vec::dot(&c, x) + d),
            dx: Box::new(move |_, _| c),
            dpi: Box::new(|_, _| Mat3::ZERO),
        }
    }

    /// φ = x_axis · bump(x); the bump is the C¹ quartic
    /// (1 − r²/ρ²)² supported in the ball of radius ρ about `center`.
    pub fn coordinate_bump(center: Vec3, rho: f64, axis: usize) -> Self {
        Self {
            name: format!("x{axis}*bump"),
            value: Box::new(move |x, _| x[axis] * bump(x, &center, rho)),
            dx: Box::new(move |x, _| {
                let mut g = vec::scale(&bump_grad(x, &center, rho), x[axis]);
                g[axis] += bump(x, &center, rho);
                g
            }),
            dpi: Box::new(|_, _| Mat3::ZERO),
        }
    }

    /// φ = Π_{jk} · bump(x).
    pub fn projection_entry_bump(center: Vec3, rho: f64, j: usize, k: usize) -> Self {
        Self {
            name: format!("P{j}{k}*bump"),
            value: Box::new(move |x, p| p.0[j][k] * bump(x, &center, rho)),
            dx: Box::new(move |x, p| vec::scale(&bump_grad(x, &center, rho), p.0[j][k])),
            dpi: Box::new(move |x, _| {
                let mut m = Mat3::ZERO;
                m.0[j][k] = bump(x, &center, rho);
                m
            }),
        }
    }

    /// φ = x_m · Π_{jk} · bump(x).
    pub fn mixed_bump(center: Vec3, rho: f64, m: usize, j: usize, k: usize) -> Self {
        Self {
            name: format!("x{m}*P{j}{k}*bump"),
            value: Box::new(move |x, p| x[m] * p.0[j][k] * bump(x, &center, rho)),
            dx: Box::new(move |x, p| {
                let b = bump(x, &center, rho);
                let mut g = vec::scale(&bump_grad(x, &center, rho), x[m] * p.0[j][k]);
                g[m] += p.0[j][k] * b;
                g
            }),
            dpi: Box::new(move |x, _| {
                let mut d = Mat3::ZERO;
                d.0[j][k] = x[m] * bump(x, &center, rho);
                d
            }),
        }
    }
}

fn bump(x: &Vec3, center: &Vec3, rho: f64) -> f64 {
    let r2 = vec::dot(&vec::sub(x, center), &vec::sub(x, center));
    let t = 1.0 - r2 / (rho * rho);
    if t > 0.0 {
        t * t
    } else {
        0.0
    }
}

fn bump_grad(x: &Vec3, center: &Vec3, rho: f64) -> Vec3 {
    let d = vec::sub(x, center);
    let t = 1.0 - vec::dot(&d, &d) / (rho * rho);
    if t > 0.0 {
        vec::scale(&d, -4.0 * t / (rho * rho))
    } else {
        [0.0; 3]
    }
}

/// Default test family: affine functions plus bump-localized functions
/// in x and in the projection entries, all supported in the ball
/// (center, rho).
pub fn built_in_test_functions(center: Vec3, rho: f64) -> Vec<TestFunction> {
    let mut fns = vec![
        TestFunction::affine([1.0, 0.0, 0.0], 0.0),
        TestFunction::affine([0.0, 1.0, 0.0], 0.0),
        TestFunction::affine([0.0, 0.0, 1.0], 0.0),
        TestFunction::affine([0.5, -1.0, 2.0], 0.3),
    ];
    for axis in 0..3 {
        fns.push(TestFunction::coordinate_bump(center, rho, axis));
    }
    for (j, k) in [(0, 0), (0, 1), (1, 2), (2, 2)] {
        fns.push(TestFunction::projection_entry_bump(center, rho, j, k));
    }
    fns.push(TestFunction::mixed_bump(center, rho, 0, 1, 1));
    fns
}

impl DiscreteVarifold {
    /// Validates and caches areas, normals, projections, and boundary
    /// edges.
    pub fn from_triangles(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        theta: Vec<u32>,
    ) -> Result<Self> {
        if theta.len() != triangles.len() {
            return Err(Error::Value(format!(
                "{} multiplicities for {} triangles",
                theta.len(),
                triangles.len()
            )));
        }
        for (t, &m) in theta.iter().enumerate() {
            if m < 1 {
                return Err(Error::Value(format!("triangle {t} has multiplicity 0")));
            }
        }
        let mut areas = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut projections = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &n in tri {
                if n >= vertices.len() {
                    return Err(Error::Value(format!(
                        "triangle {t} references vertex {n} of {}",
                        vertices.len()
                    )));
                }
            }
            let e1 = vec::sub(&vertices[tri[1]], &vertices[tri[0]]);
            let e2 = vec::sub(&vertices[tri[2]], &vertices[tri[0]]);
            let c = vec::cross(&e1, &e2);
            let a2 = vec::norm(&c);
            if a2 <= 0.0 || !a2.is_finite() {
                return Err(Error::Geometry(format!("triangle {t} is degenerate")));
            }
            let n = vec::scale(&c, 1.0 / a2);
            areas.push(0.5 * a2);
            let mut p = Mat3::identity();
            for i in 0..3 {
                for j in 0..3 {
                    p.0[i][j] -= n[i] * n[j];
                }
            }
            normals.push(n);
            projections.push(p);
        }

        let boundary_edges =
            Self::compute_boundary(&vertices, &triangles, &theta, &areas, &normals);

        Ok(Self {
            vertices,
            triangles,
            theta,
            areas,
            normals,
            projections,
            boundary_edges,
        })
    }

    pub fn from_surface(surf: &TriSurface, theta: u32) -> Result<Self> {
        let thetas = vec![theta; surf.triangles.len()];
        Self::from_triangles(surf.vertices.clone(), surf.triangles.clone(), thetas)
    }

    pub const fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            theta: Vec::new(),
            areas: Vec::new(),
            normals: Vec::new(),
            projections: Vec::new(),
            boundary_edges: Vec::new(),
        }
    }

    fn compute_boundary(
        vertices: &[Vec3],
        triangles: &[[usize; 3]],
        theta: &[u32],
        _areas: &[f64],
        normals: &[Vec3],
    ) -> Vec<BoundaryEdge> {
        // net signed multiplicity per undirected edge; sign = does the
        // triangle traverse the edge from the smaller to the larger id.
        let mut net: BTreeMap<[usize; 2], i64> = BTreeMap::new();
        let mut incident: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = [a.min(b), a.max(b)];
                let sign = if a < b { 1 } else { -1 };
                *net.entry(key).or_insert(0) += sign * theta[t] as i64;
                incident.entry(key).or_default().push(t);
            }
        }
        let mut out = Vec::new();
        for (key, n) in net {
            if n == 0 {
                continue;
            }
            let ev = vec::sub(&vertices[key[1]], &vertices[key[0]]);
            let len = vec::norm(&ev);
            let mid = vec::scale(&vec::add(&vertices[key[0]], &vertices[key[1]]), 0.5);
            // θ-weighted sum of inward conormals over incident
            // triangles; for a single sheet this is the usual inward
            // conormal scaled by θ · length.
            let mut w = [0.0; 3];
            for &t in &incident[&key] {
                let tri = &triangles[t];
                let mut centroid = [0.0; 3];
                for &v in tri {
                    centroid = vec::add(&centroid, &vec::scale(&vertices[v], 1.0 / 3.0));
                }
                let mut con = vec::cross(&normals[t], &vec::scale(&ev, 1.0 / len));
                if vec::dot(&con, &vec::sub(&centroid, &mid)) < 0.0 {
                    con = vec::scale(&con, -1.0);
                }
                w = vec::add(&w, &vec::scale(&con, theta[t] as f64 * len));
            }
            // rescale so |weight| = |net| · length
            let norm_w = vec::norm(&w);
            let target = n.unsigned_abs() as f64 * len;
            if norm_w > 0.0 {
                w = vec::scale(&w, target / norm_w);
            }
            out.push(BoundaryEdge {
                nodes: key,
                multiplicity: n.unsigned_abs() as u32,
                length: len,
                weight: w,
            });
        }
        out
    }

    /// Total mass Σ θ · area.
    pub fn mass(&self) -> f64 {
        self.areas
            .iter()
            .zip(&self.theta)
            .map(|(a, &m)| a * m as f64)
            .sum()
    }

    /// Mass restricted to triangles whose centroid satisfies the
    /// predicate.
    pub fn weight_measure(&self, region: impl Fn(&Vec3) -> bool) -> f64 {
        let mut total = 0.0;
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut c = [0.0; 3];
            for &v in tri {
                c = vec::add(&c, &vec::scale(&self.vertices[v], 1.0 / 3.0));
            }
            if region(&c) {
                total += self.areas[t] * self.theta[t] as f64;
            }
        }
        total
    }

    /// Total boundary mass ‖∂V‖ = Σ |net| · length.
    pub fn boundary_mass(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|e| e.multiplicity as f64 * e.length)
            .sum()
    }

    /// θ-weighted vertex-lumped areas (one third of each incident
    /// triangle).
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let share = self.areas[t] * self.theta[t] as f64 / 3.0;
            for &v in tri {
                out[v] += share;
            }
        }
        out
    }

    fn incident_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Area-weighted unit normal per vertex, sign-aligned within each
    /// fan. Returns None for isolated vertices.
    fn vertex_normals(&self, incident: &[Vec<usize>]) -> Vec<Option<Vec3>> {
        incident
            .iter()
            .map(|fan| {
                let first = *fan.first()?;
                let reference = self.normals[first];
                let mut acc = [0.0; 3];
                for &t in fan {
                    let mut n = self.normals[t];
                    if vec::dot(&n, &reference) < 0.0 {
                        n = vec::scale(&n, -1.0);
                    }
                    acc = vec::add(&acc, &vec::scale(&n, self.areas[t] * self.theta[t] as f64));
                }
                let norm = vec::norm(&acc);
                if norm > 1e-14 {
                    Some(vec::scale(&acc, 1.0 / norm))
                } else {
                    Some(reference)
                }
            })
            .collect()
    }

    /// Rejects triangulations where an edge has more than two incident
    /// triangles; the curvature stencil assumes a two-sided fan.
    fn check_manifold(&self) -> Result<()> {
        let mut count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                *count.entry([a.min(b), a.max(b)]).or_insert(0) += 1;
            }
        }
        for (key, c) in count {
            if c > 2 {
                return Err(Error::NonManifold(format!(
                    "edge ({}, {}) has {c} incident triangles",
                    key[0], key[1]
                )));
            }
        }
        Ok(())
    }

    /// Per-vertex curvature tensor A, stored `[d][j][k]` with `d` the
    /// derivative direction: ΔΠ ≈ Σ_d Δx_d A[d] between triangle pairs.
    /// Least-squares fit over all pair differences in each vertex fan;
    /// fans with fewer than two independent pairs get A = 0.
    pub fn curvature(&self) -> Result<Vec<Tensor3>> {
        self.check_manifold()?;
        let incident = self.incident_triangles();
        let vnormals = self.vertex_normals(&incident);

        let centroids: Vec<Vec3> = self
            .triangles
            .iter()
            .map(|tri| {
                let mut c = [0.0; 3];
                for &v in tri {
                    c = vec::add(&c, &vec::scale(&self.vertices[v], 1.0 / 3.0));
                }
                c
            })
            .collect();

        let mut out = vec![ZERO_TENSOR3; self.vertices.len()];
        for (v, fan) in incident.iter().enumerate() {
            let Some(Some(n)) = vnormals.get(v).cloned() else {
                continue;
            };
            if fan.len() < 2 {
                continue;
            }
            // orthonormal tangent basis at the vertex
            let seed = if n[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let e1 = vec::normalize(&vec::cross(&n, &seed));
            let e2 = vec::cross(&n, &e1);

            // per-triangle centroid offsets from the vertex, in the
            // tangent frame
            let offsets: Vec<(f64, f64)> = fan
                .iter()
                .map(|&t| {
                    let dx = vec::sub(&centroids[t], &self.vertices[v]);
                    (vec::dot(&dx, &e1), vec::dot(&dx, &e2))
                })
                .collect();
            let mut samples: Vec<((f64, f64), (f64, f64), Mat3)> = Vec::new();
            for (ia, &ta) in fan.iter().enumerate() {
                for (ib, &tb) in fan.iter().enumerate().skip(ia + 1) {
                    samples.push((
                        offsets[ia],
                        offsets[ib],
                        self.projections[tb] - self.projections[ta],
                    ));
                }
            }
            if samples.is_empty() {
                continue;
            }
            // equilibrate the offsets before the polynomial fit
            let l = (offsets
                .iter()
                .map(|(s, t)| s * s + t * t)
                .sum::<f64>()
                / offsets.len() as f64)
                .sqrt();
            if l <= 0.0 {
                continue;
            }

            let (a, b) = match Self::fit_linear(&samples, l) {
                Some(ab) => ab,
                None => continue,
            };
            for j in 0..3 {
                for k in 0..3 {
                    for d in 0..3 {
                        out[v][d][j][k] = a.0[j][k] * e1[d] + b.0[j][k] * e2[d];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Linear model ΔΠ ≈ a Δs + b Δt; offsets pre-scaled by `l`.
    fn fit_linear(samples: &[((f64, f64), (f64, f64), Mat3)], l: f64) -> Option<(Mat3, Mat3)> {
        let mut m = [[0.0; 2]; 2];
        let mut r1 = Mat3::ZERO;
        let mut r2 = Mat3::ZERO;
        for ((sa, ta), (sb, tb), dpi) in samples {
            let s = (sb - sa) / l;
            let t = (tb - ta) / l;
            m[0][0] += s * s;
            m[0][1] += s * t;
            m[1][0] += s * t;
            m[1][1] += t * t;
            r1 = r1 + dpi.scale(s);
            r2 = r2 + dpi.scale(t);
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let scale = m[0][0].max(m[1][1]);
        if det <= 1e-10 * scale * scale {
            return None;
        }
        let mut a = Mat3::ZERO;
        let mut b = Mat3::ZERO;
        for j in 0..3 {
            for k in 0..3 {
                a.0[j][k] = (m[1][1] * r1.0[j][k] - m[0][1] * r2.0[j][k]) / (det * l);
                b.0[j][k] = (m[0][0] * r2.0[j][k] - m[1][0] * r1.0[j][k]) / (det * l);
            }
        }
        Some((a, b))
    }

    /// a₁ Σ_v area_v ‖A_v‖^p̄ with vertex-lumped areas.
    pub fn curvature_energy(&self, a1: f64, p_bar: f64) -> Result<f64> {
        let a = self.curvature()?;
        let areas = self.vertex_areas();
        Ok(a1
            * a.iter()
                .zip(&areas)
                .map(|(av, &w)| w * t3::frobenius(av).powf(p_bar))
                .sum::<f64>())
    }

    /// Max over the test set of the defect in the first-variation
    /// identity, with all integrals vertex/edge-lumped.
    pub fn first_variation_residual(&self, fns: &[TestFunction]) -> Result<f64> {
        if self.triangles.is_empty() {
            return Ok(0.0);
        }
        let a = self.curvature()?;
        let areas = self.vertex_areas();
        let incident = self.incident_triangles();
        let vnormals = self.vertex_normals(&incident);

        // vertex projections from the averaged normals
        let vprojections: Vec<Mat3> = vnormals
            .iter()
            .map(|n| match n {
                Some(n) => {
                    let mut p = Mat3::identity();
                    for i in 0..3 {
                        for j in 0..3 {
                            p.0[i][j] -= n[i] * n[j];
                        }
                    }
                    p
                }
                None => Mat3::ZERO,
            })
            .collect();

        // θ-weighted mean projection adjacent to each boundary edge
        let mut edge_pi: Vec<Mat3> = Vec::with_capacity(self.boundary_edges.len());
        let mut edge_incident: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let aa = tri[k];
                let bb = tri[(k + 1) % 3];
                edge_incident
                    .entry([aa.min(bb), aa.max(bb)])
                    .or_default()
                    .push(t);
            }
        }
        for e in &self.boundary_edges {
            let list = &edge_incident[&e.nodes];
            let mut p = Mat3::ZERO;
            let mut w = 0.0;
            for &t in list {
                p = p + self.projections[t].scale(self.theta[t] as f64);
                w += self.theta[t] as f64;
            }
            edge_pi.push(p.scale(1.0 / w));
        }

        let mut worst = 0.0f64;
        for phi in fns {
            let mut r = [0.0; 3];
            for v in 0..self.vertices.len() {
                if areas[v] == 0.0 {
                    continue;
                }
                let x = self.vertices[v];
                let p = vprojections[v];
                let gx = phi.grad_x(&x, &p);
                let gpi = phi.grad_pi(&x, &p);
                let val = phi.eval(&x, &p);
                let av = &a[v];
                for i in 0..3 {
                    let mut term = 0.0;
                    // Π D_xφ
                    for k in 0..3 {
                        term += p.0[i][k] * gx[k];
                    }
                    // A D_Πφ
                    for j in 0..3 {
                        for k in 0..3 {
                            term += av[i][j][k] * gpi.0[j][k];
                        }
                    }
                    // φ tr(A): tr_i = Σ_j A_{jij}
                    let mut tr = 0.0;
                    for j in 0..3 {
                        tr += av[j][i][j];
                    }
                    term += val * tr;
                    r[i] += areas[v] * term;
                }
            }
            for (e, pi) in self.boundary_edges.iter().zip(&edge_pi) {
                let mid = vec::scale(
                    &vec::add(&self.vertices[e.nodes[0]], &self.vertices[e.nodes[1]]),
                    0.5,
                );
                let val = phi.eval(&mid, pi);
                r = vec::add(&r, &vec::scale(&e.weight, val));
            }
            worst = worst.max(vec::norm(&r));
        }
        Ok(worst)
    }

    /// E(V) = ā μ_V + a₁ ∫ ‖A‖^p̄ dV + a₂ ‖∂V‖.
    pub fn crack_energy(&self, params: &EnergyParams) -> Result<CrackEnergyBreakdown> {
        if self.triangles.is_empty() {
            return Ok(CrackEnergyBreakdown::ZERO);
        }
        let mass_term = params.a_bar * self.mass();
        let curvature_term = self.curvature_energy(params.a1, params.p_bar)?;
        let boundary_term = params.a2 * self.boundary_mass();
        Ok(CrackEnergyBreakdown {
            mass_term,
            curvature_term,
            boundary_term,
            total: mass_term + curvature_term + boundary_term,
        })
    }
}
