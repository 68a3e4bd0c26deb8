//! Admissibility of a deformation/crack-surface pair.
//!
//! `check_class` verifies the discrete counterparts of the defining
//! conditions of the admissible class: the crack surface is a valid
//! curvature varifold, the deformation respects the box bound and the
//! boundary data, deformation jumps are covered by the surface with
//! enough multiplicity, the minor fields have positive determinant and
//! finite norms, and minor-field jumps are covered as well.
//!
//! `check_noninterpenetration` applies two volume-based tests: the
//! volume of the deformed image must bound the integral of the
//! determinant (voxel rasterization), and sampled bump functions must
//! satisfy the corresponding weighted inequality.

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::state::DeformationState;
use crate::tensor::{det3, t3, vec, Vec3};
use crate::varifold::DiscreteVarifold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// One admissibility condition with its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityRecord {
    pub name: String,
    pub pass: bool,
    /// Signed margin; >= 0 iff the condition holds.
    pub margin: f64,
    /// Worst-offender mesh entity, when one exists.
    pub location: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub records: Vec<AdmissibilityRecord>,
}

impl AdmissibilityReport {
    pub fn pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&AdmissibilityRecord> {
        self.records.iter().filter(|r| !r.pass).collect()
    }
}

/// Multiplicity of the varifold triangle geometrically coincident with
/// the given face, matched by centroid and area within `tol`.
fn face_multiplicity(v: &DiscreteVarifold, centroid: &Vec3, area: f64, tol: f64) -> u32 {
    let mut total = 0;
    for (t, tri) in v.triangles.iter().enumerate() {
        let mut c = [0.0; 3];
        for &n in tri {
            c = vec::add(&c, &vec::scale(&v.vertices[n], 1.0 / 3.0));
        }
        if vec::norm(&vec::sub(&c, centroid)) <= tol && (v.areas[t] - area).abs() <= tol * area {
            total += v.theta[t];
        }
    }
    total
}

/// Runs the per-item membership checks for the pair (y, V).
pub fn check_class(
    state: &DeformationState,
    v: &DiscreteVarifold,
    params: &EnergyParams,
) -> AdmissibilityReport {
    let mut records = Vec::new();
    let tol = state.topo.jump_tol;

    // (1) valid discrete curvature varifold
    {
        let mut worst = 0.0f64;
        let mut where_ = None;
        for (t, p) in v.projections.iter().enumerate() {
            let defect = (p.matmul(p) - *p)
                .max_abs()
                .max((*p - p.transpose()).max_abs())
                .max((p.trace() - 2.0).abs());
            if defect > worst {
                worst = defect;
                where_ = Some(format!("triangle {t}"));
            }
        }
        let manifold = v.curvature();
        let pass = worst <= 1e-12 && manifold.is_ok();
        records.push(AdmissibilityRecord {
            name: "crack surface is a curvature varifold".into(),
            pass,
            margin: 1e-12 - worst,
            location: where_,
            detail: match manifold {
                Ok(_) => format!("worst projection defect {worst:.3e}"),
                Err(e) => format!("{e}"),
            },
        });
    }

    // (2) box bound and boundary data
    {
        let max_y = state.max_y_norm();
        let mut bc_defect = 0.0f64;
        let mut where_ = None;
        for (&n, y0) in &state.topo.dirichlet {
            let d = vec::norm(&vec::sub(&state.y[n], y0));
            if d > bc_defect {
                bc_defect = d;
                where_ = Some(format!("node {n}"));
            }
        }
        let margin = (params.k_bound - max_y).min(-bc_defect + f64::MIN_POSITIVE);
        records.push(AdmissibilityRecord {
            name: "deformation bounded and matches boundary data".into(),
            pass: max_y <= params.k_bound && bc_defect == 0.0,
            margin,
            location: where_,
            detail: format!("max |y| = {max_y:.6}, boundary defect {bc_defect:.3e}"),
        });
    }

    let fields = state.fields();

    // (3) deformation jumps covered with multiplicity >= 2/C
    {
        let jumps = state.deformation_jump_set(None);
        let required = 2.0 / params.c_jump;
        let mut worst_margin = f64::INFINITY;
        let mut where_ = None;
        for j in &jumps {
            let af = state
                .topo
                .active_faces
                .iter()
                .find(|af| af.candidate == j.candidate)
                .expect("jump face is an active face");
            let mut c = [0.0; 3];
            for &n in &af.orig_nodes {
                c = vec::add(&c, &vec::scale(&state.topo.coords[n], 1.0 / 3.0));
            }
            let theta = face_multiplicity(v, &c, af.area, tol.max(1e-12));
            let margin = theta as f64 - required;
            if margin < worst_margin {
                worst_margin = margin;
                where_ = Some(format!("candidate face {}", j.candidate));
            }
        }
        if jumps.is_empty() {
            worst_margin = f64::INFINITY;
        }
        records.push(AdmissibilityRecord {
            name: "jump set covered by crack surface".into(),
            pass: worst_margin >= 0.0,
            margin: worst_margin,
            location: where_,
            detail: format!(
                "{} jump faces, required multiplicity {required}",
                jumps.len()
            ),
        });
    }

    // (4) norms of the gradient and its minors
    {
        let mut np = 0.0;
        let mut nq = 0.0;
        let mut nr = 0.0;
        for e in 0..state.n_elements() {
            let w = state.topo.volumes[e];
            np += w * fields.grads[e].frobenius().powf(params.p);
            nq += w * fields.cofs[e].frobenius().powf(params.q);
            nr += w * fields.dets[e].abs().powf(params.r);
        }
        let (np, nq, nr) = (
            np.powf(1.0 / params.p),
            nq.powf(1.0 / params.q),
            nr.powf(1.0 / params.r),
        );
        let pass = np.is_finite() && nq.is_finite() && nr.is_finite();
        records.push(AdmissibilityRecord {
            name: "gradient and minor norms finite".into(),
            pass,
            margin: if pass { 0.0 } else { f64::NEG_INFINITY },
            location: None,
            detail: format!("|grad|_p = {np:.6}, |cof|_q = {nq:.6}, |det|_r = {nr:.6}"),
        });
    }

    // (5) orientation preserved, inverse determinant integrable
    {
        let mut min_det = f64::INFINITY;
        let mut where_ = None;
        for (e, &d) in fields.dets.iter().enumerate() {
            if d < min_det {
                min_det = d;
                where_ = Some(format!("element {e}"));
            }
        }
        let inv_int: f64 = if min_det > 0.0 {
            fields
                .dets
                .iter()
                .zip(&state.topo.volumes)
                .map(|(d, w)| w * d.powf(-params.s))
                .sum()
        } else {
            f64::INFINITY
        };
        records.push(AdmissibilityRecord {
            name: "determinant positive with integrable inverse".into(),
            pass: min_det > 0.0 && inv_int.is_finite(),
            margin: min_det,
            location: where_,
            detail: format!("min det = {min_det:.6}, int det^-s = {inv_int:.6}"),
        });
    }

    // (6, 7) minor-field gradients well defined; jumps confined to
    // activated faces (guaranteed by the crack-respecting stencils)
    {
        let mut gq = 0.0;
        let mut gr = 0.0;
        for e in 0..state.n_elements() {
            let w = state.topo.volumes[e];
            gq += w * t3::frobenius(&fields.d1[e]).powf(params.q);
            gr += w * vec::norm(&fields.d2[e]).powf(params.r);
        }
        let (gq, gr) = (gq.powf(1.0 / params.q), gr.powf(1.0 / params.r));
        let pass = gq.is_finite() && gr.is_finite();
        records.push(AdmissibilityRecord {
            name: "minor fields of bounded variation".into(),
            pass,
            margin: if pass { 0.0 } else { f64::NEG_INFINITY },
            location: None,
            detail: format!("|grad cof|_q = {gq:.6}, |grad det|_r = {gr:.6}"),
        });
    }

    // (8) minor-field jumps covered with multiplicity >= 1
    {
        let jumps = state.minor_field_jumps_of(&fields.cofs, &fields.dets);
        let mut worst_margin = f64::INFINITY;
        let mut where_ = None;
        let mut count = 0;
        for f in &jumps.faces {
            if f.cof_jump <= tol && f.det_jump <= tol {
                continue;
            }
            count += 1;
            let af = state
                .topo
                .active_faces
                .iter()
                .find(|af| af.candidate == f.candidate)
                .expect("minor jump face is an active face");
            let mut c = [0.0; 3];
            for &n in &af.orig_nodes {
                c = vec::add(&c, &vec::scale(&state.topo.coords[n], 1.0 / 3.0));
            }
            let theta = face_multiplicity(v, &c, af.area, tol.max(1e-12));
            let margin = theta as f64 - 1.0;
            if margin < worst_margin {
                worst_margin = margin;
                where_ = Some(format!("candidate face {}", f.candidate));
            }
        }
        if count == 0 {
            worst_margin = f64::INFINITY;
        }
        records.push(AdmissibilityRecord {
            name: "minor-field jumps covered by crack surface".into(),
            pass: worst_margin >= 0.0,
            margin: worst_margin,
            location: where_,
            detail: format!("{count} faces with minor-field jumps"),
        });
    }

    AdmissibilityReport { records }
}

const VOXEL_MEMORY_CAP_BYTES: usize = 1 << 28;

/// Outcome of the two non-interpenetration sub-tests.
#[derive(Debug, Clone, Serialize)]
pub struct NoninterpenetrationRecord {
    pub pass: bool,
    pub det_integral: f64,
    pub image_volume: f64,
    pub volume_tolerance: f64,
    pub resolution: usize,
    pub volume_pass: bool,
    pub sampled_pass: bool,
    /// Worst defect of the sampled inequality (<= 0 passes).
    pub sampled_worst: f64,
}

/// Voxel-rasterized volume of the deformed image together with the
/// voxel diagonal.
fn image_volume(state: &DeformationState, resolution: usize) -> Result<(f64, f64)> {
    let bits = resolution
        .checked_pow(3)
        .ok_or_else(|| Error::Resolution("voxel count overflow".into()))?;
    if bits / 8 > VOXEL_MEMORY_CAP_BYTES {
        return Err(Error::Resolution(format!(
            "voxel grid {resolution}^3 exceeds the memory cap"
        )));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for y in &state.y {
        for k in 0..3 {
            lo[k] = lo[k].min(y[k]);
            hi[k] = hi[k].max(y[k]);
        }
    }
    let h = [
        (hi[0] - lo[0]) / resolution as f64,
        (hi[1] - lo[1]) / resolution as f64,
        (hi[2] - lo[2]) / resolution as f64,
    ];
    if h.iter().any(|&x| x <= 0.0) {
        return Err(Error::Geometry("degenerate deformed bounding box".into()));
    }
    let diag = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();

    // per-tet voxel hits, merged into one bitset
    let hits: Vec<Vec<usize>> = state
        .topo
        .tets
        .par_iter()
        .map(|tet| {
            let p: [Vec3; 4] = [
                state.y[tet[0]],
                state.y[tet[1]],
                state.y[tet[2]],
                state.y[tet[3]],
            ];
            let e = crate::tensor::Mat3::from_cols(
                vec::sub(&p[1], &p[0]),
                vec::sub(&p[2], &p[0]),
                vec::sub(&p[3], &p[0]),
            );
            let d = det3(&e);
            let mut out = Vec::new();
            if d.abs() < 1e-300 {
                return out;
            }
            let inv = crate::tensor::cof3(&e).transpose().scale(1.0 / d);
            let mut tlo = [usize::MAX; 3];
            let mut thi = [0usize; 3];
            for k in 0..3 {
                let a = p.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min);
                let b = p.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max);
                tlo[k] = (((a - lo[k]) / h[k]).floor().max(0.0)) as usize;
                thi[k] = ((((b - lo[k]) / h[k]).ceil()) as usize).min(resolution);
            }
            for iz in tlo[2]..thi[2] {
                for iy in tlo[1]..thi[1] {
                    for ix in tlo[0]..thi[0] {
                        let c = [
                            lo[0] + (ix as f64 + 0.5) * h[0],
                            lo[1] + (iy as f64 + 0.5) * h[1],
                            lo[2] + (iz as f64 + 0.5) * h[2],
                        ];
                        let b = inv.apply(&vec::sub(&c, &p[0]));
                        let b0 = 1.0 - b[0] - b[1] - b[2];
                        if b[0] >= 0.0 && b[1] >= 0.0 && b[2] >= 0.0 && b0 >= 0.0 {
                            out.push((iz * resolution + iy) * resolution + ix);
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut bitset = vec![0u64; bits / 64 + 1];
    let mut count = 0usize;
    for list in hits {
        for idx in list {
            let (w, b) = (idx / 64, idx % 64);
            if bitset[w] & (1 << b) == 0 {
                bitset[w] |= 1 << b;
                count += 1;
            }
        }
    }
    Ok((count as f64 * h[0] * h[1] * h[2], diag))
}

/// Volume (a) and sampled-function (b) non-interpenetration tests.
pub fn check_noninterpenetration(
    state: &DeformationState,
    resolution: usize,
    sample_functions: usize,
    seed: u64,
) -> Result<NoninterpenetrationRecord> {
    let grads = state.element_gradients();
    let dets: Vec<f64> = grads.iter().map(det3).collect();
    let det_integral: f64 = dets
        .iter()
        .zip(&state.topo.volumes)
        .map(|(d, w)| d * w)
        .sum();

    let (vol, diag) = image_volume(state, resolution)?;
    let tolerance = 2.0 * diag * state.deformed_surface_area();
    let volume_pass = det_integral <= vol + tolerance;

    // (b) sampled bumps psi(z) = (1 - r^2/rho^2)^2 on |z - z0| < rho:
    // integral of psi over space is 32 pi rho^3 / 105
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for y in &state.y {
        for k in 0..3 {
            lo[k] = lo[k].min(y[k]);
            hi[k] = hi[k].max(y[k]);
        }
    }
    let bbox_diag = vec::norm(&vec::sub(&hi, &lo));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_worst = f64::NEG_INFINITY;
    for _ in 0..sample_functions {
        let z0 = [
            rng.gen_range(lo[0]..hi[0]),
            rng.gen_range(lo[1]..hi[1]),
            rng.gen_range(lo[2]..hi[2]),
        ];
        let rho = rng.gen_range(0.1..0.35) * bbox_diag;
        let psi = |z: &Vec3| -> f64 {
            let d = vec::sub(z, &z0);
            let t = 1.0 - vec::dot(&d, &d) / (rho * rho);
            if t > 0.0 {
                t * t
            } else {
                0.0
            }
        };
        let mut lhs_coarse = 0.0;
        let mut lhs_fine = 0.0;
        for (e, tet) in state.topo.tets.iter().enumerate() {
            let corners = [
                state.y[tet[0]],
                state.y[tet[1]],
                state.y[tet[2]],
                state.y[tet[3]],
            ];
            let w = state.topo.volumes[e] * dets[e];
            let mut coarse = 0.0;
            let mut fine = 0.0;
            for child in subdivide_tet(&corners) {
                coarse += psi(&tet_centroid(&child)) / 8.0;
                for grandchild in subdivide_tet(&child) {
                    fine += psi(&tet_centroid(&grandchild)) / 64.0;
                }
            }
            lhs_coarse += w * coarse;
            lhs_fine += w * fine;
        }
        let rhs = 32.0 * std::f64::consts::PI * rho.powi(3) / 105.0;
        // the midpoint rule is second order, so the Richardson gap
        // bounds the remaining quadrature error up to a safety factor
        let slack = 3.0 * (lhs_fine - lhs_coarse).abs() + 1e-3 * rhs;
        let defect = lhs_fine - rhs - slack;
        sampled_worst = sampled_worst.max(defect);
    }
    if sample_functions == 0 {
        sampled_worst = f64::NEG_INFINITY;
    }
    let sampled_pass = sampled_worst <= 0.0;

    Ok(NoninterpenetrationRecord {
        pass: volume_pass && sampled_pass,
        det_integral,
        image_volume: vol,
        volume_tolerance: tolerance,
        resolution,
        volume_pass,
        sampled_pass,
        sampled_worst,
    })
}

fn tet_centroid(t: &[Vec3; 4]) -> Vec3 {
    let mut c = [0.0; 3];
    for p in t {
        c = vec::add(&c, &vec::scale(p, 0.25));
    }
    c
}

/// Uniform subdivision into 8 children of equal volume.
fn subdivide_tet(t: &[Vec3; 4]) -> [[Vec3; 4]; 8] {
    let mid = |a: &Vec3, b: &Vec3| vec::scale(&vec::add(a, b), 0.5);
    let m01 = mid(&t[0], &t[1]);
    let m02 = mid(&t[0], &t[2]);
    let m03 = mid(&t[0], &t[3]);
    let m12 = mid(&t[1], &t[2]);
    let m13 = mid(&t[1], &t[3]);
    let m23 = mid(&t[2], &t[3]);
    [
        [t[0], m01, m02, m03],
        [m01, t[1], m12, m13],
        [m02, m12, t[2], m23],
        [m03, m13, m23, t[3]],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ]
}
