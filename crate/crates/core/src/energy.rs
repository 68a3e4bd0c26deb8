//! Gradient-polyconvex stored-energy densities, their analytic
//! gradients, and numerical certifiers for the structural hypotheses
//! (exponent inequalities, coercivity, convexity in the minor
//! gradients).

use crate::error::{Error, Result};
use crate::tensor::{self, cof3, d_cof, d_det, det3, t3, Mat3, Tensor3, Vec3, ZERO_TENSOR3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Parameters of the energy: coercivity data, curvature exponent,
/// crack-energy coefficients, and admissibility bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyParams {
    /// Coercivity constant, > 0.
    pub c: f64,
    /// Coercivity exponents: p > 2, q >= p/(p-1), r > 1, s > 0.
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    /// Curvature exponent, > 1.
    pub p_bar: f64,
    /// Crack-energy coefficients, all > 0.
    pub a_bar: f64,
    pub a1: f64,
    pub a2: f64,
    /// Deformation sup-norm bound.
    pub k_bound: f64,
    /// Jump-containment constant, > 0.
    pub c_jump: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            c: 1.0,
            p: 3.0,
            q: 2.0,
            r: 2.0,
            s: 1.0,
            p_bar: 2.0,
            a_bar: 1.0,
            a1: 1.0,
            a2: 1.0,
            k_bound: 10.0,
            c_jump: 2.0,
        }
    }
}

impl EnergyParams {
    /// Validates every structural invariant, including the exponent
    /// inequalities.
    pub fn validate(&self) -> Result<()> {
        let rep = verify_exponents(self);
        if !rep.pass() {
            return Err(Error::Value(format!(
                "exponent conditions violated: {}",
                rep.failures().join(", ")
            )));
        }
        for (name, v) in [
            ("c", self.c),
            ("a_bar", self.a_bar),
            ("a1", self.a1),
            ("a2", self.a2),
            ("k_bound", self.k_bound),
            ("c_jump", self.c_jump),
        ] {
            if !(v > 0.0) {
                return Err(Error::Value(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Built-in density families.
///
/// `ConcaveTest` carries a deliberately non-convex `-kappa |D1|^2`
/// term; it exists so that the convexity certifier has a failing case
/// to locate and is never admissible for production runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityFamily {
    Reference,
    ReferenceQuadratic,
    ConcaveTest,
}

/// A closed-form density `W(G, D1, D2)`, self-contained: it owns its
/// coefficients so certifiers can compare it against independently
/// claimed bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DensitySpec {
    pub family: DensityFamily,
    pub c: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    /// Perturbation weight for the quadratic / concave families.
    pub kappa: f64,
}

impl DensitySpec {
    pub fn reference(params: &EnergyParams) -> DensitySpec {
        DensitySpec {
            family: DensityFamily::Reference,
            c: params.c,
            p: params.p,
            q: params.q,
            r: params.r,
            s: params.s,
            kappa: 0.0,
        }
    }

    pub fn reference_quadratic(params: &EnergyParams, kappa: f64) -> DensitySpec {
        DensitySpec {
            family: DensityFamily::ReferenceQuadratic,
            kappa,
            ..DensitySpec::reference(params)
        }
    }
}

/// The reference coercive sum
/// `c (|G|^p + |cof G|^q + det^r + det^{-s} + |D1|^q + |D2|^r)`.
fn reference_terms(spec: &DensitySpec, g: &Mat3, d1: &Tensor3, d2: &Vec3, det: f64) -> f64 {
    spec.c
        * (g.frobenius().powf(spec.p)
            + cof3(g).frobenius().powf(spec.q)
            + det.powf(spec.r)
            + det.powf(-spec.s)
            + t3::frobenius(d1).powf(spec.q)
            + tensor::vec::norm(d2).powf(spec.r))
}

/// Evaluates the density. Returns `+inf` exactly when `det G <= 0`.
pub fn eval_density(spec: &DensitySpec, g: &Mat3, d1: &Tensor3, d2: &Vec3) -> f64 {
    let det = det3(g);
    if det <= 0.0 {
        return f64::INFINITY;
    }
    let base = reference_terms(spec, g, d1, d2, det);
    match spec.family {
        DensityFamily::Reference => base,
        DensityFamily::ReferenceQuadratic => {
            base + spec.kappa * (t3::frobenius_sq(d1) + tensor::vec::dot(d2, d2))
        }
        DensityFamily::ConcaveTest => base - spec.kappa * t3::frobenius_sq(d1),
    }
}

/// Analytic partial derivatives of the density with respect to
/// `(G, D1, D2)`. Fails on the `+inf` region.
pub fn grad_density(
    spec: &DensitySpec,
    g: &Mat3,
    d1: &Tensor3,
    d2: &Vec3,
) -> Result<(Mat3, Tensor3, Vec3)> {
    let det = det3(g);
    if det <= 0.0 {
        return Err(Error::Domain(format!(
            "density gradient undefined at det G = {det}"
        )));
    }
    let (c, p, q, r, s) = (spec.c, spec.p, spec.q, spec.r, spec.s);
    let gn = g.frobenius();
    let cof = cof3(g);
    let cofn = cof.frobenius();

    // d|G|^p = p |G|^{p-2} G; the power is > 1 so the limit at 0 is 0.
    let mut dg = Mat3::ZERO;
    if gn > 0.0 {
        dg += g.scale(c * p * gn.powf(p - 2.0));
    }
    if cofn > 0.0 {
        // chain rule through cof; d_cof is self-adjoint.
        dg += d_cof(g, &cof).scale(c * q * cofn.powf(q - 2.0));
    }
    dg += d_det(g).scale(c * (r * det.powf(r - 1.0) - s * det.powf(-s - 1.0)));

    let d1n = t3::frobenius(d1);
    let mut dd1 = if d1n > 0.0 {
        t3::scale(d1, c * q * d1n.powf(q - 2.0))
    } else {
        ZERO_TENSOR3
    };
    let d2n = tensor::vec::norm(d2);
    let mut dd2 = if d2n > 0.0 {
        tensor::vec::scale(d2, c * r * d2n.powf(r - 2.0))
    } else {
        [0.0; 3]
    };

    match spec.family {
        DensityFamily::Reference => {}
        DensityFamily::ReferenceQuadratic => {
            dd1 = t3::add(&dd1, &t3::scale(d1, 2.0 * spec.kappa));
            dd2 = tensor::vec::add(&dd2, &tensor::vec::scale(d2, 2.0 * spec.kappa));
        }
        DensityFamily::ConcaveTest => {
            dd1 = t3::add(&dd1, &t3::scale(d1, -2.0 * spec.kappa));
        }
    }
    Ok((dg, dd1, dd2))
}

/// One named check with a numeric margin (>= 0 means pass).
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityCheckReport {
    pub checks: Vec<CheckRecord>,
}

impl DensityCheckReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.clone())
            .collect()
    }
}

/// Checks the exponent inequalities p > 2, q >= p/(p-1), r > 1, s > 0.
pub fn verify_exponents(params: &EnergyParams) -> DensityCheckReport {
    let q_lower = params.p / (params.p - 1.0);
    let checks = vec![
        CheckRecord {
            name: "p > 2".into(),
            pass: params.p > 2.0,
            margin: params.p - 2.0,
            detail: format!("p = {}", params.p),
        },
        CheckRecord {
            name: "q >= p/(p-1)".into(),
            pass: params.q >= q_lower,
            margin: params.q - q_lower,
            detail: format!("q = {}, p/(p-1) = {}", params.q, q_lower),
        },
        CheckRecord {
            name: "r > 1".into(),
            pass: params.r > 1.0,
            margin: params.r - 1.0,
            detail: format!("r = {}", params.r),
        },
        CheckRecord {
            name: "s > 0".into(),
            pass: params.s > 0.0,
            margin: params.s,
            detail: format!("s = {}", params.s),
        },
        CheckRecord {
            name: "p_bar > 1".into(),
            pass: params.p_bar > 1.0,
            margin: params.p_bar - 1.0,
            detail: format!("p_bar = {}", params.p_bar),
        },
    ];
    DensityCheckReport { checks }
}

/// Sampling distribution for the certifiers: `G = I + U` with i.i.d.
/// uniform entries in [-0.4, 0.4], resampled until `det G > 0.05`;
/// `D1`, `D2` entries uniform in [-1, 1]. Deterministic given seed.
pub struct SamplePoint {
    pub g: Mat3,
    pub d1: Tensor3,
    pub d2: Vec3,
}

pub fn sample_admissible(rng: &mut ChaCha8Rng) -> SamplePoint {
    let g = loop {
        let mut g = Mat3::identity();
        for i in 0..3 {
            for j in 0..3 {
                g.0[i][j] += rng.gen_range(-0.4..0.4);
            }
        }
        if det3(&g) > 0.05 {
            break g;
        }
    };
    let mut d1 = ZERO_TENSOR3;
    for v in d1.iter_mut().flatten().flatten() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut d2 = [0.0; 3];
    for v in &mut d2 {
        *v = rng.gen_range(-1.0..1.0);
    }
    SamplePoint { g, d1, d2 }
}

pub const COERCIVITY_TOL: f64 = 1e-12;
pub const CONVEXITY_TOL: f64 = 1e-10;

/// Samples the admissible region and reports the minimum of
/// `W - c (coercivity right-hand side)` with the claimed parameters.
pub fn verify_coercivity(
    spec: &DensitySpec,
    params: &EnergyParams,
    n_samples: usize,
    seed: u64,
) -> DensityCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_residual = f64::INFINITY;
    let mut worst = String::new();
    let claimed = DensitySpec {
        family: DensityFamily::Reference,
        c: params.c,
        p: params.p,
        q: params.q,
        r: params.r,
        s: params.s,
        kappa: 0.0,
    };
    for i in 0..n_samples {
        let pt = sample_admissible(&mut rng);
        let w = eval_density(spec, &pt.g, &pt.d1, &pt.d2);
        let bound = eval_density(&claimed, &pt.g, &pt.d1, &pt.d2);
        let residual = w - bound;
        if residual < min_residual {
            min_residual = residual;
            worst = format!("sample {i}, det G = {}", det3(&pt.g));
        }
    }
    DensityCheckReport {
        checks: vec![CheckRecord {
            name: "coercivity".into(),
            pass: min_residual >= -COERCIVITY_TOL,
            margin: min_residual,
            detail: format!("min residual over {n_samples} samples at {worst}"),
        }],
    }
}

/// Midpoint-convexity check of `W(G, ., .)` in `(D1, D2)` for fixed
/// admissible `G`. Reports the worst violation and its location.
pub fn verify_delta_convexity(
    spec: &DensitySpec,
    n_samples: usize,
    seed: u64,
) -> DensityCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_defect = f64::NEG_INFINITY;
    let mut worst = String::new();
    for i in 0..n_samples {
        let a = sample_admissible(&mut rng);
        let b = sample_admissible(&mut rng);
        // shared G: convexity is in the (D1, D2) slots only.
        let g = a.g;
        let wa = eval_density(spec, &g, &a.d1, &a.d2);
        let wb = eval_density(spec, &g, &b.d1, &b.d2);
        let mid1 = t3::scale(&t3::add(&a.d1, &b.d1), 0.5);
        let mid2 = tensor::vec::scale(&tensor::vec::add(&a.d2, &b.d2), 0.5);
        let wm = eval_density(spec, &g, &mid1, &mid2);
        let defect = wm - 0.5 * (wa + wb);
        if defect > worst_defect {
            worst_defect = defect;
            worst = format!("sample pair {i}");
        }
    }
    DensityCheckReport {
        checks: vec![CheckRecord {
            name: "delta-convexity".into(),
            pass: worst_defect <= CONVEXITY_TOL,
            margin: -worst_defect,
            detail: format!("worst midpoint defect over {n_samples} pairs at {worst}"),
        }],
    }
}
