//! Exact 3x3 tensor algebra: determinants, cofactors, the full minor
//! table, the graph Jacobian, and the analytic derivatives the
//! optimizer needs.
//!
//! All derivatives here are closed-form. Finite differences are used
//! only in tests as independent oracles.

use serde::Serialize;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

/// Dense 3x3 matrix. Row index is the ambient (deformed) component,
/// column index the reference component.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

/// 3-vector.
pub type Vec3 = [f64; 3];

/// Third-order tensor, indexed `[k][i][j]` with `k` the derivative
/// direction and `(i,j)` the matrix component being differentiated.
pub type Tensor3 = [[[f64; 3]; 3]; 3];

pub const ZERO_TENSOR3: Tensor3 = [[[0.0; 3]; 3]; 3];

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Mat3 {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    /// Columns as reference-direction vectors.
    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3([
            [c0[0], c1[0], c2[0]],
            [c0[1], c1[1], c2[1]],
            [c0[2], c1[2], c2[2]],
        ])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn frobenius_sq(&self) -> f64 {
        let mut s = 0.0;
        for row in &self.0 {
            for v in row {
                s += v * v;
            }
        }
        s
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn matmul(&self, other: &Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.0[i][k] * other.0[k][j];
                }
                out.0[i][j] = s;
            }
        }
        out
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn scale(&self, t: f64) -> Mat3 {
        let mut out = *self;
        for row in &mut out.0 {
            for v in row {
                *v *= t;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Solves `self * x = b` by Cramer's rule; `None` when singular
    /// relative to the matrix scale.
    pub fn solve(&self, b: &Vec3) -> Option<Vec3> {
        let d = det3(self);
        let scale = self.max_abs();
        if d.abs() <= 1e-12 * scale * scale * scale + f64::MIN_POSITIVE {
            return None;
        }
        let inv_t = cof3(self).scale(1.0 / d);
        // inverse = cof(G)^T / det, so apply the transpose of inv_t.
        Some(inv_t.transpose().apply(b))
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl AddAssign for Mat3 {
    fn add_assign(&mut self, rhs: Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, t: f64) -> Mat3 {
        self.scale(t)
    }
}

/// All minors of a 3x3 matrix in a fixed serialization order.
///
/// The table is serialized in reports, so the layout is frozen:
/// * `order0` — the empty minor, always exactly 1.
/// * `order1` — the nine entries `G[b][a]`, row-major in `(b, a)`.
/// * `order2` — the nine signed 2x2 minors laid out as the cofactor
///   matrix `cof(G)[i][j]`, row-major. The checkerboard sign is part of
///   the stored value so the block coincides entrywise with `cof3`.
/// * `order3` — `det G`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinorTable {
    pub order0: f64,
    pub order1: [f64; 9],
    pub order2: [f64; 9],
    pub order3: f64,
}

impl MinorTable {
    /// Sum of squares of all 20 minors.
    pub fn sum_sq(&self) -> f64 {
        let mut s = self.order0 * self.order0 + self.order3 * self.order3;
        for v in self.order1.iter().chain(self.order2.iter()) {
            s += v * v;
        }
        s
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn det3(g: &Mat3) -> f64 {
    let m = &g.0;
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cofactor matrix: `cof(G)[i][j]` is the signed 2x2 minor obtained by
/// deleting row `i` and column `j`. Satisfies `G cof(G)^T = det(G) I`.
pub fn cof3(g: &Mat3) -> Mat3 {
    let m = &g.0;
    let minor = |i: usize, j: usize| -> f64 {
        let (r0, r1) = match i {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let (c0, c1) = match j {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let mut out = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out.0[i][j] = sign * minor(i, j);
        }
    }
    out
}

/// All 20 minors of `g`. The order-2 block shares the evaluation path
/// of [`cof3`], the order-3 entry that of [`det3`].
pub fn minors(g: &Mat3) -> MinorTable {
    let mut order1 = [0.0; 9];
    for b in 0..3 {
        for a in 0..3 {
            order1[3 * b + a] = g.0[b][a];
        }
    }
    let cof = cof3(g);
    let mut order2 = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            order2[3 * i + j] = cof.0[i][j];
        }
    }
    MinorTable {
        order0: 1.0,
        order1,
        order2,
        order3: det3(g),
    }
}

/// Jacobian of the graph map `x -> (x, Gx)`:
/// `|M(G)|^2 = sum of squares of all minors`.
pub fn graph_jacobian(g: &Mat3) -> f64 {
    minors(g).sum_sq().sqrt()
}

/// Derivative of the determinant: `d det(G) = cof(G)`.
pub fn d_det(g: &Mat3) -> Mat3 {
    cof3(g)
}

const EPS_LC: [[[f64; 3]; 3]; 3] = {
    let mut e = [[[0.0; 3]; 3]; 3];
    e[0][1][2] = 1.0;
    e[1][2][0] = 1.0;
    e[2][0][1] = 1.0;
    e[0][2][1] = -1.0;
    e[2][1][0] = -1.0;
    e[1][0][2] = -1.0;
    e
};

/// Directional derivative of the cofactor at `g` in direction `h`:
/// `d_cof(G,H)_{ij} = eps_{ipq} eps_{jrs} H_{pr} G_{qs}`, linear in `H`.
///
/// The associated linear operator on H is self-adjoint in the Frobenius
/// pairing, so this same function also evaluates the adjoint needed by
/// the chain rule in the energy gradient.
pub fn d_cof(g: &Mat3, h: &Mat3) -> Mat3 {
    let mut out = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    if EPS_LC[i][p][q] == 0.0 {
                        continue;
                    }
                    for r in 0..3 {
                        for t in 0..3 {
                            let e2 = EPS_LC[j][r][t];
                            if e2 != 0.0 {
                                s += EPS_LC[i][p][q] * e2 * h.0[p][r] * g.0[q][t];
                            }
                        }
                    }
                }
            }
            out.0[i][j] = s;
        }
    }
    out
}

/// Vector helpers used across the crate.
pub mod vec {
    use super::Vec3;

    pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn scale(a: &Vec3, t: f64) -> Vec3 {
        [a[0] * t, a[1] * t, a[2] * t]
    }

    pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn norm(a: &Vec3) -> f64 {
        dot(a, a).sqrt()
    }

    pub fn normalize(a: &Vec3) -> Vec3 {
        let n = norm(a);
        scale(a, 1.0 / n)
    }
}

/// Third-order tensor helpers.
pub mod t3 {
    use super::Tensor3;

    pub fn frobenius_sq(t: &Tensor3) -> f64 {
        let mut s = 0.0;
        for a in t.iter().flatten().flatten() {
            s += a * a;
        }
        s
    }

    pub fn frobenius(t: &Tensor3) -> f64 {
        frobenius_sq(t).sqrt()
    }

    pub fn scale(t: &Tensor3, c: f64) -> Tensor3 {
        let mut out = *t;
        for a in out.iter_mut().flatten().flatten() {
            *a *= c;
        }
        out
    }

    pub fn add(a: &Tensor3, b: &Tensor3) -> Tensor3 {
        let mut out = *a;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    out[k][i][j] += b[k][i][j];
                }
            }
        }
        out
    }
}
