//! Fixed-size complex linear algebra for two-qubit operators.
//!
//! Everything here works on 4×4 (and 2×2) dense complex matrices stored as
//! plain arrays. The Hermitian eigensolver is a cyclic Jacobi iteration, which
//! is exact to machine precision at this size and needs no external solver.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense 2×2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

/// Dense 4×4 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat2 {
    pub fn new(rows: [[C64; 2]; 2]) -> Self {
        Mat2(rows)
    }

    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = self.0[r][0] * other.0[0][c] + self.0[r][1] * other.0[1][c];
            }
        }
        Mat2(out)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Mat2) -> Mat4 {
        let mut out = [[ZERO; 4]; 4];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        out[2 * a + c][2 * b + d] = self.0[a][b] * other.0[c][d];
                    }
                }
            }
        }
        Mat4(out)
    }
}

impl Mat4 {
    pub fn zeros() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for k in 0..4 {
            m.0[k][k] = ONE;
        }
        m
    }

    pub fn from_real_diag(d: [f64; 4]) -> Self {
        let mut m = Self::zeros();
        for k in 0..4 {
            m.0[k][k] = C64::new(d[k], 0.0);
        }
        m
    }

    /// `|v⟩⟨w|`
    pub fn outer(v: &[C64; 4], w: &[C64; 4]) -> Self {
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = v[r] * w[c].conj();
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = self.0[c][r].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|k| self.0[k][k]).sum()
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_of_product(&self, other: &Mat4) -> C64 {
        let mut acc = ZERO;
        for r in 0..4 {
            for k in 0..4 {
                acc += self.0[r][k] * other.0[k][r];
            }
        }
        acc
    }

    pub fn mul_vec(&self, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|k| self.0[r][k] * v[k]).sum();
        }
        out
    }

    /// `⟨v|self|v⟩`
    pub fn expectation(&self, v: &[C64; 4]) -> C64 {
        let mv = self.mul_vec(v);
        (0..4).map(|k| v[k].conj() * mv[k]).sum()
    }

    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    /// Largest element-wise deviation from the conjugate transpose.
    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    /// Averages with the conjugate transpose to remove rounding asymmetry.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = (self.0[r][c] + adj.0[r][c]) * 0.5;
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Mat4 {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Mat4 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.0[r][c]
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut out = [[ZERO; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for k in 0..4 {
                let a = self.0[r][k];
                if a == ZERO {
                    continue;
                }
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell += a * rhs.0[k][c];
                }
            }
        }
        Mat4(out)
    }
}

impl Add for Mat4 {
    type Output = Mat4;
    fn add(self, rhs: Mat4) -> Mat4 {
        let mut m = self;
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] += rhs.0[r][c];
            }
        }
        m
    }
}

impl Sub for Mat4 {
    type Output = Mat4;
    fn sub(self, rhs: Mat4) -> Mat4 {
        let mut m = self;
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] -= rhs.0[r][c];
            }
        }
        m
    }
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// `values` are ascending; column `k` of `vectors` is the eigenvector for
/// `values[k]`, so `A = V · diag(values) · V†`.
#[derive(Clone, Copy, Debug)]
pub struct HermitianEigen {
    pub values: [f64; 4],
    pub vectors: Mat4,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> [C64; 4] {
        [
            self.vectors.0[0][k],
            self.vectors.0[1][k],
            self.vectors.0[2][k],
            self.vectors.0[3][k],
        ]
    }

    /// Rebuilds `V · diag(f(λ)) · V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Mat4 {
        let mut out = Mat4::zeros();
        for k in 0..4 {
            let fk = f(self.values[k]);
            if fk == 0.0 {
                continue;
            }
            let v = self.vector(k);
            for r in 0..4 {
                for c in 0..4 {
                    out.0[r][c] += v[r] * v[c].conj() * fk;
                }
            }
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigensolver for a Hermitian 4×4 matrix.
///
/// Only the Hermitian part of `m` is used.
pub fn eigh(m: &Mat4) -> HermitianEigen {
    let mut a = m.hermitian_part();
    let mut v = Mat4::identity();
    let scale = a.frobenius_norm_sqr().sqrt().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..4)
            .flat_map(|r| (0..4).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a.0[r][c].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    let diag = [a.0[0][0].re, a.0[1][1].re, a.0[2][2].re, a.0[3][3].re];
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));

    let mut values = [0.0; 4];
    let mut vectors = Mat4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = diag[src];
        for r in 0..4 {
            vectors.0[r][dst] = v.0[r][src];
        }
    }
    HermitianEigen { values, vectors }
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut Mat4, v: &mut Mat4, p: usize, q: usize) {
    let g = a.0[p][q];
    let h = g.norm();
    if h < 1e-300 {
        return;
    }
    // Phase the (p, q) pair so the off-diagonal element becomes real, then
    // apply the classical real rotation.
    let phase = g / h;
    let app = a.0[p][p].re;
    let aqq = a.0[q][q].re;
    let zeta = (aqq - app) / (2.0 * h);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // U restricted to (p, q): columns u_p = (c, -s·conj(phase))ᵀ, u_q = (s·phase... )
    // Written as U = D · R with D = diag(1, conj(phase)) and R = [[c, s], [-s, c]].
    let up = [C64::new(c, 0.0), -phase.conj() * s];
    let uq = [C64::new(s, 0.0), phase.conj() * c];

    // A ← A · U (columns p and q)
    for r in 0..4 {
        let arp = a.0[r][p];
        let arq = a.0[r][q];
        a.0[r][p] = arp * up[0] + arq * up[1];
        a.0[r][q] = arp * uq[0] + arq * uq[1];
    }
    // A ← U† · A (rows p and q)
    for col in 0..4 {
        let apc = a.0[p][col];
        let aqc = a.0[q][col];
        a.0[p][col] = up[0].conj() * apc + up[1].conj() * aqc;
        a.0[q][col] = uq[0].conj() * apc + uq[1].conj() * aqc;
    }
    a.0[p][q] = ZERO;
    a.0[q][p] = ZERO;
    a.0[p][p] = C64::new(a.0[p][p].re, 0.0);
    a.0[q][q] = C64::new(a.0[q][q].re, 0.0);

    for r in 0..4 {
        let vrp = v.0[r][p];
        let vrq = v.0[r][q];
        v.0[r][p] = vrp * up[0] + vrq * up[1];
        v.0[r][q] = vrp * uq[0] + vrq * uq[1];
    }
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Eigenvalues below zero are treated as zero.
pub fn sqrt_psd(m: &Mat4) -> Mat4 {
    eigh(m).map_values(|x| x.max(0.0).sqrt())
}
