use crate::linalg::{Mat4, C64, ZERO};
use crate::quantum::TwoQubitState;

use super::dataset::{linear_inversion, TomographyDataset};
use super::{TomographyError, PROB_FLOOR};

/// Stopping rule for the likelihood maximization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    /// Relative change in log-likelihood below which the search stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            tolerance: 1e-10,
            max_iterations: 5000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub rho: TwoQubitState,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the plain linear-inversion estimate of the same data was
    /// already physical.
    pub linear_inversion_physical: bool,
}

const N_PARAMS: usize = 16;
/// Off-diagonal positions of the lower-triangular factor.
const OFF_DIAG: [(usize, usize); 6] = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)];

/// Lower-triangular `T` from its 16 real parameters: four real diagonal
/// entries followed by (re, im) pairs of the six strictly-lower entries.
fn unpack(x: &[f64; N_PARAMS]) -> Mat4 {
    let mut t = Mat4::zeros();
    for k in 0..4 {
        t.0[k][k] = C64::new(x[k], 0.0);
    }
    for (m, (r, c)) in OFF_DIAG.iter().enumerate() {
        t.0[*r][*c] = C64::new(x[4 + 2 * m], x[5 + 2 * m]);
    }
    t
}

fn pack(t: &Mat4) -> [f64; N_PARAMS] {
    let mut x = [0.0; N_PARAMS];
    for k in 0..4 {
        x[k] = t.0[k][k].re;
    }
    for (m, (r, c)) in OFF_DIAG.iter().enumerate() {
        x[4 + 2 * m] = t.0[*r][*c].re;
        x[5 + 2 * m] = t.0[*r][*c].im;
    }
    x
}

fn lower_mul_vec(t: &Mat4, v: &[C64; 4]) -> [C64; 4] {
    let mut w = [ZERO; 4];
    for r in 0..4 {
        for c in 0..=r {
            w[r] += t.0[r][c] * v[c];
        }
    }
    w
}

/// Negative log-likelihood per count for `ρ = T†T/Tr(T†T)`, and its gradient
/// in the packed parameters.
struct Objective<'a> {
    vectors: &'a [[C64; 4]],
    counts: Vec<f64>,
    norm: f64,
}

impl Objective<'_> {
    fn eval(&self, x: &[f64; N_PARAMS], want_grad: bool) -> (f64, [f64; N_PARAMS]) {
        let t = unpack(x);
        let tr = t.frobenius_norm_sqr();
        let mut ll = 0.0;
        let mut used = 0.0;
        // ∂LL/∂T̄ accumulated on the lower triangle.
        let mut g = Mat4::zeros();
        for (v, &n) in self.vectors.iter().zip(&self.counts) {
            if n == 0.0 {
                continue;
            }
            let w = lower_mul_vec(&t, v);
            let s: f64 = w.iter().map(|a| a.norm_sqr()).sum();
            let p = s / tr;
            if p < PROB_FLOOR {
                ll += n * PROB_FLOOR.ln();
                continue;
            }
            ll += n * p.ln();
            used += n;
            if want_grad {
                let coef = n / s;
                for r in 0..4 {
                    for c in 0..=r {
                        g.0[r][c] += w[r] * v[c].conj() * coef;
                    }
                }
            }
        }
        let mut grad = [0.0; N_PARAMS];
        if want_grad {
            for r in 0..4 {
                for c in 0..=r {
                    g.0[r][c] -= t.0[r][c] * (used / tr);
                }
            }
            let packed_re = pack(&g);
            // ∂f/∂Re z = 2 Re ∂f/∂z̄ and ∂f/∂Im z = 2 Im ∂f/∂z̄; the diagonal is
            // real so only its real part is a parameter.
            for k in 0..N_PARAMS {
                grad[k] = -2.0 * packed_re[k] / self.norm;
            }
        }
        (-ll / self.norm, grad)
    }
}

fn dot(a: &[f64; N_PARAMS], b: &[f64; N_PARAMS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct BfgsOutcome {
    x: [f64; N_PARAMS],
    f: f64,
    iterations: usize,
    converged: bool,
}

fn bfgs(obj: &Objective, x0: [f64; N_PARAMS], opts: &MleOptions) -> BfgsOutcome {
    let mut x = x0;
    let (mut f, mut g) = obj.eval(&x, true);
    let mut h = [[0.0; N_PARAMS]; N_PARAMS];
    let reset = |h: &mut [[f64; N_PARAMS]; N_PARAMS]| {
        for (i, row) in h.iter_mut().enumerate() {
            *row = [0.0; N_PARAMS];
            row[i] = 1.0;
        }
    };
    reset(&mut h);
    let mut quiet = 0;
    for it in 1..=opts.max_iterations {
        let mut d = [0.0; N_PARAMS];
        for i in 0..N_PARAMS {
            d[i] = -(0..N_PARAMS).map(|j| h[i][j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            reset(&mut h);
            d = g.map(|v| -v);
            slope = dot(&g, &d);
        }
        if slope == 0.0 {
            return BfgsOutcome {
                x,
                f,
                iterations: it,
                converged: true,
            };
        }
        let mut alpha = 1.0;
        let mut trial = x;
        let mut f_new = f;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..N_PARAMS {
                trial[i] = x[i] + alpha * d[i];
            }
            f_new = obj.eval(&trial, false).0;
            if f_new.is_finite() && f_new <= f + 1e-4 * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No descent along a reset gradient either: we are at the
            // optimum to machine precision.
            let at_identity = h
                .iter()
                .enumerate()
                .all(|(i, row)| row.iter().enumerate().all(|(j, v)| *v == (i == j) as u8 as f64));
            if at_identity {
                return BfgsOutcome {
                    x,
                    f,
                    iterations: it,
                    converged: true,
                };
            }
            reset(&mut h);
            continue;
        }
        let g_new = obj.eval(&trial, true).1;
        let rel = (f - f_new).abs() / f.abs().max(f64::MIN_POSITIVE);
        let mut s = [0.0; N_PARAMS];
        let mut y = [0.0; N_PARAMS];
        for i in 0..N_PARAMS {
            s[i] = trial[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        x = trial;
        f = f_new;
        g = g_new;
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if it == 1 {
                // Scale the initial inverse Hessian to the observed curvature.
                let gamma = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = gamma;
                }
            }
            let mut hy = [0.0; N_PARAMS];
            for i in 0..N_PARAMS {
                hy[i] = (0..N_PARAMS).map(|j| h[i][j] * y[j]).sum();
            }
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..N_PARAMS {
                for j in 0..N_PARAMS {
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        // Two consecutive quiet steps guard against a stall on one short step.
        if rel < opts.tolerance {
            quiet += 1;
            if quiet >= 2 {
                return BfgsOutcome {
                    x,
                    f,
                    iterations: it,
                    converged: true,
                };
            }
        } else {
            quiet = 0;
        }
    }
    BfgsOutcome {
        x,
        f,
        iterations: opts.max_iterations,
        converged: false,
    }
}

fn state_from_params(x: &[f64; N_PARAMS]) -> TwoQubitState {
    let t = unpack(x);
    TwoQubitState::normalized((t.adjoint() * t).hermitian_part())
        .expect("T†T has positive trace")
}

/// Cholesky-like factor `T` (lower triangular) with `T†T = ρ`, used to start
/// from the linear-inversion estimate.
fn factor(rho: &TwoQubitState) -> [f64; N_PARAMS] {
    // A = √D U† satisfies A†A = ρ; a QR-style reduction A = Q L then gives
    // the triangular factor.
    let clamped = rho.clamp_to_physical();
    let e = crate::linalg::eigh(clamped.matrix());
    let mut a = Mat4::zeros();
    for k in 0..4 {
        let v = e.vector(k);
        let s = e.values[k].max(0.0).sqrt();
        for c in 0..4 {
            a.0[k][c] = v[c].conj() * s;
        }
    }
    // Gram–Schmidt over the columns of A, last to first.
    let mut l = Mat4::zeros();
    let mut q: Vec<[C64; 4]> = Vec::new();
    for c in (0..4).rev() {
        let mut col = [a.0[0][c], a.0[1][c], a.0[2][c], a.0[3][c]];
        // Components along earlier Q vectors give L[r][c] for r > c.
        for (k, qv) in q.iter().enumerate() {
            let r = 3 - k;
            let proj: C64 = qv.iter().zip(&col).map(|(x, y)| x.conj() * y).sum();
            l.0[r][c] = proj;
            for i in 0..4 {
                col[i] -= qv[i] * proj;
            }
        }
        let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        l.0[c][c] = C64::new(norm, 0.0);
        if norm > 1e-12 {
            q.push(col.map(|z| z / norm));
        } else {
            // Rank deficiency: pick any unit vector orthogonal to the rest.
            let mut fill = [ZERO; 4];
            for basis in 0..4 {
                let mut cand = [ZERO; 4];
                cand[basis] = C64::new(1.0, 0.0);
                for qv in &q {
                    let proj: C64 = qv.iter().zip(&cand).map(|(x, y)| x.conj() * y).sum();
                    for i in 0..4 {
                        cand[i] -= qv[i] * proj;
                    }
                }
                let n: f64 = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n > 1e-6 {
                    fill = cand.map(|z| z / n);
                    break;
                }
            }
            q.push(fill);
        }
    }
    // Lift exact zeros on the diagonal so the start is interior.
    let mut x = pack(&l);
    for v in x.iter_mut().take(4) {
        if *v < 1e-3 {
            *v = 1e-3;
        }
    }
    x
}

/// Maximum-likelihood state estimate over the physical set.
///
/// Starts at `T = I/2`. If that run does not converge, or stops below the
/// likelihood of the eigen-clamped linear-inversion estimate, a second run
/// starts from that estimate and the better of the two is kept.
/// `NotConverged` still carries the best estimate found.
pub fn mle_reconstruct(
    data: &TomographyDataset,
    opts: &MleOptions,
) -> Result<ReconstructionResult, TomographyError> {
    let vectors = data.outcome_vectors();
    let counts: Vec<f64> = data.counts().iter().flatten().map(|&n| n as f64).collect();
    let norm = counts.iter().sum::<f64>().max(1.0);
    let obj = Objective {
        vectors: &vectors,
        counts,
        norm,
    };
    let mut x0 = [0.0; N_PARAMS];
    for v in x0.iter_mut().take(4) {
        *v = 0.5;
    }
    let lin = linear_inversion(data);
    let mut best = bfgs(&obj, x0, opts);
    let x_lin = factor(&lin.state);
    if !best.converged || obj.eval(&x_lin, false).0 < best.f {
        let second = bfgs(&obj, x_lin, opts);
        if second.converged || second.f < best.f {
            let iterations = best.iterations + second.iterations;
            best = BfgsOutcome {
                iterations,
                ..second
            };
        }
    }
    let result = ReconstructionResult {
        rho: state_from_params(&best.x),
        log_likelihood: -best.f * norm,
        iterations: best.iterations,
        converged: best.converged,
        linear_inversion_physical: lin.physical,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(TomographyError::NotConverged(Box::new(result)))
    }
}
