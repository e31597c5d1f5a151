//! Reference computations that avoid the library's own shortcuts. Shared by
//! the integration tests and the acceptance runner.
#![allow(dead_code)]

use nalgebra::{Complex, Matrix4};
use pathlink_core::counts::CountTable;
use pathlink_core::linalg::{Mat2, C64};
use pathlink_core::quantum::{MeasurementSetting, Pauli, TwoQubitState};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

pub fn to_na(rho: &TwoQubitState) -> Matrix4<Complex<f64>> {
    Matrix4::from_fn(|r, c| {
        let z = rho.element(r, c);
        Complex::new(z.re, z.im)
    })
}

fn na_sqrt(m: &Matrix4<Complex<f64>>) -> Matrix4<Complex<f64>> {
    let e = m.symmetric_eigen();
    let d = Matrix4::from_diagonal(&e.eigenvalues.map(|v| Complex::new(v.max(0.0).sqrt(), 0.0)));
    e.eigenvectors * d * e.eigenvectors.adjoint()
}

/// Uhlmann fidelity through nalgebra's eigensolver.
pub fn uhlmann(rho: &TwoQubitState, sigma: &TwoQubitState) -> f64 {
    let s = na_sqrt(&to_na(rho));
    let inner = s * to_na(sigma) * s;
    let inner = (inner + inner.adjoint()) * Complex::new(0.5, 0.0);
    let values = inner.symmetric_eigen().eigenvalues;
    let cutoff = 16.0 * f64::EPSILON * values.amax();
    let tr: f64 = values.iter().filter(|v| **v > cutoff).map(|v| v.sqrt()).sum();
    tr * tr
}

fn spin(n: &[f64; 3]) -> Mat2 {
    let mut m = Mat2([[C64::new(0.0, 0.0); 2]; 2]);
    for (k, p) in [Pauli::X, Pauli::Y, Pauli::Z].iter().enumerate() {
        let s = p.matrix();
        for r in 0..2 {
            for c in 0..2 {
                m.0[r][c] += s.0[r][c] * n[k];
            }
        }
    }
    m
}

/// `Tr(ρ (a·σ ⊗ b·σ))` by explicit trace.
pub fn correlator(rho: &TwoQubitState, a: &[f64; 3], b: &[f64; 3]) -> f64 {
    rho.matrix().trace_of_product(&spin(a).kron(&spin(b))).re
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n < 1e-300 {
        [0.0, 0.0, 1.0]
    } else {
        v.map(|x| x / n)
    }
}

const AXES: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Linear functional `g_k = Σ_j w_j Tr(ρ σ_k ⊗ d_j·σ)` over Alice's direction.
fn alice_gradient(rho: &TwoQubitState, dirs: &[([f64; 3], f64)]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (k, e) in AXES.iter().enumerate() {
        g[k] = dirs.iter().map(|(d, w)| w * correlator(rho, e, d)).sum();
    }
    g
}

fn bob_gradient(rho: &TwoQubitState, dirs: &[([f64; 3], f64)]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (k, e) in AXES.iter().enumerate() {
        g[k] = dirs.iter().map(|(d, w)| w * correlator(rho, d, e)).sum();
    }
    g
}

pub fn chsh_value(rho: &TwoQubitState, a: &[f64; 3], a2: &[f64; 3], b: &[f64; 3], b2: &[f64; 3]) -> f64 {
    correlator(rho, a, b) + correlator(rho, a, b2) + correlator(rho, a2, b) - correlator(rho, a2, b2)
}

/// Maximal CHSH value by multi-start search over the four measurement
/// directions. `S` is linear in each direction separately, so each sweep sets
/// one direction to the normalized gradient; restarts guard against saddles.
pub fn chsh_brute_force<R: Rng>(rho: &TwoQubitState, rng: &mut R, starts: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let rand_dir = |rng: &mut R| unit([0; 3].map(|_: i32| rng.random::<f64>() * 2.0 - 1.0));
    for _ in 0..starts {
        // Alice's directions are set from Bob's on the first sweep.
        let (mut b, mut b2) = (rand_dir(rng), rand_dir(rng));
        let mut last = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let a = unit(alice_gradient(rho, &[(b, 1.0), (b2, 1.0)]));
            let a2 = unit(alice_gradient(rho, &[(b, 1.0), (b2, -1.0)]));
            b = unit(bob_gradient(rho, &[(a, 1.0), (a2, 1.0)]));
            b2 = unit(bob_gradient(rho, &[(a, 1.0), (a2, -1.0)]));
            let s = chsh_value(rho, &a, &a2, &b, &b2);
            if (s - last).abs() < 1e-15 {
                break;
            }
            last = s;
        }
        best = best.max(last);
    }
    best
}

/// Multinomial counts for every tomographic setting.
pub fn sample_counts<R: Rng>(rho: &TwoQubitState, shots: u64, rng: &mut R) -> CountTable {
    let mut table = CountTable::new();
    for s in MeasurementSetting::tomography_set() {
        let p = rho.probabilities_for(&s.outcome_vectors());
        let mut left = shots;
        let mut mass = 1.0;
        let mut c = [0u64; 4];
        for k in 0..3 {
            let q = if mass > 0.0 { (p[k].max(0.0) / mass).clamp(0.0, 1.0) } else { 0.0 };
            c[k] = Binomial::new(left, q).unwrap().sample(rng);
            left -= c[k];
            mass -= p[k].max(0.0);
        }
        c[3] = left;
        table.add(s, 1.0, c, 0.0);
    }
    table
}

/// `H2(p) = ∫₀ᵖ log2((1−t)/t) dt`, by composite Simpson on `t = p·u²` which
/// removes the endpoint singularity.
pub fn entropy_by_quadrature(p: f64) -> f64 {
    let n = 20_000;
    let g = |u: f64| {
        if u == 0.0 {
            return 0.0;
        }
        let t = p * u * u;
        ((1.0 - t) / t).log2() * 2.0 * p * u
    };
    let h = 1.0 / n as f64;
    let mut s = g(0.0) + g(1.0);
    for i in 1..n {
        s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
