use thiserror::Error;

use super::basis::{product_vectors, MeasurementSetting, Pauli};
use crate::linalg::{eigh, Mat4, C64};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Two-qubit density matrix in the `|00⟩, |01⟩, |10⟩, |11⟩` basis.
///
/// Every constructor guarantees a Hermitian, unit-trace matrix. Positivity is
/// not enforced here because linear inversion legitimately produces
/// non-physical estimates; operations that need a physical state check it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitState {
    rho: Mat4,
}

impl TwoQubitState {
    /// Validates Hermiticity and unit trace.
    pub fn from_matrix(rho: Mat4) -> Result<Self, QuantumError> {
        let herm = rho.hermitian_deviation();
        if herm >= HERMITIAN_TOL {
            return Err(QuantumError::InvalidState(format!(
                "matrix is not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() >= TRACE_TOL {
            return Err(QuantumError::InvalidState(format!(
                "trace is {:.15} + {:.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        Ok(TwoQubitState { rho })
    }

    /// Validates Hermiticity, unit trace and positivity.
    pub fn physical(rho: Mat4) -> Result<Self, QuantumError> {
        let s = Self::from_matrix(rho)?;
        s.ensure_physical()?;
        Ok(s)
    }

    /// Symmetrizes and normalizes an arbitrary nonzero matrix.
    pub fn normalized(rho: Mat4) -> Result<Self, QuantumError> {
        let h = rho.hermitian_part();
        let tr = h.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(QuantumError::InvalidState(format!(
                "cannot normalize matrix with trace {tr}"
            )));
        }
        Ok(TwoQubitState {
            rho: h.scale(1.0 / tr),
        })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) amplitude vector.
    pub fn pure(amplitudes: [C64; 4]) -> Result<Self, QuantumError> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QuantumError::InvalidState("zero state vector".into()));
        }
        let s = 1.0 / norm.sqrt();
        let v = amplitudes.map(|a| a * s);
        Ok(TwoQubitState {
            rho: Mat4::outer(&v, &v),
        })
    }

    pub fn maximally_mixed() -> Self {
        TwoQubitState {
            rho: Mat4::identity().scale(0.25),
        }
    }

    /// `λ·a + (1 − λ)·b`
    pub fn mix(a: &TwoQubitState, b: &TwoQubitState, lambda: f64) -> Self {
        TwoQubitState {
            rho: a.rho.scale(lambda) + b.rho.scale(1.0 - lambda),
        }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.rho
    }

    pub fn element(&self, r: usize, c: usize) -> C64 {
        self.rho.0[r][c]
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        eigh(&self.rho).values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue() >= -PSD_TOL
    }

    pub fn ensure_physical(&self) -> Result<(), QuantumError> {
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(QuantumError::InvalidState(format!(
                "state is not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(())
    }

    /// Closest physical state obtained by zeroing negative eigenvalues and
    /// renormalizing.
    pub fn clamp_to_physical(&self) -> TwoQubitState {
        let e = eigh(&self.rho);
        let total: f64 = e.values.iter().map(|v| v.max(0.0)).sum();
        if total <= 0.0 {
            return TwoQubitState::maximally_mixed();
        }
        let m = e.map_values(|v| v.max(0.0) / total).hermitian_part();
        TwoQubitState { rho: m }
    }

    pub fn purity(&self) -> f64 {
        self.rho.trace_of_product(&self.rho).re
    }

    /// `½‖a − b‖₁`
    pub fn trace_distance(&self, other: &TwoQubitState) -> f64 {
        let diff = self.rho - other.rho;
        0.5 * eigh(&diff).values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `Tr(ρ · σ_i ⊗ σ_j)` without physicality checks.
    pub(crate) fn pauli_expectation_raw(&self, i: Pauli, j: Pauli) -> C64 {
        let op = i.matrix().kron(&j.matrix());
        self.rho.trace_of_product(&op)
    }

    /// Born-rule probabilities for arbitrary product outcome vectors.
    pub fn probabilities_for(&self, vectors: &[[C64; 4]; 4]) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (k, v) in vectors.iter().enumerate() {
            p[k] = self.rho.expectation(v).re.max(0.0);
        }
        p
    }
}

/// Pauli correlation coefficients `c_ij = ⟨σ_i ⊗ σ_j⟩`, indexed by
/// [`Pauli::index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationTensor(pub [[f64; 4]; 4]);

impl CorrelationTensor {
    pub fn get(&self, i: Pauli, j: Pauli) -> f64 {
        self.0[i.index()][j.index()]
    }

    pub fn set(&mut self, i: Pauli, j: Pauli, v: f64) {
        self.0[i.index()][j.index()] = v;
    }

    /// The 3×3 block of two-body correlations (X, Y, Z order).
    pub fn block(&self) -> [[f64; 3]; 3] {
        let mut t = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                t[r][c] = self.0[r + 1][c + 1];
            }
        }
        t
    }

    /// Raw correlations of any Hermitian unit-trace matrix.
    pub fn of_state(rho: &TwoQubitState) -> CorrelationTensor {
        let mut c = [[0.0; 4]; 4];
        for i in Pauli::ALL {
            for j in Pauli::ALL {
                c[i.index()][j.index()] = rho.pauli_expectation_raw(i, j).re;
            }
        }
        CorrelationTensor(c)
    }
}

/// Result of inverting a correlation tensor into a density matrix.
#[derive(Clone, Copy, Debug)]
pub struct LinearInversion {
    pub state: TwoQubitState,
    /// Whether the estimate is already positive semidefinite.
    pub physical: bool,
}

pub fn bell_phi_plus() -> TwoQubitState {
    bell_state(1.0, 0.0, 0.0, 1.0)
}

pub fn bell_phi_minus() -> TwoQubitState {
    bell_state(1.0, 0.0, 0.0, -1.0)
}

pub fn bell_psi_plus() -> TwoQubitState {
    bell_state(0.0, 1.0, 1.0, 0.0)
}

pub fn bell_psi_minus() -> TwoQubitState {
    bell_state(0.0, 1.0, -1.0, 0.0)
}

fn bell_state(a: f64, b: f64, c: f64, d: f64) -> TwoQubitState {
    let v = [a, b, c, d].map(|x| C64::new(x, 0.0));
    TwoQubitState {
        rho: Mat4::outer(&v, &v).scale(0.5),
    }
}

/// Named reference states accepted on the command line.
pub fn named_state(name: &str) -> Option<TwoQubitState> {
    match name.to_ascii_lowercase().as_str() {
        "phi+" | "phi-plus" | "phi_plus" | "phiplus" => Some(bell_phi_plus()),
        "phi-" | "phi-minus" | "phi_minus" | "phiminus" => Some(bell_phi_minus()),
        "psi+" | "psi-plus" | "psi_plus" | "psiplus" => Some(bell_psi_plus()),
        "psi-" | "psi-minus" | "psi_minus" | "psiminus" => Some(bell_psi_minus()),
        "mixed" | "maximally-mixed" | "maximally_mixed" => Some(TwoQubitState::maximally_mixed()),
        _ => None,
    }
}

/// `Tr(ρ · σ_i ⊗ σ_j)`.
pub fn pauli_expectation(rho: &TwoQubitState, i: Pauli, j: Pauli) -> Result<f64, QuantumError> {
    rho.ensure_physical()?;
    let v = rho.pauli_expectation_raw(i, j);
    if v.im.abs() >= 1e-10 {
        return Err(QuantumError::InvalidState(format!(
            "expectation of {i:?}{j:?} has imaginary part {:.3e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// `ρ = ¼ Σ c_ij σ_i ⊗ σ_j`.
///
/// The result is Hermitian with unit trace whenever `c_00 = 1`; positivity is
/// reported rather than enforced.
pub fn state_from_correlations(c: &CorrelationTensor) -> Result<LinearInversion, QuantumError> {
    if (c.get(Pauli::I, Pauli::I) - 1.0).abs() > TRACE_TOL {
        return Err(QuantumError::InvalidState(format!(
            "c_00 must be 1, got {}",
            c.get(Pauli::I, Pauli::I)
        )));
    }
    let mut rho = Mat4::zeros();
    for i in Pauli::ALL {
        for j in Pauli::ALL {
            let cij = c.get(i, j);
            if cij == 0.0 {
                continue;
            }
            rho = rho + i.matrix().kron(&j.matrix()).scale(0.25 * cij);
        }
    }
    let state = TwoQubitState::from_matrix(rho.hermitian_part())?;
    let physical = state.is_physical();
    Ok(LinearInversion { state, physical })
}

/// Joint outcome probabilities `(++, +−, −+, −−)` for an ideal setting.
pub fn born_probabilities(
    rho: &TwoQubitState,
    setting: MeasurementSetting,
) -> Result<[f64; 4], QuantumError> {
    rho.ensure_physical()?;
    Ok(rho.probabilities_for(&setting.outcome_vectors()))
}

/// Probabilities under possibly miscalibrated local analyzers.
pub fn born_probabilities_with(
    rho: &TwoQubitState,
    alice: &[[C64; 2]; 2],
    bob: &[[C64; 2]; 2],
) -> Result<[f64; 4], QuantumError> {
    rho.ensure_physical()?;
    Ok(rho.probabilities_for(&product_vectors(alice, bob)))
}

impl Default for TwoQubitState {
    fn default() -> Self {
        TwoQubitState::maximally_mixed()
    }
}
