use super::state::{CorrelationTensor, QuantumError, TwoQubitState, PSD_TOL};
use crate::linalg::{eigh, sqrt_psd, Mat4, C64};

/// Eigen-clamps a nearly-PSD state for use inside matrix square roots.
fn clamped(rho: &TwoQubitState) -> Result<Mat4, QuantumError> {
    let e = eigh(rho.matrix());
    if e.values[0] < -PSD_TOL {
        return Err(QuantumError::InvalidState(format!(
            "state is not positive semidefinite (min eigenvalue {:.3e})",
            e.values[0]
        )));
    }
    let total: f64 = e.values.iter().map(|v| v.max(0.0)).sum();
    Ok(e.map_values(|v| v.max(0.0) / total))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho_exp: &TwoQubitState, rho_th: &TwoQubitState) -> Result<f64, QuantumError> {
    let a = clamped(rho_exp)?;
    let b = clamped(rho_th)?;
    let root = sqrt_psd(&a);
    let inner = root * b * root;
    let values = eigh(&inner).values;
    // Eigenvalues at rounding level carry no information but would add
    // √ε-sized terms to the trace.
    let cutoff = 16.0 * f64::EPSILON * values[3].abs().max(f64::MIN_POSITIVE);
    let tr: f64 = values
        .iter()
        .filter(|v| **v > cutoff)
        .map(|v| v.sqrt())
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// `⟨ψ|ρ|ψ⟩`, the fidelity with a pure target.
pub fn fidelity_with_pure(rho: &TwoQubitState, psi: &[C64; 4]) -> Result<f64, QuantumError> {
    rho.ensure_physical()?;
    let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    Ok((rho.matrix().expectation(psi).re / norm).clamp(0.0, 1.0))
}

/// Maximal CHSH value via the Horodecki criterion: `2√(t₁ + t₂)` where
/// `t₁ ≥ t₂` are the two largest eigenvalues of `TᵀT`.
pub fn chsh_max(rho: &TwoQubitState) -> Result<f64, QuantumError> {
    rho.ensure_physical()?;
    Ok(chsh_from_correlations(&CorrelationTensor::of_state(rho)))
}

/// Horodecki value of an arbitrary correlation block (no physicality check).
pub fn chsh_from_correlations(c: &CorrelationTensor) -> f64 {
    let t = c.block();
    // TᵀT padded into a 4×4 Hermitian matrix; the padding contributes a zero
    // eigenvalue which never ranks among the top two.
    let mut m = Mat4::zeros();
    for r in 0..3 {
        for col in 0..3 {
            let v: f64 = (0..3).map(|k| t[k][r] * t[k][col]).sum();
            m.0[r][col] = C64::new(v, 0.0);
        }
    }
    let ev = eigh(&m).values;
    2.0 * (ev[3] + ev[2]).max(0.0).sqrt()
}
