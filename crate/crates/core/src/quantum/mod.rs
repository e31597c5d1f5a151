//! Dense two-qubit state algebra.

mod basis;
mod measures;
mod state;

pub use basis::{product_vectors, Basis, MeasurementSetting, Outcome, Pauli};
pub use measures::{chsh_from_correlations, chsh_max, fidelity, fidelity_with_pure};
pub use state::{
    bell_phi_minus, bell_phi_plus, bell_psi_minus, bell_psi_plus, born_probabilities,
    born_probabilities_with, named_state, pauli_expectation, state_from_correlations,
    CorrelationTensor, LinearInversion, QuantumError, TwoQubitState, HERMITIAN_TOL, PSD_TOL,
    TRACE_TOL,
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_plus_layout() {
        let rho = bell_phi_plus();
        for r in 0..4 {
            for c in 0..4 {
                let want = if (r == 0 || r == 3) && (c == 0 || c == 3) { 0.5 } else { 0.0 };
                assert_eq!(rho.element(r, c).re, want);
                assert_eq!(rho.element(r, c).im, 0.0);
            }
        }
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
        let ev = rho.eigenvalues();
        for (got, want) in ev.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn pauli_expectation_examples() {
        let phi = bell_phi_plus();
        let e = |i, j| pauli_expectation(&phi, i, j).unwrap();
        assert!((e(Pauli::Z, Pauli::Z) - 1.0).abs() < 1e-15);
        assert!((e(Pauli::X, Pauli::X) - 1.0).abs() < 1e-15);
        assert!((e(Pauli::Y, Pauli::Y) + 1.0).abs() < 1e-15);
        let mixed = TwoQubitState::maximally_mixed();
        assert_eq!(pauli_expectation(&mixed, Pauli::Z, Pauli::Z).unwrap(), 0.0);
    }

    #[test]
    fn correlations_round_trip_examples() {
        let mut c = CorrelationTensor([[0.0; 4]; 4]);
        c.set(Pauli::I, Pauli::I, 1.0);
        let lin = state_from_correlations(&c).unwrap();
        assert!(lin.physical);
        assert!(lin.state.matrix().max_abs_diff(TwoQubitState::maximally_mixed().matrix()) < 1e-15);

        c.set(Pauli::Z, Pauli::Z, 1.0);
        c.set(Pauli::X, Pauli::X, 1.0);
        c.set(Pauli::Y, Pauli::Y, -1.0);
        let lin = state_from_correlations(&c).unwrap();
        assert!(lin.physical);
        assert!(lin.state.matrix().max_abs_diff(bell_phi_plus().matrix()) < 1e-15);
    }

    #[test]
    fn overcorrelated_tensor_is_flagged_non_physical() {
        let mut c = CorrelationTensor([[0.0; 4]; 4]);
        c.set(Pauli::I, Pauli::I, 1.0);
        c.set(Pauli::Z, Pauli::Z, 1.2);
        let lin = state_from_correlations(&c).unwrap();
        assert!(!lin.physical);
        // Oracle: ρ = diag(1+1.2, 1−1.2, 1−1.2, 1+1.2)/4 is already diagonal,
        // so its spectrum is read off directly.
        let ev = lin.state.eigenvalues();
        assert!((ev[0] + 0.05).abs() < 1e-15);
        assert!((ev[3] - 0.55).abs() < 1e-15);
        assert!(lin.state.matrix().hermitian_deviation() < 1e-15);
        assert!((lin.state.matrix().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn born_probability_examples() {
        let phi = bell_phi_plus();
        let zz = born_probabilities(&phi, MeasurementSetting::new(Basis::Z, Basis::Z)).unwrap();
        for (g, w) in zz.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((g - w).abs() < 1e-15);
        }
        let zx = born_probabilities(&phi, MeasurementSetting::new(Basis::Z, Basis::X)).unwrap();
        for g in zx {
            assert!((g - 0.25).abs() < 1e-15);
        }
        let mixed = TwoQubitState::maximally_mixed();
        for s in MeasurementSetting::tomography_set() {
            for g in born_probabilities(&mixed, s).unwrap() {
                assert!((g - 0.25).abs() < 1e-15);
            }
        }
    }
}
