use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat2, C64, I, ONE, ZERO};

/// Index into the Pauli set σ_0..σ_3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn matrix(self) -> Mat2 {
        match self {
            Pauli::I => Mat2::identity(),
            Pauli::X => Mat2([[ZERO, ONE], [ONE, ZERO]]),
            Pauli::Y => Mat2([[ZERO, -I], [I, ZERO]]),
            Pauli::Z => Mat2([[ONE, ZERO], [ZERO, -ONE]]),
        }
    }
}

/// Local projective measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    pub fn pauli(self) -> Pauli {
        match self {
            Basis::Z => Pauli::Z,
            Basis::X => Pauli::X,
            Basis::Y => Pauli::Y,
        }
    }

    /// Eigenvectors `[|+⟩, |−⟩]` of the basis observable.
    pub fn eigenvectors(self) -> [[C64; 2]; 2] {
        self.eigenvectors_with_phase_error(0.0)
    }

    /// Eigenvectors of a miscalibrated analyzer. For the equatorial bases
    /// the relative phase of the `|1⟩` amplitude is shifted by `phase_error`;
    /// the Z basis is unaffected.
    pub fn eigenvectors_with_phase_error(self, phase_error: f64) -> [[C64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let equatorial = |theta: f64| {
            let e = C64::from_polar(1.0, theta + phase_error);
            [[C64::new(h, 0.0), e * h], [C64::new(h, 0.0), -e * h]]
        };
        match self {
            Basis::Z => [[ONE, ZERO], [ZERO, ONE]],
            Basis::X => equatorial(0.0),
            Basis::Y => equatorial(std::f64::consts::FRAC_PI_2),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::Z => "Z",
            Basis::X => "X",
            Basis::Y => "Y",
        };
        f.write_str(s)
    }
}

impl FromStr for Basis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            "Y" | "y" => Ok(Basis::Y),
            other => Err(format!("unknown basis `{other}` (expected Z, X or Y)")),
        }
    }
}

/// Joint outcome of a two-party measurement, Alice's sign first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    PlusPlus,
    PlusMinus,
    MinusPlus,
    MinusMinus,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::PlusPlus,
        Outcome::PlusMinus,
        Outcome::MinusPlus,
        Outcome::MinusMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(alice, bob)` outcome indices, 0 for `+` and 1 for `−`.
    pub fn parts(self) -> (usize, usize) {
        let k = self.index();
        (k / 2, k % 2)
    }

    /// Product of the two ±1 eigenvalues.
    pub fn parity(self) -> f64 {
        match self {
            Outcome::PlusPlus | Outcome::MinusMinus => 1.0,
            Outcome::PlusMinus | Outcome::MinusPlus => -1.0,
        }
    }
}

/// A pair of local bases, one per party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub alice: Basis,
    pub bob: Basis,
}

impl MeasurementSetting {
    pub const fn new(alice: Basis, bob: Basis) -> Self {
        MeasurementSetting { alice, bob }
    }

    /// The nine tomographic settings in Z, X, Y order for each party.
    pub fn tomography_set() -> Vec<MeasurementSetting> {
        Basis::ALL
            .iter()
            .flat_map(|&a| Basis::ALL.iter().map(move |&b| MeasurementSetting::new(a, b)))
            .collect()
    }

    /// Product vectors `|a⟩ ⊗ |b⟩` for the four joint outcomes.
    pub fn outcome_vectors(&self) -> [[C64; 4]; 4] {
        product_vectors(&self.alice.eigenvectors(), &self.bob.eigenvectors())
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.alice, self.bob)
    }
}

impl FromStr for MeasurementSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => Ok(MeasurementSetting::new(
                a.to_string().parse()?,
                b.to_string().parse()?,
            )),
            _ => Err(format!("setting `{s}` must be two basis letters, e.g. ZX")),
        }
    }
}

/// Tensor products of two local eigenvector pairs, ordered like [`Outcome::ALL`].
pub fn product_vectors(alice: &[[C64; 2]; 2], bob: &[[C64; 2]; 2]) -> [[C64; 4]; 4] {
    let mut out = [[ZERO; 4]; 4];
    for outcome in Outcome::ALL {
        let (ia, ib) = outcome.parts();
        let a = alice[ia];
        let b = bob[ib];
        out[outcome.index()] = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paulis_square_to_identity() {
        for p in Pauli::ALL {
            let m = p.matrix();
            let sq = m.mul(&m);
            assert_eq!(sq, Mat2::identity(), "{p:?}");
        }
    }

    #[test]
    fn projectors_are_orthonormal_and_complete() {
        for basis in Basis::ALL {
            for delta in [0.0, 0.3] {
                let v = basis.eigenvectors_with_phase_error(delta);
                let inner = |x: &[C64; 2], y: &[C64; 2]| x[0].conj() * y[0] + x[1].conj() * y[1];
                assert!((inner(&v[0], &v[0]) - ONE).norm() < 1e-15);
                assert!((inner(&v[1], &v[1]) - ONE).norm() < 1e-15);
                assert!(inner(&v[0], &v[1]).norm() < 1e-15);
                // completeness: Σ |v⟩⟨v| = I
                for r in 0..2 {
                    for c in 0..2 {
                        let s = v[0][r] * v[0][c].conj() + v[1][r] * v[1][c].conj();
                        let want = if r == c { ONE } else { ZERO };
                        assert!((s - want).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn eigenvectors_match_pauli_eigenvalues() {
        for basis in Basis::ALL {
            let m = basis.pauli().matrix();
            let v = basis.eigenvectors();
            for (k, sign) in [(0usize, 1.0), (1, -1.0)] {
                let mv = [
                    m.0[0][0] * v[k][0] + m.0[0][1] * v[k][1],
                    m.0[1][0] * v[k][0] + m.0[1][1] * v[k][1],
                ];
                assert!((mv[0] - v[k][0] * sign).norm() < 1e-15);
                assert!((mv[1] - v[k][1] * sign).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn setting_parse_round_trip() {
        for s in MeasurementSetting::tomography_set() {
            assert_eq!(s.to_string().parse::<MeasurementSetting>().unwrap(), s);
        }
        assert!("ZQ".parse::<MeasurementSetting>().is_err());
        assert!("ZXY".parse::<MeasurementSetting>().is_err());
    }
}
