use crate::counts::CountTable;
use crate::quantum::{Basis, CorrelationTensor, MeasurementSetting, Outcome, Pauli, TwoQubitState};

use super::TomographyError;

/// Rows index Alice's outcomes `[Z+, Z−, X+, X−]`, columns Bob's.
pub type JointMatrix = [[f64; 4]; 4];

const BASES: [Basis; 2] = [Basis::Z, Basis::X];

/// Normalized Z/X joint probabilities; each 2×2 block sums to one.
pub fn joint_probability_matrix(table: &CountTable) -> Result<JointMatrix, TomographyError> {
    let mut m = [[0.0; 4]; 4];
    for (ai, a) in BASES.iter().enumerate() {
        for (bi, b) in BASES.iter().enumerate() {
            let s = MeasurementSetting::new(*a, *b);
            let entry = table.get(s).ok_or(TomographyError::MissingSetting(s))?;
            let total = entry.total();
            if total == 0 {
                return Err(TomographyError::EmptySetting(s));
            }
            let c = entry.counts.as_array();
            for (k, n) in c.iter().enumerate() {
                m[2 * ai + k / 2][2 * bi + k % 2] = *n as f64 / total as f64;
            }
        }
    }
    Ok(m)
}

/// Joint probability matrix of `rho`, built from its Pauli correlators as
/// `p(a, b) = (1 + a⟨A⟩ + b⟨B⟩ + ab⟨AB⟩)/4`, which is exact for Bell states.
pub fn ideal_joint_probability_matrix(rho: &TwoQubitState) -> JointMatrix {
    let c = CorrelationTensor::of_state(rho);
    let mut m = [[0.0; 4]; 4];
    for (ai, a) in BASES.iter().enumerate() {
        for (bi, b) in BASES.iter().enumerate() {
            let (pa, pb) = (a.pauli(), b.pauli());
            for o in Outcome::ALL {
                let (ra, rb) = o.parts();
                let sa = if ra == 0 { 1.0 } else { -1.0 };
                let sb = if rb == 0 { 1.0 } else { -1.0 };
                m[2 * ai + ra][2 * bi + rb] = (1.0
                    + sa * c.get(pa, Pauli::I)
                    + sb * c.get(Pauli::I, pb)
                    + sa * sb * c.get(pa, pb))
                    / 4.0;
            }
        }
    }
    m
}

/// Overlap `1 − ¼ Σ_blocks TV(p_exp, p_th)`, where TV is half the L1
/// distance within a block.
pub fn matrix_overlap(p_exp: &JointMatrix, p_th: &JointMatrix) -> Result<f64, TomographyError> {
    let mut tv_sum = 0.0;
    for ai in 0..2 {
        for bi in 0..2 {
            let mut l1 = 0.0;
            for (name, m) in [("experimental", p_exp), ("theoretical", p_th)] {
                let sum: f64 = (0..2)
                    .flat_map(|r| (0..2).map(move |c| (r, c)))
                    .map(|(r, c)| m[2 * ai + r][2 * bi + c])
                    .sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(TomographyError::NotNormalized {
                        matrix: name,
                        block: MeasurementSetting::new(BASES[ai], BASES[bi]),
                        sum,
                    });
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    l1 += (p_exp[2 * ai + r][2 * bi + c] - p_th[2 * ai + r][2 * bi + c]).abs();
                }
            }
            tv_sum += 0.5 * l1;
        }
    }
    Ok(1.0 - tv_sum / 4.0)
}
