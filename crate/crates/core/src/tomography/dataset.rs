use crate::counts::CountTable;
use crate::linalg::C64;
use crate::quantum::{
    state_from_correlations, CorrelationTensor, LinearInversion, MeasurementSetting, Pauli,
    TwoQubitState,
};

use super::TomographyError;

/// Nine-setting coincidence data, validated for completeness.
#[derive(Clone, Debug)]
pub struct TomographyDataset {
    table: CountTable,
    /// Counts in `MeasurementSetting::tomography_set()` order.
    counts: [[u64; 4]; 9],
    settings: [MeasurementSetting; 9],
}

impl TomographyDataset {
    pub fn new(table: CountTable) -> Result<Self, TomographyError> {
        let settings: [MeasurementSetting; 9] = MeasurementSetting::tomography_set()
            .try_into()
            .expect("nine tomographic settings");
        let mut counts = [[0u64; 4]; 9];
        for (k, s) in settings.iter().enumerate() {
            let entry = table.get(*s).ok_or(TomographyError::MissingSetting(*s))?;
            if entry.total() == 0 {
                return Err(TomographyError::EmptySetting(*s));
            }
            counts[k] = entry.counts.as_array();
        }
        Ok(TomographyDataset {
            table,
            counts,
            settings,
        })
    }

    /// Rounds `shots · p` for every setting of `state`; useful for exact or
    /// noise-free fixtures.
    pub fn from_expected(state: &TwoQubitState, shots: f64) -> Result<Self, TomographyError> {
        let mut table = CountTable::new();
        for s in MeasurementSetting::tomography_set() {
            let p = state.probabilities_for(&s.outcome_vectors());
            table.add(s, 1.0, p.map(|x| (x * shots).round() as u64), 0.0);
        }
        Self::new(table)
    }

    pub fn table(&self) -> &CountTable {
        &self.table
    }

    pub fn settings(&self) -> &[MeasurementSetting; 9] {
        &self.settings
    }

    pub fn counts(&self) -> &[[u64; 4]; 9] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Outcome vectors aligned with [`Self::counts`].
    pub(crate) fn outcome_vectors(&self) -> Vec<[C64; 4]> {
        self.settings
            .iter()
            .flat_map(|s| s.outcome_vectors())
            .collect()
    }

    /// Multinomial log-likelihood `Σ n_k ln p_k(ρ)`, probabilities floored at
    /// 1e-12.
    pub fn log_likelihood(&self, rho: &TwoQubitState) -> f64 {
        let mut ll = 0.0;
        for (k, s) in self.settings.iter().enumerate() {
            let p = rho.probabilities_for(&s.outcome_vectors());
            for (n, pk) in self.counts[k].iter().zip(p) {
                if *n > 0 {
                    ll += *n as f64 * pk.max(super::PROB_FLOOR).ln();
                }
            }
        }
        ll
    }
}

/// Pauli correlations estimated from counts.
///
/// Two-body terms come from the parity of each setting; single-party terms
/// average the marginal over the other party's three bases.
pub fn correlations_from_counts(data: &TomographyDataset) -> CorrelationTensor {
    let mut c = CorrelationTensor([[0.0; 4]; 4]);
    c.set(Pauli::I, Pauli::I, 1.0);
    for (k, s) in data.settings().iter().enumerate() {
        let n = data.counts()[k].map(|x| x as f64);
        let total: f64 = n.iter().sum();
        let (pp, pm, mp, mm) = (n[0], n[1], n[2], n[3]);
        let ia = s.alice.pauli();
        let ib = s.bob.pauli();
        c.set(ia, ib, (pp - pm - mp + mm) / total);
        let alice_marginal = (pp + pm - mp - mm) / total;
        let bob_marginal = (pp - pm + mp - mm) / total;
        c.set(ia, Pauli::I, c.get(ia, Pauli::I) + alice_marginal / 3.0);
        c.set(Pauli::I, ib, c.get(Pauli::I, ib) + bob_marginal / 3.0);
    }
    c
}

/// Linear-inversion estimate; may be non-physical.
pub fn linear_inversion(data: &TomographyDataset) -> LinearInversion {
    state_from_correlations(&correlations_from_counts(data))
        .expect("c_00 is fixed to 1 by construction")
}
