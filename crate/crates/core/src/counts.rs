//! Coincidence count tables: the hand-off between simulation and analysis.

use serde::{Deserialize, Serialize};

use crate::quantum::{Basis, MeasurementSetting, Outcome};

/// Counts for the four joint outcomes of one setting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl OutcomeCounts {
    pub fn from_array(c: [u64; 4]) -> Self {
        OutcomeCounts {
            pp: c[0],
            pm: c[1],
            mp: c[2],
            mm: c[3],
        }
    }

    pub fn as_array(&self) -> [u64; 4] {
        [self.pp, self.pm, self.mp, self.mm]
    }

    pub fn get(&self, o: Outcome) -> u64 {
        self.as_array()[o.index()]
    }

    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }
}

/// One acquired setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub basis_alice: Basis,
    pub basis_bob: Basis,
    pub integration_s: f64,
    pub counts: OutcomeCounts,
    /// Expected accidental coincidences over the integration window.
    #[serde(default)]
    pub accidental_estimate: f64,
}

impl SettingCounts {
    pub fn setting(&self) -> MeasurementSetting {
        MeasurementSetting::new(self.basis_alice, self.basis_bob)
    }

    pub fn total(&self) -> u64 {
        self.counts.total()
    }
}

/// Coincidence counts keyed by `(alice basis, bob basis, outcome)`.
///
/// Settings keep their acquisition order; adding a setting that is already
/// present merges counts and integration time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub settings: Vec<SettingCounts>,
}

impl CountTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        setting: MeasurementSetting,
        integration_s: f64,
        counts: [u64; 4],
        accidental_estimate: f64,
    ) {
        if let Some(existing) = self.settings.iter_mut().find(|s| s.setting() == setting) {
            let merged: Vec<u64> = existing
                .counts
                .as_array()
                .iter()
                .zip(counts)
                .map(|(a, b)| a + b)
                .collect();
            existing.counts = OutcomeCounts::from_array([merged[0], merged[1], merged[2], merged[3]]);
            existing.integration_s += integration_s;
            existing.accidental_estimate += accidental_estimate;
        } else {
            self.settings.push(SettingCounts {
                basis_alice: setting.alice,
                basis_bob: setting.bob,
                integration_s,
                counts: OutcomeCounts::from_array(counts),
                accidental_estimate,
            });
        }
    }

    pub fn get(&self, setting: MeasurementSetting) -> Option<&SettingCounts> {
        self.settings.iter().find(|s| s.setting() == setting)
    }

    pub fn count(&self, setting: MeasurementSetting, outcome: Outcome) -> u64 {
        self.get(setting).map_or(0, |s| s.counts.get(outcome))
    }

    pub fn contains(&self, setting: MeasurementSetting) -> bool {
        self.get(setting).is_some()
    }

    pub fn total_counts(&self) -> u64 {
        self.settings.iter().map(|s| s.total()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    /// Applies `f` to every count, keeping settings and integration times.
    pub fn map_counts(&self, mut f: impl FnMut(u64) -> u64) -> CountTable {
        let mut out = self.clone();
        for s in &mut out.settings {
            s.counts = OutcomeCounts::from_array(s.counts.as_array().map(&mut f));
        }
        out
    }
}
