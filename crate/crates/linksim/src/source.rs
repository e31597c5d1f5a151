//! Pair state delivered to the analyzers and its outcome statistics.

use pathlink_core::linalg::{Mat4, C64};
use pathlink_core::quantum::{product_vectors, MeasurementSetting, TwoQubitState};

use crate::config::{AnalyzerParams, LinkConfig, SourceParams};
use crate::LinkError;

/// `(1 − w)|Φ_φ⟩⟨Φ_φ| + w·I/4` with `|Φ_φ⟩ = a|00⟩ + b·e^{iφ}|11⟩` and
/// `w = 1 − (1 − noise_floor)(1 − multi_pair_fraction)`.
pub fn effective_state(
    residual_phase_rad: f64,
    source: &SourceParams,
    noise_floor: f64,
) -> Result<TwoQubitState, LinkError> {
    if !(0.0..1.0).contains(&noise_floor) {
        return Err(LinkError::Config {
            field: "noise_floor".into(),
            message: format!("{noise_floor} outside [0, 1)"),
        });
    }
    let w = 1.0 - (1.0 - noise_floor) * (1.0 - source.multi_pair_fraction);
    let (a, b) = source.amplitudes();
    let zero = C64::new(0.0, 0.0);
    let psi = [
        C64::new(a, 0.0),
        zero,
        zero,
        C64::from_polar(b, residual_phase_rad),
    ];
    let pure = Mat4::outer(&psi, &psi).scale(1.0 - w);
    let noise = Mat4::identity().scale(w / 4.0);
    Ok(TwoQubitState::normalized(pure + noise).expect("positive trace"))
}

/// Outcome vectors of a setting with the analyzer offsets applied.
pub fn analyzer_vectors(setting: MeasurementSetting, analyzer: &AnalyzerParams) -> [[C64; 4]; 4] {
    let a = setting
        .alice
        .eigenvectors_with_phase_error(analyzer.phase_error(setting.alice));
    let b = setting
        .bob
        .eigenvectors_with_phase_error(analyzer.phase_error(setting.bob));
    product_vectors(&a, &b)
}

/// Outcome probabilities of true pairs for one setting as a function of the
/// residual phase: `P_k(φ) = (1 − w)(A_k + B_k cos φ − C_k sin φ) + w/4`.
///
/// Only the |00⟩ and |11⟩ amplitudes of the pair state are non-zero, so each
/// outcome amplitude is `α_k + β_k e^{iφ}` and its modulus squared has this
/// form exactly.
#[derive(Clone, Copy, Debug)]
pub struct OutcomeModel {
    a: [f64; 4],
    b: [f64; 4],
    c: [f64; 4],
    w: f64,
}

impl OutcomeModel {
    pub fn new(config: &LinkConfig, setting: MeasurementSetting) -> Self {
        let (amp0, amp1) = config.source.amplitudes();
        let vecs = analyzer_vectors(setting, &config.analyzer);
        let mut m = OutcomeModel {
            a: [0.0; 4],
            b: [0.0; 4],
            c: [0.0; 4],
            w: config.white_noise_weight(),
        };
        for (k, v) in vecs.iter().enumerate() {
            let alpha = v[0].conj() * amp0;
            let beta = v[3].conj() * amp1;
            let gamma = alpha.conj() * beta;
            m.a[k] = alpha.norm_sqr() + beta.norm_sqr();
            m.b[k] = 2.0 * gamma.re;
            m.c[k] = 2.0 * gamma.im;
        }
        m
    }

    pub fn probabilities(&self, phi: f64) -> [f64; 4] {
        let (s, c) = phi.sin_cos();
        self.probabilities_from_trig(c, s)
    }

    /// Probabilities with `cos φ`, `sin φ` replaced by their averages over a
    /// residual distribution.
    pub fn probabilities_from_trig(&self, cos_phi: f64, sin_phi: f64) -> [f64; 4] {
        std::array::from_fn(|k| {
            let pure = self.a[k] + self.b[k] * cos_phi - self.c[k] * sin_phi;
            (1.0 - self.w) * pure.max(0.0) + self.w / 4.0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pathlink_core::quantum::{bell_phi_minus, bell_phi_plus, born_probabilities_with, fidelity};
    use std::f64::consts::PI;

    #[test]
    fn ideal_source_gives_bell_states() {
        let ideal = SourceParams {
            multi_pair_fraction: 0.0,
            ..SourceParams::default()
        };
        let s = effective_state(0.0, &ideal, 0.0).unwrap();
        assert!(s.matrix().max_abs_diff(bell_phi_plus().matrix()) < 1e-15);
        let s = effective_state(PI, &ideal, 0.0).unwrap();
        assert!(s.matrix().max_abs_diff(bell_phi_minus().matrix()) < 1e-15);
        assert!(effective_state(0.0, &ideal, 1.0).is_err());
    }

    #[test]
    fn werner_weight_from_noise_sources() {
        let src = SourceParams::default();
        let s = effective_state(0.0, &src, 0.02).unwrap();
        let w: f64 = 1.0 - 0.98 * 0.97;
        assert!((w - 0.0494).abs() < 1e-12);
        let f = fidelity(&s, &bell_phi_plus()).unwrap();
        assert!((f - (1.0 - 0.75 * w)).abs() < 1e-12);
    }

    #[test]
    fn fast_model_matches_born_rule() {
        let mut cfg = LinkConfig::default();
        cfg.source.spiral_imbalance = 1.3;
        cfg.channel.noise_floor = 0.04;
        cfg.analyzer.x_phase_error_rad = 0.1;
        cfg.analyzer.y_phase_error_rad = -0.2;
        for setting in MeasurementSetting::tomography_set() {
            let m = OutcomeModel::new(&cfg, setting);
            for phi in [0.0, 0.3, -1.2, 2.9] {
                let rho = effective_state(phi, &cfg.source, cfg.channel.noise_floor).unwrap();
                let ea = setting.alice.eigenvectors_with_phase_error(cfg.analyzer.phase_error(setting.alice));
                let eb = setting.bob.eigenvectors_with_phase_error(cfg.analyzer.phase_error(setting.bob));
                let born = born_probabilities_with(&rho, &ea, &eb).unwrap();
                let fast = m.probabilities(phi);
                for k in 0..4 {
                    assert!((born[k] - fast[k]).abs() < 1e-14, "{setting} φ={phi}");
                }
            }
        }
    }
}
