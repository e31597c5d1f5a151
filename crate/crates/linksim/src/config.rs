//! Physical parameters of a link.

use serde::{Deserialize, Serialize};

use crate::LinkError;

fn config_err(field: &str, message: impl Into<String>) -> LinkError {
    LinkError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn db_to_transmittance(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    /// Pump pulses per second.
    pub rep_rate: f64,
    /// Pair probability per pulse.
    pub pair_prob_per_pulse: f64,
    pub multi_pair_fraction: f64,
    /// Ratio of |1⟩-path to |0⟩-path pair rates.
    pub spiral_imbalance: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            rep_rate: 5.0e7,
            pair_prob_per_pulse: 0.01,
            multi_pair_fraction: 0.03,
            spiral_imbalance: 1.0,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return Err(config_err("source.rep_rate", "must be positive"));
        }
        if !(self.pair_prob_per_pulse > 0.0 && self.pair_prob_per_pulse < 0.1) {
            return Err(config_err("source.pair_prob_per_pulse", "must lie in (0, 0.1)"));
        }
        if !(0.0..1.0).contains(&self.multi_pair_fraction) {
            return Err(config_err("source.multi_pair_fraction", "must lie in [0, 1)"));
        }
        if !(self.spiral_imbalance > 0.0 && self.spiral_imbalance.is_finite()) {
            return Err(config_err("source.spiral_imbalance", "must be positive"));
        }
        Ok(())
    }

    /// Amplitudes `(a, b)` of `a|00⟩ + b|11⟩`.
    pub fn amplitudes(&self) -> (f64, f64) {
        let r = self.spiral_imbalance;
        ((1.0 / (1.0 + r)).sqrt(), (r / (1.0 + r)).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub length_km: f64,
    pub atten_db_per_km: f64,
    pub coupling_loss_db_per_facet: f64,
    pub n_facets_signal: u32,
    pub n_facets_idler: u32,
    pub insertion_loss_db: f64,
    pub detector_efficiency: f64,
    /// Per detector; each party has two.
    pub dark_count_rate_hz: f64,
    pub coincidence_window_s: f64,
    /// White-noise weight mixed into the pair state on top of multi-pair
    /// emission.
    pub noise_floor: f64,
    /// Uncorrelated counts reaching the signal-side detectors per km of
    /// fiber (Raman scattering, crosstalk from the co-propagating reference).
    pub fiber_noise_rate_hz_per_km: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            length_km: 0.0,
            atten_db_per_km: 0.20,
            coupling_loss_db_per_facet: 7.0,
            n_facets_signal: 2,
            n_facets_idler: 1,
            insertion_loss_db: 0.0,
            detector_efficiency: 0.91,
            dark_count_rate_hz: 100.0,
            coincidence_window_s: 2.0e-10,
            noise_floor: 0.0,
            fiber_noise_rate_hz_per_km: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let non_negative = [
            ("channel.length_km", self.length_km),
            ("channel.atten_db_per_km", self.atten_db_per_km),
            ("channel.coupling_loss_db_per_facet", self.coupling_loss_db_per_facet),
            ("channel.insertion_loss_db", self.insertion_loss_db),
            ("channel.dark_count_rate_hz", self.dark_count_rate_hz),
            ("channel.fiber_noise_rate_hz_per_km", self.fiber_noise_rate_hz_per_km),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(field, "must be non-negative"));
            }
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(config_err("channel.detector_efficiency", "must lie in (0, 1]"));
        }
        if !(self.coincidence_window_s > 0.0 && self.coincidence_window_s.is_finite()) {
            return Err(config_err("channel.coincidence_window_s", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.noise_floor) {
            return Err(config_err("channel.noise_floor", "must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn signal_loss_db(&self) -> f64 {
        self.n_facets_signal as f64 * self.coupling_loss_db_per_facet
            + self.atten_db_per_km * self.length_km
            + self.insertion_loss_db
    }

    pub fn idler_loss_db(&self) -> f64 {
        self.n_facets_idler as f64 * self.coupling_loss_db_per_facet
    }

    /// Signal-arm transmittance before detection.
    pub fn signal_transmittance(&self) -> f64 {
        db_to_transmittance(self.signal_loss_db())
    }

    pub fn idler_transmittance(&self) -> f64 {
        db_to_transmittance(self.idler_loss_db())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseProcessKind {
    OrnsteinUhlenbeck,
    RandomWalk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseNoiseParams {
    pub process: PhaseProcessKind,
    /// Corner frequency of the drift.
    pub bandwidth_hz: f64,
    /// Stationary standard deviation (OU) or short-time scale (random walk).
    pub std_rad: f64,
    pub jump_rate_hz: f64,
    pub jump_magnitude_rad: f64,
}

impl Default for PhaseNoiseParams {
    fn default() -> Self {
        PhaseNoiseParams {
            process: PhaseProcessKind::OrnsteinUhlenbeck,
            bandwidth_hz: 0.5,
            std_rad: std::f64::consts::FRAC_PI_2,
            jump_rate_hz: 1.0 / 300.0,
            jump_magnitude_rad: std::f64::consts::PI,
        }
    }
}

impl PhaseNoiseParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(config_err("phase_noise.bandwidth_hz", "must be positive"));
        }
        if !(self.std_rad >= 0.0 && self.std_rad.is_finite()) {
            return Err(config_err("phase_noise.std_rad", "must be non-negative"));
        }
        if !(self.jump_rate_hz >= 0.0 && self.jump_rate_hz.is_finite()) {
            return Err(config_err("phase_noise.jump_rate_hz", "must be non-negative"));
        }
        if !self.jump_magnitude_rad.is_finite() {
            return Err(config_err("phase_noise.jump_magnitude_rad", "must be finite"));
        }
        Ok(())
    }

    pub fn quiet() -> Self {
        PhaseNoiseParams {
            std_rad: 0.0,
            jump_rate_hz: 0.0,
            ..PhaseNoiseParams::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelockStrategy {
    #[default]
    FringeScan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PllParams {
    pub loop_rate_hz: f64,
    pub kp: f64,
    /// Integral gain per second.
    pub ki: f64,
    /// Derivative gain in seconds.
    pub kd: f64,
    pub setpoint_fraction: f64,
    pub unlock_threshold: f64,
    pub relock_strategy: RelockStrategy,
    /// Visibility of the reference fringe seen by the photodiode.
    pub fringe_visibility: f64,
    /// Fiber stretcher range; exceeding it forces a relock.
    pub actuator_range_rad: f64,
    pub scan_rate_rad_per_s: f64,
    /// Time constant of the lock detector's error filter.
    pub lock_filter_s: f64,
}

impl Default for PllParams {
    fn default() -> Self {
        PllParams {
            loop_rate_hz: 1000.0,
            kp: 0.05,
            ki: 900.0,
            kd: 0.0,
            setpoint_fraction: 0.5,
            unlock_threshold: 0.4,
            relock_strategy: RelockStrategy::FringeScan,
            fringe_visibility: 0.95,
            actuator_range_rad: 8.0 * std::f64::consts::PI,
            scan_rate_rad_per_s: 4.0 * std::f64::consts::PI,
            lock_filter_s: 0.01,
        }
    }
}

impl PllParams {
    pub fn validate(&self, noise: &PhaseNoiseParams) -> Result<(), LinkError> {
        if !(self.loop_rate_hz > 0.0 && self.loop_rate_hz.is_finite()) {
            return Err(config_err("pll.loop_rate_hz", "must be positive"));
        }
        if self.loop_rate_hz <= 2.0 * noise.bandwidth_hz {
            return Err(config_err(
                "pll.loop_rate_hz",
                format!(
                    "{} Hz undersamples {} Hz phase noise (needs more than twice the bandwidth)",
                    self.loop_rate_hz, noise.bandwidth_hz
                ),
            ));
        }
        if !(self.setpoint_fraction > 0.0 && self.setpoint_fraction < 1.0) {
            return Err(config_err("pll.setpoint_fraction", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.fringe_visibility) {
            return Err(config_err("pll.fringe_visibility", "must lie in [0, 1]"));
        }
        if (2.0 * self.setpoint_fraction - 1.0).abs() >= self.fringe_visibility {
            return Err(config_err(
                "pll.setpoint_fraction",
                "setpoint lies outside the fringe swing",
            ));
        }
        for (field, v) in [
            ("pll.kp", self.kp),
            ("pll.ki", self.ki),
            ("pll.kd", self.kd),
            ("pll.unlock_threshold", self.unlock_threshold),
            ("pll.scan_rate_rad_per_s", self.scan_rate_rad_per_s),
            ("pll.lock_filter_s", self.lock_filter_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(field, "must be non-negative"));
            }
        }
        if self.actuator_range_rad.is_nan() || self.actuator_range_rad <= 2.0 * std::f64::consts::PI {
            return Err(config_err("pll.actuator_range_rad", "must exceed 2π"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.loop_rate_hz
    }

    /// True when every gain is zero: the stretcher stays put.
    pub fn is_open_loop(&self) -> bool {
        self.kp == 0.0 && self.ki == 0.0 && self.kd == 0.0
    }

    pub fn open_loop() -> Self {
        PllParams {
            kp: 0.0,
            ki: 0.0,
            kd: 0.0,
            ..PllParams::default()
        }
    }
}

/// Phase offsets of the X and Y analyzer settings from their nominal values,
/// applied on both sides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerParams {
    pub x_phase_error_rad: f64,
    pub y_phase_error_rad: f64,
}

impl AnalyzerParams {
    pub fn phase_error(&self, basis: pathlink_core::quantum::Basis) -> f64 {
        use pathlink_core::quantum::Basis;
        match basis {
            Basis::Z => 0.0,
            Basis::X => self.x_phase_error_rad,
            Basis::Y => self.y_phase_error_rad,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub source: SourceParams,
    pub channel: ChannelParams,
    pub phase_noise: PhaseNoiseParams,
    pub pll: PllParams,
    pub analyzer: AnalyzerParams,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), LinkError> {
        self.source.validate()?;
        self.channel.validate()?;
        self.phase_noise.validate()?;
        self.pll.validate(&self.phase_noise)?;
        for (field, v) in [
            ("analyzer.x_phase_error_rad", self.analyzer.x_phase_error_rad),
            ("analyzer.y_phase_error_rad", self.analyzer.y_phase_error_rad),
        ] {
            if !v.is_finite() {
                return Err(config_err(field, "must be finite"));
            }
        }
        Ok(())
    }

    /// Combined white-noise weight `1 − (1 − noise_floor)(1 − multi_pair)`.
    pub fn white_noise_weight(&self) -> f64 {
        1.0 - (1.0 - self.channel.noise_floor) * (1.0 - self.source.multi_pair_fraction)
    }

    pub fn with_length(&self, length_km: f64) -> LinkConfig {
        let mut c = self.clone();
        c.channel.length_km = length_km;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        LinkConfig::default().validate().unwrap();
    }

    #[test]
    fn undersampled_loop_is_rejected() {
        let mut c = LinkConfig::default();
        c.pll.loop_rate_hz = 1.0;
        match c.validate() {
            Err(LinkError::Config { field, .. }) => assert_eq!(field, "pll.loop_rate_hz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn loss_budget() {
        let mut ch = ChannelParams {
            length_km: 10.0,
            insertion_loss_db: 1.0,
            ..ChannelParams::default()
        };
        assert!((ch.signal_loss_db() - 17.0).abs() < 1e-12);
        assert!((ch.idler_loss_db() - 7.0).abs() < 1e-12);
        let t = ch.signal_transmittance();
        ch.length_km = 25.0;
        // Another 3 dB halves the transmittance (to 10^-0.3).
        assert!((ch.signal_transmittance() / t - 10f64.powf(-0.3)).abs() < 1e-12);
    }
}
