//! Closed-form expectations for a link: rates, outcome probabilities and
//! key-rate inputs.

use pathlink_core::counts::CountTable;
use pathlink_core::qkd::{skr_asymptotic, LinkModel, LinkPoint, QberReport, SkrParams};
use pathlink_core::quantum::{Basis, MeasurementSetting, Outcome};

use crate::config::LinkConfig;
use crate::pll::pll_run;
use crate::sim::ScheduleEntry;
use crate::source::OutcomeModel;
use crate::LinkError;

/// Expected accidental coincidences per second.
pub fn accidental_rate(singles_a_hz: f64, singles_b_hz: f64, window_s: f64) -> f64 {
    singles_a_hz * singles_b_hz * window_s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkRates {
    pub t_signal: f64,
    pub t_idler: f64,
    pub eta: f64,
    /// `μ·T_s·T_i·η²`.
    pub true_prob_per_pulse: f64,
    pub true_rate_hz: f64,
    /// Alice (idler) singles over both detectors, darks included.
    pub singles_a_hz: f64,
    /// Bob (signal) singles, with fiber noise.
    pub singles_b_hz: f64,
    pub accidental_rate_hz: f64,
}

impl LinkRates {
    pub fn of(config: &LinkConfig) -> Self {
        let ch = &config.channel;
        let src = &config.source;
        let t_signal = ch.signal_transmittance();
        let t_idler = ch.idler_transmittance();
        let eta = ch.detector_efficiency;
        let mu = src.pair_prob_per_pulse;
        let true_prob_per_pulse = mu * t_signal * t_idler * eta * eta;
        let darks = 2.0 * ch.dark_count_rate_hz;
        let singles_a_hz = mu * src.rep_rate * t_idler * eta + darks;
        let singles_b_hz = mu * src.rep_rate * t_signal * eta
            + darks
            + ch.fiber_noise_rate_hz_per_km * ch.length_km;
        LinkRates {
            t_signal,
            t_idler,
            eta,
            true_prob_per_pulse,
            true_rate_hz: true_prob_per_pulse * src.rep_rate,
            singles_a_hz,
            singles_b_hz,
            accidental_rate_hz: accidental_rate(singles_a_hz, singles_b_hz, ch.coincidence_window_s),
        }
    }

    pub fn coincidence_rate_hz(&self) -> f64 {
        self.true_rate_hz + self.accidental_rate_hz
    }
}

/// Averages of `cos φ` and `sin φ` over the stabilized residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coherence {
    pub mean_cos: f64,
    pub mean_sin: f64,
}

/// Seed and length of the reference loop run used to estimate coherence.
pub const COHERENCE_SEED: u64 = 0x00C0_FFEE;
pub const COHERENCE_DURATION_S: f64 = 120.0;

impl Coherence {
    pub const PERFECT: Coherence = Coherence {
        mean_cos: 1.0,
        mean_sin: 0.0,
    };

    /// Estimated from a fixed-seed run of the configured loop, so repeated
    /// evaluations are identical.
    pub fn estimate(config: &LinkConfig) -> Result<Self, LinkError> {
        let noise = &config.phase_noise;
        if noise.std_rad == 0.0 && noise.jump_rate_hz == 0.0 {
            return Ok(Coherence::PERFECT);
        }
        let trace = pll_run(noise, &config.pll, COHERENCE_DURATION_S, COHERENCE_SEED)?;
        let n = trace.len() as f64;
        let (c, s) = trace
            .residual_rad
            .iter()
            .fold((0.0, 0.0), |(c, s), r| (c + r.cos(), s + r.sin()));
        Ok(Coherence {
            mean_cos: c / n,
            mean_sin: s / n,
        })
    }
}

/// Link with its phase coherence resolved.
#[derive(Clone, Debug)]
pub struct AnalyticLink {
    pub config: LinkConfig,
    pub coherence: Coherence,
    /// Supplies `f`, `S` and the security parameters.
    pub skr_template: SkrParams,
    pub rates: LinkRates,
}

impl AnalyticLink {
    pub fn new(config: &LinkConfig, skr_template: SkrParams) -> Result<Self, LinkError> {
        config.validate()?;
        let coherence = Coherence::estimate(config)?;
        Ok(Self::with_coherence(config, skr_template, coherence))
    }

    pub fn with_coherence(config: &LinkConfig, skr_template: SkrParams, coherence: Coherence) -> Self {
        AnalyticLink {
            config: config.clone(),
            coherence,
            skr_template,
            rates: LinkRates::of(config),
        }
    }

    /// Outcome distribution of all coincidences in `setting`, accidentals
    /// included.
    pub fn outcome_probabilities(&self, setting: MeasurementSetting) -> [f64; 4] {
        let p_true = OutcomeModel::new(&self.config, setting)
            .probabilities_from_trig(self.coherence.mean_cos, self.coherence.mean_sin);
        let total = self.rates.coincidence_rate_hz();
        let f_true = self.rates.true_rate_hz / total;
        p_true.map(|p| f_true * p + (1.0 - f_true) / 4.0)
    }

    pub fn expected_counts(&self, setting: MeasurementSetting, integration_s: f64) -> [f64; 4] {
        let n = self.rates.coincidence_rate_hz() * integration_s;
        self.outcome_probabilities(setting).map(|p| p * n)
    }

    /// Rounded expected counts for a schedule.
    pub fn expected_table(&self, schedule: &[ScheduleEntry]) -> CountTable {
        let mut t = CountTable::new();
        for e in schedule {
            let c = self.expected_counts(e.setting, e.integration_s);
            t.add(
                e.setting,
                e.integration_s,
                c.map(|x| x.round() as u64),
                self.rates.accidental_rate_hz * e.integration_s,
            );
        }
        t
    }

    pub fn qber(&self, basis: Basis) -> f64 {
        let p = self.outcome_probabilities(MeasurementSetting::new(basis, basis));
        let anti = basis == Basis::Y;
        Outcome::ALL
            .iter()
            .filter(|o| (o.parity() < 0.0) != anti)
            .map(|o| p[o.index()])
            .sum()
    }

    pub fn qber_report(&self) -> QberReport {
        QberReport::from_values(self.qber(Basis::Z), self.qber(Basis::X), self.qber(Basis::Y))
    }

    /// Key-rate inputs with `α = T_signal`, `η` the detector efficiency and
    /// `R_r` chosen so that `R_r·α·η` is the key-basis coincidence rate.
    pub fn skr_params(&self) -> SkrParams {
        let alpha = self.rates.t_signal;
        let eta = self.rates.eta;
        SkrParams {
            raw_rate_hz: self.rates.coincidence_rate_hz() / (alpha * eta),
            alpha,
            eta,
            ..self.skr_template
        }
    }

    pub fn skr_asymptotic(&self) -> Result<f64, LinkError> {
        Ok(skr_asymptotic(
            self.qber(Basis::Z).min(0.5),
            self.qber(Basis::X).min(0.5),
            &self.skr_params(),
        )?)
    }

    pub fn at_length(&self, length_km: f64) -> AnalyticLink {
        AnalyticLink::with_coherence(&self.config.with_length(length_km), self.skr_template, self.coherence)
    }
}

impl LinkModel for AnalyticLink {
    type Error = LinkError;

    fn operating_point(&self, length_km: f64) -> Result<LinkPoint, LinkError> {
        let at = self.at_length(length_km);
        at.config.validate()?;
        Ok(LinkPoint {
            qber_z: at.qber(Basis::Z),
            qber_x: at.qber(Basis::X),
            params: at.skr_params(),
        })
    }
}
