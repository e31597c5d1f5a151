//! Coincidence-count simulation over a measurement schedule.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use pathlink_core::counts::CountTable;
use pathlink_core::quantum::{Basis, MeasurementSetting, Outcome};
use pathlink_core::rng::{rng_from_seed, SimRng};

use crate::analytic::LinkRates;
use crate::config::LinkConfig;
use crate::pll::{PhaseLoop, PhaseStats, PhaseSummary, PhaseTrace};
use crate::source::OutcomeModel;
use crate::LinkError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub setting: MeasurementSetting,
    pub integration_s: f64,
}

impl ScheduleEntry {
    pub fn new(alice: Basis, bob: Basis, integration_s: f64) -> Self {
        ScheduleEntry {
            setting: MeasurementSetting::new(alice, bob),
            integration_s,
        }
    }
}

/// All nine tomographic settings, each for `integration_s`.
pub fn tomography_schedule(integration_s: f64) -> Vec<ScheduleEntry> {
    MeasurementSetting::tomography_set()
        .into_iter()
        .map(|setting| ScheduleEntry {
            setting,
            integration_s,
        })
        .collect()
}

/// ZZ, XX and YY, each for `integration_s`.
pub fn key_schedule(integration_s: f64) -> Vec<ScheduleEntry> {
    Basis::ALL
        .into_iter()
        .map(|b| ScheduleEntry::new(b, b, integration_s))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    /// Keep every n-th loop tick in the returned trace.
    pub trace_decimation: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            trace_decimation: 100,
        }
    }
}

/// What the generator knows about each setting beyond the counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingTruth {
    pub setting: MeasurementSetting,
    /// Outcomes of detected true pairs.
    pub true_counts: [u64; 4],
    pub accidental_counts: [u64; 4],
    /// Sum over recorded events of each event's error probability at the
    /// moment it was drawn; only meaningful for matched bases.
    pub expected_errors: f64,
    pub phase: PhaseSummary,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub counts: CountTable,
    pub trace: PhaseTrace,
    pub truth: Vec<SettingTruth>,
}

/// Draws per-tick event counts, by table inversion when the mean is small.
enum CountSampler {
    Zero,
    Table(Vec<f64>),
    Binomial(Binomial),
    Poisson(Poisson<f64>),
}

const TABLE_MEAN_LIMIT: f64 = 40.0;

impl CountSampler {
    fn binomial(n: u64, p: f64) -> Self {
        if n == 0 || p <= 0.0 {
            return CountSampler::Zero;
        }
        let mean = n as f64 * p;
        if mean >= TABLE_MEAN_LIMIT || p >= 0.5 {
            return CountSampler::Binomial(Binomial::new(n, p).expect("p in [0, 1]"));
        }
        let mut pmf = (n as f64 * (-p).ln_1p()).exp();
        let ratio = p / (1.0 - p);
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        let mut k = 0u64;
        loop {
            acc += pmf;
            cdf.push(acc);
            if k >= n || (k as f64 > mean && pmf < 1e-17) {
                break;
            }
            pmf *= (n - k) as f64 / (k + 1) as f64 * ratio;
            k += 1;
        }
        CountSampler::Table(cdf)
    }

    fn poisson(lambda: f64) -> Self {
        if lambda <= 0.0 {
            return CountSampler::Zero;
        }
        if lambda >= TABLE_MEAN_LIMIT {
            return CountSampler::Poisson(Poisson::new(lambda).expect("positive rate"));
        }
        let mut pmf = (-lambda).exp();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        let mut k = 0u64;
        loop {
            acc += pmf;
            cdf.push(acc);
            if k as f64 > lambda && pmf < 1e-17 {
                break;
            }
            pmf *= lambda / (k + 1) as f64;
            k += 1;
        }
        CountSampler::Table(cdf)
    }

    fn sample(&self, rng: &mut SimRng) -> u64 {
        match self {
            CountSampler::Zero => 0,
            CountSampler::Table(cdf) => {
                let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1) as u64
            }
            CountSampler::Binomial(d) => d.sample(rng),
            CountSampler::Poisson(d) => d.sample(rng) as u64,
        }
    }
}

fn error_outcomes(setting: MeasurementSetting) -> Option<[bool; 4]> {
    if setting.alice != setting.bob {
        return None;
    }
    let anti = setting.alice == Basis::Y;
    Some(Outcome::ALL.map(|o| (o.parity() < 0.0) != anti))
}

fn pick(p: &[f64; 4], rng: &mut SimRng) -> usize {
    let total: f64 = p.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    3
}

/// Runs the schedule back to back on one continuous phase/PLL timeline.
pub fn simulate_counts(
    config: &LinkConfig,
    schedule: &[ScheduleEntry],
    seed: u64,
) -> Result<Simulation, LinkError> {
    simulate_counts_with(config, schedule, seed, &SimOptions::default())
}

pub fn simulate_counts_with(
    config: &LinkConfig,
    schedule: &[ScheduleEntry],
    seed: u64,
    opts: &SimOptions,
) -> Result<Simulation, LinkError> {
    config.validate()?;
    if schedule.is_empty() {
        return Err(LinkError::Config {
            field: "schedule".into(),
            message: "must not be empty".into(),
        });
    }
    for e in schedule {
        if !(e.integration_s > 0.0 && e.integration_s.is_finite()) {
            return Err(LinkError::Config {
                field: "schedule.integration_s".into(),
                message: format!("{} for {} must be positive", e.integration_s, e.setting),
            });
        }
    }
    let rates = LinkRates::of(config);
    let mut rng = rng_from_seed(seed);
    let mut lp = PhaseLoop::new(&config.phase_noise, &config.pll, &mut rng, &[])?;
    let dt = lp.dt();
    let pulses = (config.source.rep_rate * dt).round() as u64;
    let true_sampler = CountSampler::binomial(pulses, rates.true_prob_per_pulse);
    let acc_sampler = CountSampler::poisson(rates.accidental_rate_hz * dt);
    let decimation = opts.trace_decimation.max(1) as u64;

    let mut counts = CountTable::new();
    let mut trace = PhaseTrace::default();
    let mut truth = Vec::with_capacity(schedule.len());
    let mut tick_index = 0u64;
    for entry in schedule {
        let model = OutcomeModel::new(config, entry.setting);
        let errors = error_outcomes(entry.setting);
        let ticks = ((entry.integration_s / dt).round() as u64).max(1);
        let mut true_counts = [0u64; 4];
        let mut acc_counts = [0u64; 4];
        let mut expected_errors = 0.0;
        let mut stats = PhaseStats::default();
        for _ in 0..ticks {
            let s = lp.step(&mut rng);
            stats.add(s.residual_rad, s.locked);
            if tick_index.is_multiple_of(decimation) {
                trace.push(&s);
            }
            tick_index += 1;
            let n_true = true_sampler.sample(&mut rng);
            if n_true > 0 {
                let p = model.probabilities(s.residual_rad);
                let p_err = errors.map_or(0.0, |e| {
                    (0..4).filter(|k| e[*k]).map(|k| p[k]).sum::<f64>() / p.iter().sum::<f64>()
                });
                for _ in 0..n_true {
                    true_counts[pick(&p, &mut rng)] += 1;
                }
                expected_errors += n_true as f64 * p_err;
            }
            let n_acc = acc_sampler.sample(&mut rng);
            for _ in 0..n_acc {
                acc_counts[rng.random_range(0..4)] += 1;
            }
            if errors.is_some() {
                expected_errors += 0.5 * n_acc as f64;
            }
        }
        let integration = ticks as f64 * dt;
        let total: Vec<u64> = (0..4).map(|k| true_counts[k] + acc_counts[k]).collect();
        counts.add(
            entry.setting,
            integration,
            [total[0], total[1], total[2], total[3]],
            rates.accidental_rate_hz * integration,
        );
        truth.push(SettingTruth {
            setting: entry.setting,
            true_counts,
            accidental_counts: acc_counts,
            expected_errors,
            phase: stats.summary(),
        });
    }
    Ok(Simulation {
        counts,
        trace,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sampler_moments() {
        let mut rng = rng_from_seed(1);
        for sampler in [CountSampler::binomial(50_000, 6e-5), CountSampler::poisson(3.0)] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng) as f64).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((mean - 3.0).abs() < 0.02, "mean {mean}");
            assert!((var - 3.0).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn error_masks() {
        let zz = error_outcomes(MeasurementSetting::new(Basis::Z, Basis::Z)).unwrap();
        assert_eq!(zz, [false, true, true, false]);
        let yy = error_outcomes(MeasurementSetting::new(Basis::Y, Basis::Y)).unwrap();
        assert_eq!(yy, [true, false, false, true]);
        assert!(error_outcomes(MeasurementSetting::new(Basis::Z, Basis::X)).is_none());
    }
}
