//! Detection time tags, for export and for checking coincidence accounting.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp};

use pathlink_core::quantum::MeasurementSetting;
use pathlink_core::rng::{rng_from_seed, SimRng};

use crate::analytic::LinkRates;
use crate::config::LinkConfig;
use crate::source::OutcomeModel;
use crate::LinkError;

pub const ALICE: u8 = 0;
pub const BOB: u8 = 1;

/// One detection: party channel, time in picoseconds, detector (0 for the
/// `+` port, 1 for `−`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimestampRecord {
    pub channel_id: u8,
    pub time_ps: u64,
    pub detector_id: u8,
}

fn poisson_times(rate_hz: f64, duration_s: f64, rng: &mut SimRng) -> Vec<f64> {
    let mut out = Vec::new();
    if rate_hz <= 0.0 {
        return out;
    }
    let gap = Exp::new(rate_hz).expect("positive rate");
    let mut t = gap.sample(rng);
    while t < duration_s {
        out.push(t);
        t += gap.sample(rng);
    }
    out
}

fn to_ps(t: f64) -> u64 {
    (t * 1e12).round() as u64
}

/// Tag stream for one setting with the phase held at the lock point. True
/// pairs give one tag per side, Bob's jittered by up to a quarter window;
/// the remaining singles are independent Poisson streams on random
/// detectors. Records come out sorted by time.
pub fn emit_timestamps(
    config: &LinkConfig,
    setting: MeasurementSetting,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<TimestampRecord>, LinkError> {
    config.validate()?;
    let rates = LinkRates::of(config);
    let model = OutcomeModel::new(config, setting);
    let probs = model.probabilities(0.0);
    let mut rng = rng_from_seed(seed);
    let window = config.channel.coincidence_window_s;
    let mut records = Vec::new();
    for t in poisson_times(rates.true_rate_hz, duration_s, &mut rng) {
        let u = rng.random::<f64>() * probs.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut k = 3;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        let jitter = (rng.random::<f64>() - 0.5) * window / 2.0;
        records.push(TimestampRecord {
            channel_id: ALICE,
            time_ps: to_ps(t),
            detector_id: (k / 2) as u8,
        });
        records.push(TimestampRecord {
            channel_id: BOB,
            time_ps: to_ps((t + jitter).max(0.0)),
            detector_id: (k % 2) as u8,
        });
    }
    for (channel, rate) in [
        (ALICE, rates.singles_a_hz - rates.true_rate_hz),
        (BOB, rates.singles_b_hz - rates.true_rate_hz),
    ] {
        for t in poisson_times(rate.max(0.0), duration_s, &mut rng) {
            records.push(TimestampRecord {
                channel_id: channel,
                time_ps: to_ps(t),
                detector_id: rng.random_range(0..2),
            });
        }
    }
    records.sort_by_key(|r| (r.time_ps, r.channel_id, r.detector_id));
    Ok(records)
}

/// Pairs each Alice tag with the Bob tags within `±window/2` and bins them
/// by joint outcome (`++`, `+−`, `−+`, `−−`).
pub fn count_coincidences(records: &[TimestampRecord], window_ps: u64) -> [u64; 4] {
    let alice: Vec<_> = records.iter().filter(|r| r.channel_id == ALICE).collect();
    let bob: Vec<_> = records.iter().filter(|r| r.channel_id == BOB).collect();
    let half = window_ps / 2;
    let mut counts = [0u64; 4];
    let mut start = 0;
    for a in alice {
        while start < bob.len() && bob[start].time_ps + half < a.time_ps {
            start += 1;
        }
        let mut j = start;
        while j < bob.len() && bob[j].time_ps <= a.time_ps + half {
            counts[(2 * a.detector_id + bob[j].detector_id) as usize] += 1;
            j += 1;
        }
    }
    counts
}

/// One record per line: `channel_id,time_ps,detector_id`.
pub fn write_timestamps<W: Write>(mut w: W, records: &[TimestampRecord]) -> io::Result<()> {
    for r in records {
        writeln!(w, "{},{},{}", r.channel_id, r.time_ps, r.detector_id)?;
    }
    Ok(())
}

pub fn read_timestamps<R: BufRead>(r: R) -> io::Result<Vec<TimestampRecord>> {
    let bad = |line: &str| io::Error::new(io::ErrorKind::InvalidData, format!("bad record: {line}"));
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad(trimmed));
        }
        out.push(TimestampRecord {
            channel_id: f[0].parse().map_err(|_| bad(trimmed))?,
            time_ps: f[1].parse().map_err(|_| bad(trimmed))?,
            detector_id: f[2].parse().map_err(|_| bad(trimmed))?,
        });
    }
    Ok(out)
}
