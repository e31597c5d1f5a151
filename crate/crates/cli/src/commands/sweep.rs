//! Key rate against fiber length, analytic and simulated.

use pathlink_core::rng::derive_seed;
use pathlink_linksim::sim::simulate_counts;
use pathlink_linksim::AnalyticLink;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::simulated_key_rate;
use crate::error::{CliError, CliResult};
use crate::output::{to_json, OutDir, Provenance, Report};
use crate::scenario::load_scenario;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub length_km: f64,
    pub skr_analytic: f64,
    /// Absent when simulation was skipped or the run measured no key pair.
    pub skr_simulated: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut s = self.provenance.header() + "length_km,skr_analytic,skr_simulated\n";
        for p in &self.points {
            let sim = p.skr_simulated.map_or(String::new(), |v| format!("{v:.17e}"));
            s += &format!("{:.17e},{:.17e},{sim}\n", p.length_km, p.skr_analytic);
        }
        s
    }
}

impl Report for SweepReport {
    fn text(&self) -> String {
        let mut s = String::from("length_km   analytic (bit/s)   simulated (bit/s)\n");
        for p in &self.points {
            let sim = p.skr_simulated.map_or("-".to_string(), |v| format!("{v:.5e}"));
            s += &format!("{:>9.3}   {:>16.5e}   {:>17}\n", p.length_km, p.skr_analytic, sim);
        }
        s
    }
}

pub struct SweepArgs<'a> {
    pub scenario: &'a str,
    pub lengths: Vec<f64>,
    pub simulate: bool,
    pub seed: Option<u64>,
    pub out: OutDir,
}

/// `n` evenly spaced lengths from `from` to `to`.
pub fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![from],
        _ => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn run(args: SweepArgs) -> CliResult<SweepReport> {
    let mut scenario = load_scenario(args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
        scenario.validate()?;
    }
    if args.lengths.is_empty() {
        return Err(CliError::Domain("no lengths to sweep".into()));
    }
    if let Some(l) = args.lengths.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(CliError::Domain(format!("length {l} km must be non-negative and finite")));
    }
    let base = AnalyticLink::new(&scenario.link, scenario.analysis.skr_template())?;
    let schedule = scenario.schedule.entries();

    let points = args
        .lengths
        .par_iter()
        .enumerate()
        .map(|(i, &length_km)| -> CliResult<SweepPoint> {
            let skr_analytic = base.at_length(length_km).skr_asymptotic()?;
            let skr_simulated = if args.simulate {
                let mut s = scenario.clone();
                s.link = s.link.with_length(length_km);
                let sim = simulate_counts(&s.link, &schedule, derive_seed(scenario.seed, i as u64))?;
                simulated_key_rate(&s, &sim.counts)?.map(|k| k.skr_asymptotic_bps)
            } else {
                None
            };
            Ok(SweepPoint {
                length_km,
                skr_analytic,
                skr_simulated,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let report = SweepReport {
        provenance: Provenance::for_scenario(&scenario),
        points,
    };
    args.out.write("sweep.csv", &report.csv())?;
    args.out.write("sweep.json", &to_json(&report))?;
    Ok(report)
}
