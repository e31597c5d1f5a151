use std::path::Path;
use std::time::Instant;

use pathlink_core::counts::CountTable;
use pathlink_core::qkd::QberReport;
use pathlink_core::quantum::{bell_phi_plus, MeasurementSetting};
use pathlink_core::tomography::MleOptions;
use pathlink_linksim::sim::{simulate_counts_with, SettingTruth, SimOptions};
use pathlink_linksim::PhaseSummary;
use serde::{Deserialize, Serialize};

use crate::analysis::{reconstruct, simulated_key_rate, summarize, KeyRate, ReconstructionSummary};
use crate::error::{CliError, CliResult};
use crate::output::{to_json, pct, CountFile, OutDir, Provenance, Report};
use crate::scenario::{load_scenario, Scenario};

/// Rows kept in the exported phase trace, at most.
const TRACE_ROWS: u64 = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingPhase {
    pub setting: MeasurementSetting,
    pub phase: PhaseSummary,
}

/// Everything needed to audit or replay a simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub provenance: Provenance,
    pub scenario: Scenario,
    pub counts: CountTable,
    /// SHA-256 of the written count file.
    pub counts_digest: String,
    pub phase: Vec<SettingPhase>,
    pub truth: Vec<SettingTruth>,
    pub qber: QberReport,
    pub key_rate: Option<KeyRate>,
    pub reconstruction: Option<ReconstructionSummary>,
    pub wall_clock_s: f64,
}

/// Stdout report; the wall-clock time is left out so reruns print the same
/// bytes.
#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub provenance: Provenance,
    pub counts: CountTable,
    pub counts_digest: String,
    pub phase: Vec<SettingPhase>,
    pub qber: QberReport,
    pub key_rate: Option<KeyRate>,
    pub reconstruction: Option<ReconstructionSummary>,
}

impl Report for SimulateReport {
    fn text(&self) -> String {
        let mut s = String::new();
        let p = &self.provenance;
        let digest = p.scenario_digest.as_deref().unwrap_or("");
        s += &format!(
            "scenario {} (seed {}, digest {})\n",
            p.scenario.as_deref().unwrap_or("?"),
            p.seed.unwrap_or(0),
            digest.get(..12).unwrap_or(digest)
        );
        s += "setting  integration_s       pp       pm       mp       mm  unlocked\n";
        for (c, ph) in self.counts.settings.iter().zip(&self.phase) {
            let n = c.counts;
            s += &format!(
                "{:<7}  {:>13.3} {:>8} {:>8} {:>8} {:>8}  {}\n",
                c.setting().to_string(),
                c.integration_s,
                n.pp,
                n.pm,
                n.mp,
                n.mm,
                pct(ph.phase.unlocked_fraction)
            );
        }
        for (name, q) in [("Z", self.qber.z), ("X", self.qber.x), ("Y", self.qber.y)] {
            if let Some(q) = q {
                s += &format!("QBER_{name} {} ({} / {})\n", pct(q.qber), q.errors, q.total);
            }
        }
        if let Some(k) = &self.key_rate {
            s += &format!(
                "key {}/{}: asymptotic SKR {:.4} bit/s\n",
                k.key_basis, k.check_basis, k.skr_asymptotic_bps
            );
            for f in &k.finite {
                s += &format!("  n = {:.0e}: {:.4} bit/s\n", f.block_size, f.skr_fin_bps);
            }
        }
        if let Some(r) = &self.reconstruction {
            s += &format!(
                "fidelity {:.5}  CHSH {:.5}  overlap {:.5}\n",
                r.fidelity, r.chsh, r.overlap
            );
        }
        s
    }
}

pub struct SimulateArgs<'a> {
    /// Scenario path, preset name, or a previous `run.json`.
    pub scenario: &'a str,
    pub seed: Option<u64>,
    pub out: OutDir,
}

/// Scenario snapshot from a run record, if `arg` is one.
fn replay_source(arg: &str) -> CliResult<Option<Scenario>> {
    let path = Path::new(arg);
    if path.extension().and_then(|e| e.to_str()) != Some("json") || !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let record: RunRecord = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{arg}: not a run record: {e}")))?;
    record.scenario.validate()?;
    Ok(Some(record.scenario))
}

pub fn run(args: SimulateArgs) -> CliResult<(SimulateReport, RunRecord)> {
    let start = Instant::now();
    let mut scenario = match replay_source(args.scenario)? {
        Some(s) => s,
        None => load_scenario(args.scenario)?,
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
        scenario.validate()?;
    }
    let schedule = scenario.schedule.entries();
    let ticks: f64 = schedule
        .iter()
        .map(|e| e.integration_s * scenario.link.pll.loop_rate_hz)
        .sum();
    let opts = SimOptions {
        trace_decimation: ((ticks / TRACE_ROWS as f64).ceil() as usize).max(1),
    };
    let sim = simulate_counts_with(&scenario.link, &schedule, scenario.seed, &opts)?;
    let provenance = Provenance::for_scenario(&scenario);

    let count_file = to_json(&CountFile {
        provenance: Some(provenance.clone()),
        table: sim.counts.clone(),
    });
    let counts_digest = crate::output::sha256_hex(count_file.as_bytes());
    args.out.write("counts.json", &count_file)?;
    let mut trace_csv = Vec::new();
    sim.trace
        .write_csv(&mut trace_csv, &provenance.header_lines())
        .expect("writing to memory");
    args.out.write("phase_trace.csv", &String::from_utf8(trace_csv).expect("ASCII"))?;

    let qber = QberReport::from_counts(&sim.counts)?;
    let key_rate = simulated_key_rate(&scenario, &sim.counts)?;
    let reconstruction = if MeasurementSetting::tomography_set().iter().all(|s| sim.counts.contains(*s)) {
        let (data, fit) = reconstruct(&sim.counts, &MleOptions::default())?;
        Some(summarize(&data, &fit, &bell_phi_plus())?)
    } else {
        None
    };
    let phase: Vec<SettingPhase> = sim
        .truth
        .iter()
        .map(|t| SettingPhase {
            setting: t.setting,
            phase: t.phase,
        })
        .collect();

    let report = SimulateReport {
        provenance: provenance.clone(),
        counts: sim.counts.clone(),
        counts_digest: counts_digest.clone(),
        phase: phase.clone(),
        qber,
        key_rate: key_rate.clone(),
        reconstruction: reconstruction.clone(),
    };
    let record = RunRecord {
        provenance,
        scenario,
        counts: sim.counts,
        counts_digest,
        phase,
        truth: sim.truth,
        qber,
        key_rate,
        reconstruction,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    args.out.write("run.json", &to_json(&record))?;
    Ok((report, record))
}
