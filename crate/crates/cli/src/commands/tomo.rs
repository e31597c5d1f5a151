use std::path::Path;

use pathlink_core::quantum::{chsh_max, fidelity, named_state, TwoQubitState};
use pathlink_core::tomography::{mean_std, monte_carlo_resample, MleOptions, MonteCarloOptions};
use serde::Serialize;

use crate::analysis::{reconstruct, summarize, ReconstructionSummary};
use crate::error::{CliError, CliResult};
use crate::output::{read_count_file, to_json, OutDir, Provenance, Report};

#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub variance_scale: f64,
    /// Runs whose resampled data were unusable.
    pub excluded: usize,
    /// Runs kept with their best estimate after hitting the iteration cap.
    pub not_converged: usize,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
    pub chsh_mean: f64,
    pub chsh_std: f64,
    /// `(S − 2)/σ_S` for the point estimate; absent when σ_S is zero.
    pub chsh_violation_sigma: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TomoReport {
    pub provenance: Provenance,
    pub target: String,
    pub reconstruction: ReconstructionSummary,
    /// Row-major `[re, im]` entries.
    pub rho: Vec<[f64; 2]>,
    pub monte_carlo: MonteCarloSummary,
}

impl Report for TomoReport {
    fn text(&self) -> String {
        let r = &self.reconstruction;
        let mc = &self.monte_carlo;
        let mut s = format!(
            "target {}: {} counts, linear inversion {}physical, MLE {} after {} iterations\n",
            self.target,
            r.total_counts,
            if r.linear_inversion_physical { "" } else { "non-" },
            if r.converged { "converged" } else { "stopped" },
            r.iterations
        );
        s += "rho (re, im):\n";
        for row in self.rho.chunks(4) {
            for e in row {
                s += &format!(" {:+.5}{:+.5}i", e[0], e[1]);
            }
            s += "\n";
        }
        s += &format!("fidelity {:.5}\n", r.fidelity);
        s += &format!(
            "Monte Carlo ({} runs, {} excluded, {} not converged): fidelity {:.5} ± {:.5}\n",
            mc.runs, mc.excluded, mc.not_converged, mc.fidelity_mean, mc.fidelity_std
        );
        s += &format!("CHSH {:.5} ± {:.5}", r.chsh, mc.chsh_std);
        match mc.chsh_violation_sigma {
            Some(k) => s += &format!(" ({k:.1} standard deviations above 2)\n"),
            None => s += "\n",
        }
        s += "joint probabilities (rows Z+ Z- X+ X-):\n";
        for row in &r.joint_matrix {
            s += &format!("  {:.5} {:.5} {:.5} {:.5}\n", row[0], row[1], row[2], row[3]);
        }
        s += &format!("overlap {:.5}\n", r.overlap);
        s
    }
}

pub struct TomoArgs<'a> {
    pub counts: &'a Path,
    pub target: &'a str,
    pub runs: usize,
    /// Defaults to the seed recorded in the count file, else 1.
    pub seed: Option<u64>,
    pub variance_scale: f64,
    pub out: OutDir,
}

fn rho_entries(rho: &TwoQubitState) -> Vec<[f64; 2]> {
    (0..4)
        .flat_map(|r| (0..4).map(move |c| (r, c)))
        .map(|(r, c)| {
            let e = rho.element(r, c);
            [e.re, e.im]
        })
        .collect()
}

pub fn run(args: TomoArgs) -> CliResult<TomoReport> {
    let target = named_state(args.target).ok_or_else(|| {
        CliError::Domain(format!(
            "unknown target state `{}` (phi-plus, phi-minus, psi-plus, psi-minus, mixed)",
            args.target
        ))
    })?;
    if args.runs == 0 {
        return Err(CliError::Domain("--runs must be at least 1".into()));
    }
    if !(args.variance_scale >= 0.0 && args.variance_scale.is_finite()) {
        return Err(CliError::Domain("--variance-scale must be non-negative".into()));
    }
    let (file, digest) = read_count_file(args.counts)?;
    let stamp = file.provenance.unwrap_or_default();
    let seed = args.seed.or(stamp.seed).unwrap_or(1);
    let provenance = Provenance {
        scenario: stamp.scenario,
        scenario_digest: stamp.scenario_digest,
        input_digest: Some(digest),
        ..Provenance::new(Some(seed))
    };

    let mle = MleOptions::default();
    let (data, fit) = reconstruct(&file.table, &mle)?;
    let reconstruction = summarize(&data, &fit, &target)?;

    let opts = MonteCarloOptions {
        runs: args.runs,
        seed,
        variance_scale: args.variance_scale,
        mle,
    };
    let (samples, excluded) = monte_carlo_resample(&data, &opts, |r| {
        (
            fidelity(&r.rho, &target).expect("MLE estimates are physical"),
            chsh_max(&r.rho).expect("MLE estimates are physical"),
            r.converged,
        )
    })?;
    if samples.is_empty() {
        return Err(CliError::Validation(format!(
            "all {} Monte Carlo runs produced unusable data",
            args.runs
        )));
    }
    let fids: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let chsh: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (fidelity_mean, fidelity_std) = mean_std(&fids);
    let (chsh_mean, chsh_std) = mean_std(&chsh);
    let monte_carlo = MonteCarloSummary {
        runs: args.runs,
        variance_scale: args.variance_scale,
        excluded,
        not_converged: samples.iter().filter(|s| !s.2).count(),
        fidelity_mean,
        fidelity_std,
        chsh_mean,
        chsh_std,
        chsh_violation_sigma: (chsh_std > 0.0).then(|| (reconstruction.chsh - 2.0) / chsh_std),
    };

    let header = provenance.header();
    let rho = rho_entries(&fit.rho);
    let mut cart = header.clone();
    for row in rho.chunks(4) {
        let cells: Vec<String> = row.iter().map(|e| format!("{:.17e},{:.17e}", e[0], e[1])).collect();
        cart += &cells.join(",");
        cart += "\n";
    }
    args.out.write("rho.csv", &cart)?;
    let mut polar = header.clone() + "row,col,amplitude,phase_rad\n";
    for (k, e) in rho.iter().enumerate() {
        polar += &format!(
            "{},{},{:.17e},{:.17e}\n",
            k / 4,
            k % 4,
            e[0].hypot(e[1]),
            e[1].atan2(e[0])
        );
    }
    args.out.write("rho_polar.csv", &polar)?;
    let mut hist = header.clone() + "fidelity,chsh\n";
    for (f, s) in fids.iter().zip(&chsh) {
        hist += &format!("{f:.17e},{s:.17e}\n");
    }
    args.out.write("fidelity_samples.csv", &hist)?;
    let mut joint = header + "# rows: alice Z+ Z- X+ X-; columns: bob Z+ Z- X+ X-\n";
    for row in &reconstruction.joint_matrix {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.17e}")).collect();
        joint += &cells.join(",");
        joint += "\n";
    }
    args.out.write("joint.csv", &joint)?;

    let report = TomoReport {
        provenance,
        target: args.target.to_string(),
        reconstruction,
        rho,
        monte_carlo,
    };
    args.out.write("tomo.json", &to_json(&report))?;
    Ok(report)
}
