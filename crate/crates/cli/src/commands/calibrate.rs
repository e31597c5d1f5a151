//! Fits unpublished link parameters so that the analytic model hits target
//! observables. The search is a bounded coordinate descent: one grid scan
//! per coordinate, then compass steps that halve until nothing improves.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pathlink_core::counts::CountTable;
use pathlink_core::quantum::{bell_phi_plus, fidelity, Basis, MeasurementSetting};
use pathlink_core::rng::derive_seed;
use pathlink_core::tomography::{
    ideal_joint_probability_matrix, joint_probability_matrix, matrix_overlap, MleOptions,
    TomographyError,
};
use pathlink_linksim::{AnalyticLink, Coherence, PhaseNoiseParams, PllParams};
use serde::{Deserialize, Serialize};

use crate::analysis::reconstruct;
use crate::commands::skr::params_toml;
use crate::error::{CliError, CliResult, ConfigError};
use crate::output::{to_json, OutDir, Provenance, Report};
use crate::scenario::{load_scenario, toml_error, Scenario};

/// Largest relative error accepted in a fitted scenario.
pub const MAX_RESIDUAL: f64 = 0.05;

/// Relative error below which a target counts as met.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Counts per setting used to turn predicted probabilities into a dataset.
const PREDICTION_SHOTS: f64 = 1e10;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Targets {
    pub qber_z: Option<f64>,
    pub qber_x: Option<f64>,
    pub qber_y: Option<f64>,
    /// Asymptotic key rate in bit/s.
    pub skr_bps: Option<f64>,
    /// Fidelity of the reconstructed state with Φ+.
    pub fidelity: Option<f64>,
    pub overlap: Option<f64>,
    /// Monte Carlo spread of the fidelity for the scenario's schedule.
    pub fidelity_std: Option<f64>,
}

impl Targets {
    pub fn list(&self) -> Vec<(Observable, f64)> {
        [
            (Observable::QberZ, self.qber_z),
            (Observable::QberX, self.qber_x),
            (Observable::QberY, self.qber_y),
            (Observable::Skr, self.skr_bps),
            (Observable::Fidelity, self.fidelity),
            (Observable::Overlap, self.overlap),
            (Observable::FidelityStd, self.fidelity_std),
        ]
        .into_iter()
        .filter_map(|(o, t)| t.map(|t| (o, t)))
        .collect()
    }
}

/// Targets for the same link with the fiber length changed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtLength {
    pub length_km: f64,
    pub targets: Targets,
}

/// One observable to hit; `length_km` overrides the scenario's length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    pub length_km: Option<f64>,
    pub observable: Observable,
    pub value: f64,
}

pub fn target_list(targets: &Targets, at: &[AtLength]) -> Vec<Target> {
    let here = targets.list().into_iter().map(|(observable, value)| Target {
        length_km: None,
        observable,
        value,
    });
    let there = at.iter().flat_map(|a| {
        a.targets.list().into_iter().map(move |(observable, value)| Target {
            length_km: Some(a.length_km),
            observable,
            value,
        })
    });
    here.chain(there).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inherit {
    /// Name of an earlier entry in the same file.
    pub from: String,
    pub params: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    /// Scenario path (relative to the targets file) or preset name.
    pub base: String,
    /// Overrides the base scenario's name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub inherit: Option<Inherit>,
    #[serde(default)]
    pub free: Vec<String>,
    #[serde(default)]
    pub targets: Targets,
    #[serde(default)]
    pub at: Vec<AtLength>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsFile {
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<CalibrationEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    QberZ,
    QberX,
    QberY,
    #[serde(rename = "skr_bps")]
    Skr,
    Fidelity,
    Overlap,
    FidelityStd,
}

/// A tunable scenario parameter with its search range.
pub struct Param {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    /// Searched in log space.
    pub log: bool,
    get: fn(&Scenario) -> f64,
    set: fn(&mut Scenario, f64),
}

impl Param {
    fn to_unit(&self, v: f64) -> f64 {
        let v = v.clamp(self.lo, self.hi);
        if self.log {
            (v.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn at_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if self.log {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }
}

pub const PARAMS: [Param; 11] = [
    Param {
        name: "pair_prob_per_pulse",
        lo: 1e-5,
        hi: 0.09,
        log: true,
        get: |s| s.link.source.pair_prob_per_pulse,
        set: |s, v| s.link.source.pair_prob_per_pulse = v,
    },
    Param {
        name: "noise_floor",
        lo: 0.0,
        hi: 0.5,
        log: false,
        get: |s| s.link.channel.noise_floor,
        set: |s, v| s.link.channel.noise_floor = v,
    },
    Param {
        name: "phase_std_rad",
        lo: 0.0,
        hi: std::f64::consts::PI,
        log: false,
        get: |s| s.link.phase_noise.std_rad,
        set: |s, v| s.link.phase_noise.std_rad = v,
    },
    Param {
        name: "insertion_loss_db",
        lo: 0.0,
        hi: 40.0,
        log: false,
        get: |s| s.link.channel.insertion_loss_db,
        set: |s, v| s.link.channel.insertion_loss_db = v,
    },
    Param {
        name: "atten_db_per_km",
        lo: 0.05,
        hi: 1.0,
        log: false,
        get: |s| s.link.channel.atten_db_per_km,
        set: |s, v| s.link.channel.atten_db_per_km = v,
    },
    Param {
        name: "fiber_noise_rate_hz_per_km",
        lo: 1e-2,
        hi: 1e6,
        log: true,
        get: |s| s.link.channel.fiber_noise_rate_hz_per_km,
        set: |s, v| s.link.channel.fiber_noise_rate_hz_per_km = v,
    },
    Param {
        name: "dark_count_rate_hz",
        lo: 1.0,
        hi: 1e5,
        log: true,
        get: |s| s.link.channel.dark_count_rate_hz,
        set: |s, v| s.link.channel.dark_count_rate_hz = v,
    },
    Param {
        name: "x_phase_error_rad",
        lo: 0.0,
        hi: std::f64::consts::FRAC_PI_2,
        log: false,
        get: |s| s.link.analyzer.x_phase_error_rad,
        set: |s, v| s.link.analyzer.x_phase_error_rad = v,
    },
    Param {
        name: "y_phase_error_rad",
        lo: 0.0,
        hi: std::f64::consts::FRAC_PI_2,
        log: false,
        get: |s| s.link.analyzer.y_phase_error_rad,
        set: |s, v| s.link.analyzer.y_phase_error_rad = v,
    },
    Param {
        name: "f",
        lo: 1.0,
        hi: 1.5,
        log: false,
        get: |s| s.analysis.f,
        set: |s, v| s.analysis.f = v,
    },
    Param {
        name: "integration_s",
        lo: 1e-3,
        hi: 1e5,
        log: true,
        get: |s| s.schedule.integration(),
        set: |s, v| s.schedule.set_integration(v),
    },
];

pub fn param(name: &str) -> Option<&'static Param> {
    PARAMS.iter().find(|p| p.name == name)
}

fn unknown_param(name: &str) -> CliError {
    let names: Vec<&str> = PARAMS.iter().map(|p| p.name).collect();
    CliError::Config(ConfigError::field(
        "free",
        format!("unknown parameter `{name}` (known: {})", names.join(", ")),
    ))
}

/// Predicted observables of a scenario under the analytic link model.
pub struct Predictor {
    coherence: Option<(PhaseNoiseParams, PllParams, Coherence)>,
}

impl Default for Predictor {
    fn default() -> Self {
        Self::new()
    }
}

impl Predictor {
    pub fn new() -> Self {
        Predictor { coherence: None }
    }

    fn link(&mut self, s: &Scenario) -> CliResult<AnalyticLink> {
        s.link.validate()?;
        let coherence = match &self.coherence {
            Some((n, p, c)) if *n == s.link.phase_noise && *p == s.link.pll => *c,
            _ => {
                let c = Coherence::estimate(&s.link)?;
                self.coherence = Some((s.link.phase_noise.clone(), s.link.pll.clone(), c));
                c
            }
        };
        Ok(AnalyticLink::with_coherence(&s.link, s.analysis.skr_template(), coherence))
    }

    pub fn predict(&mut self, s: &Scenario, wanted: &[Target]) -> CliResult<Vec<f64>> {
        let base = self.link(s)?;
        let mut length = None;
        let mut link = base.clone();
        let mut table: Option<CountTable> = None;
        wanted
            .iter()
            .map(|t| {
                if t.length_km != length {
                    length = t.length_km;
                    link = t.length_km.map_or_else(|| base.clone(), |l| base.at_length(l));
                    table = None;
                }
                let tomo = matches!(t.observable, Observable::Fidelity | Observable::Overlap);
                if tomo && table.is_none() {
                    table = Some(expected_table(&link));
                }
                Ok(match t.observable {
                    Observable::QberZ => link.qber(Basis::Z),
                    Observable::QberX => link.qber(Basis::X),
                    Observable::QberY => link.qber(Basis::Y),
                    Observable::Skr => link.skr_asymptotic()?,
                    Observable::Fidelity => predicted_fidelity(table.as_ref().expect("built above"))?,
                    Observable::Overlap => {
                        let joint = joint_probability_matrix(table.as_ref().expect("built above"))?;
                        matrix_overlap(&joint, &ideal_joint_probability_matrix(&bell_phi_plus()))?
                    }
                    Observable::FidelityStd => predicted_fidelity_std(&link, s.schedule.integration()),
                })
            })
            .collect()
    }
}

/// Nine-setting table with `PREDICTION_SHOTS` counts per setting.
fn expected_table(link: &AnalyticLink) -> CountTable {
    let mut t = CountTable::new();
    for s in MeasurementSetting::tomography_set() {
        let p = link.outcome_probabilities(s);
        t.add(s, 1.0, p.map(|x| (x * PREDICTION_SHOTS).round() as u64), 0.0);
    }
    t
}

fn predicted_fidelity(table: &CountTable) -> CliResult<f64> {
    let (_, fit) = reconstruct(table, &MleOptions::default())?;
    Ok(fidelity(&fit.rho, &bell_phi_plus()).map_err(TomographyError::from)?)
}

/// Spread of the Φ+ fidelity estimate from counting statistics. The Φ+
/// fidelity is `(1 + ⟨ZZ⟩ + ⟨XX⟩ − ⟨YY⟩)/4` and each correlator has variance
/// `4q(1 − q)/N` in its matched setting.
fn predicted_fidelity_std(link: &AnalyticLink, integration_s: f64) -> f64 {
    let n = link.rates.coincidence_rate_hz() * integration_s;
    let var: f64 = Basis::ALL
        .iter()
        .map(|b| {
            let q = link.qber(*b);
            q * (1.0 - q) / n
        })
        .sum();
    0.5 * var.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetResidual {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_km: Option<f64>,
    pub observable: Observable,
    pub target: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub scenario: String,
    /// Full coordinate sweeps performed; zero when the base already met
    /// every target.
    pub iterations: usize,
    pub evaluations: usize,
    pub within_tolerance: bool,
    pub params: BTreeMap<String, f64>,
    pub residuals: Vec<TargetResidual>,
}

impl FitResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.relative_error.abs()).fold(0.0, f64::max)
    }

    pub fn accepted(&self) -> bool {
        self.max_residual() <= MAX_RESIDUAL
    }
}

impl TargetResidual {
    pub fn label(&self) -> String {
        match self.length_km {
            Some(l) => format!("{:?} at {l} km", self.observable),
            None => format!("{:?}", self.observable),
        }
    }
}

fn residuals(targets: &[Target], predicted: &[f64]) -> Vec<TargetResidual> {
    targets
        .iter()
        .zip(predicted)
        .map(|(t, p)| TargetResidual {
            length_km: t.length_km,
            observable: t.observable,
            target: t.value,
            predicted: *p,
            relative_error: (p - t.value) / t.value,
        })
        .collect()
}

/// Adjusts the `free` parameters of `scenario` in place.
pub fn fit(
    scenario: &mut Scenario,
    free: &[&'static Param],
    targets: &[Target],
    tolerance: f64,
) -> CliResult<FitResult> {
    if targets.is_empty() {
        return Err(CliError::Config(ConfigError::field("targets", "no targets given")));
    }
    if let Some(t) = targets.iter().find(|t| !(t.value.is_finite() && t.value != 0.0)) {
        return Err(CliError::Config(ConfigError::field(
            "targets",
            format!("{:?} target {} must be finite and non-zero", t.observable, t.value),
        )));
    }
    if let Some(l) = targets.iter().filter_map(|t| t.length_km).find(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(CliError::Config(ConfigError::field(
            "at.length_km",
            format!("{l} must be non-negative and finite"),
        )));
    }
    let mut predictor = Predictor::new();
    let mut evaluations = 0usize;
    let mut evaluate = |s: &Scenario| -> CliResult<(f64, Vec<f64>)> {
        evaluations += 1;
        let p = predictor.predict(s, targets)?;
        let cost = targets
            .iter()
            .zip(&p)
            .map(|(t, p)| ((p - t.value) / t.value).powi(2))
            .sum();
        Ok((cost, p))
    };
    let met = |p: &[f64]| {
        targets
            .iter()
            .zip(p)
            .all(|(t, p)| ((p - t.value) / t.value).abs() <= tolerance)
    };

    let (mut best, mut predicted) = evaluate(scenario)?;
    let mut iterations = 0;
    if !met(&predicted) && !free.is_empty() {
        let mut x: Vec<f64> = free.iter().map(|p| p.to_unit((p.get)(scenario))).collect();
        let mut trial = scenario.clone();
        let mut try_point = |x: &[f64], trial: &mut Scenario| -> CliResult<Option<(f64, Vec<f64>)>> {
            for (p, u) in free.iter().zip(x) {
                (p.set)(trial, p.at_unit(*u));
            }
            match evaluate(trial) {
                Ok(r) => Ok(Some(r)),
                // Points outside the model's domain are simply not taken.
                Err(CliError::Config(_)) | Err(CliError::Domain(_)) => Ok(None),
                Err(e) => Err(e),
            }
        };

        const GRID: usize = 24;
        for i in 0..x.len() {
            let mut xi_best = x[i];
            for k in 0..=GRID {
                let mut y = x.clone();
                y[i] = k as f64 / GRID as f64;
                if let Some((c, p)) = try_point(&y, &mut trial)? {
                    if c < best {
                        best = c;
                        predicted = p;
                        xi_best = y[i];
                    }
                }
            }
            x[i] = xi_best;
        }
        iterations = 1;

        let mut step = 0.5 / GRID as f64;
        while step > 1e-12 && !met(&predicted) && iterations < 10_000 {
            iterations += 1;
            let mut improved = false;
            for i in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut s = step;
                    loop {
                        let mut y = x.clone();
                        y[i] = (x[i] + dir * s).clamp(0.0, 1.0);
                        if y[i] == x[i] {
                            break;
                        }
                        match try_point(&y, &mut trial)? {
                            Some((c, p)) if c < best => {
                                best = c;
                                predicted = p;
                                x = y;
                                improved = true;
                                s *= 2.0;
                            }
                            _ => break,
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        for (p, u) in free.iter().zip(&x) {
            (p.set)(scenario, p.at_unit(*u));
        }
    }
    let params = free
        .iter()
        .map(|p| (p.name.to_string(), (p.get)(scenario)))
        .collect();
    Ok(FitResult {
        scenario: scenario.name.clone(),
        iterations,
        evaluations,
        within_tolerance: met(&predicted),
        params,
        residuals: residuals(targets, &predicted),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrateReport {
    pub provenance: Provenance,
    pub fits: Vec<FitResult>,
    #[serde(skip)]
    pub scenarios: Vec<Scenario>,
}

impl Report for CalibrateReport {
    fn text(&self) -> String {
        let mut s = String::new();
        for f in &self.fits {
            s += &format!(
                "{}: {} sweeps, {} evaluations, max residual {:.3e}\n",
                f.scenario,
                f.iterations,
                f.evaluations,
                f.max_residual()
            );
            for (k, v) in &f.params {
                s += &format!("  {k} = {v:.10e}\n");
            }
            for r in &f.residuals {
                s += &format!(
                    "  {:<20} target {:<12.6e} predicted {:<12.6e} ({:+.3e})\n",
                    r.label(),
                    r.target,
                    r.predicted,
                    r.relative_error
                );
            }
        }
        s
    }
}

pub struct CalibrateArgs<'a> {
    pub targets: &'a Path,
    pub seed: Option<u64>,
    pub out: OutDir,
}

pub fn read_targets(path: &Path) -> CliResult<TargetsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(toml_error(&text, &e).in_file(path.display().to_string())))
}

fn resolve_base(base: &str, dir: &Path) -> String {
    let rel: PathBuf = dir.join(base);
    if rel.exists() {
        rel.display().to_string()
    } else {
        base.to_string()
    }
}

pub fn run(args: CalibrateArgs) -> CliResult<CalibrateReport> {
    let file = read_targets(args.targets)?;
    let tolerance = file.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance > 0.0 && tolerance < MAX_RESIDUAL) {
        return Err(CliError::Config(ConfigError::field(
            "tolerance",
            format!("must lie in (0, {MAX_RESIDUAL})"),
        )));
    }
    let dir = args.targets.parent().unwrap_or(Path::new("."));
    let mut fitted: Vec<Scenario> = Vec::new();
    let mut fits = Vec::new();
    for (i, entry) in file.scenarios.iter().enumerate() {
        let mut scenario = load_scenario(&resolve_base(&entry.base, dir))?;
        if let Some(name) = &entry.name {
            scenario.name = name.clone();
        }
        if let Some(seed) = args.seed {
            scenario.seed = derive_seed(seed, i as u64) >> 1;
        }
        if let Some(inherit) = &entry.inherit {
            let source = fitted.iter().find(|s| s.name == inherit.from).ok_or_else(|| {
                CliError::Config(ConfigError::field(
                    "inherit.from",
                    format!("`{}` is not an earlier entry", inherit.from),
                ))
            })?;
            for name in &inherit.params {
                let p = param(name).ok_or_else(|| unknown_param(name))?;
                (p.set)(&mut scenario, (p.get)(source));
            }
        }
        let free = entry
            .free
            .iter()
            .map(|n| param(n).ok_or_else(|| unknown_param(n)))
            .collect::<CliResult<Vec<_>>>()?;
        let targets = target_list(&entry.targets, &entry.at);
        let result = fit(&mut scenario, &free, &targets, tolerance)?;
        scenario.validate()?;
        fits.push(result);
        fitted.push(scenario);
    }

    let provenance = Provenance::new(args.seed);
    let header = format!(
        "{}# Fitted by `pathlink calibrate`; residuals are in residuals.json.\n",
        provenance.header()
    );
    for s in &fitted {
        args.out.write(&format!("{}.toml", s.name), &(header.clone() + &s.to_toml()))?;
        let link = AnalyticLink::new(&s.link, s.analysis.skr_template())?;
        args.out.write(&format!("{}.skr.toml", s.name), &params_toml(&link.skr_params(), &header))?;
    }
    args.out.write("residuals.json", &to_json(&fits))?;

    let failed: Vec<&FitResult> = fits.iter().filter(|f| !f.accepted()).collect();
    if !failed.is_empty() {
        let mut msg = String::from("best-found parameters leave residuals above 5%:");
        for f in failed {
            for r in f.residuals.iter().filter(|r| r.relative_error.abs() > MAX_RESIDUAL) {
                msg += &format!(
                    "\n  {} {}: target {}, best {:.6} ({:+.1}%)",
                    f.scenario,
                    r.label(),
                    r.target,
                    r.predicted,
                    100.0 * r.relative_error
                );
            }
        }
        return Err(CliError::NoConvergence(msg));
    }
    Ok(CalibrateReport {
        provenance,
        fits,
        scenarios: fitted,
    })
}
