use std::path::Path;

use pathlink_core::qkd::{PenaltyModel, QberReport, SkrParams};
use pathlink_linksim::AnalyticLink;
use serde::Serialize;

use crate::analysis::{key_rate, KeyRate};
use crate::error::{CliError, CliResult, ConfigError};
use crate::output::{pct, read_count_file, sha256_hex, to_json, OutDir, Provenance, Report};
use crate::scenario::{load_scenario, toml_error, AnalysisParams};

#[derive(Clone, Debug, Serialize)]
pub struct SkrReport {
    pub provenance: Provenance,
    pub label: String,
    pub qber: QberReport,
    /// Average of the Z and X error rates.
    pub mean_key_qber: Option<f64>,
    /// Average over all three bases.
    pub mean_qber: Option<f64>,
    pub key_rate: KeyRate,
}

impl SkrReport {
    pub fn qber_csv(&self) -> String {
        let cell = |q: Option<f64>| q.map_or(String::new(), |q| format!("{:.17e}", q));
        format!(
            "{}label,qber_z,qber_x,qber_y\n{},{},{},{}\n",
            self.provenance.header(),
            self.label,
            cell(self.qber.z.map(|q| q.qber)),
            cell(self.qber.x.map(|q| q.qber)),
            cell(self.qber.y.map(|q| q.qber))
        )
    }

    pub fn finite_key_csv(&self) -> String {
        let mut s = self.provenance.header();
        s += &format!("# penalty_model={:?}\n", self.key_rate.penalty_model);
        s += "block_size,skr_fin_bps,skr_asymptotic_bps,delta,acquisition_time_s,block_too_small\n";
        for f in &self.key_rate.finite {
            s += &format!(
                "{:e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                f.block_size, f.skr_fin_bps, f.skr_asymptotic_bps, f.delta, f.acquisition_time_s, f.block_too_small
            );
        }
        s
    }
}

impl Report for SkrReport {
    fn text(&self) -> String {
        let k = &self.key_rate;
        let show = |q: Option<f64>| q.map_or("      -".to_string(), pct);
        let mut s = format!("{}\n", self.label);
        s += "       QBER_Z   QBER_X   QBER_Y\n";
        s += &format!(
            "      {}  {}  {}\n",
            show(self.qber.z.map(|q| q.qber)),
            show(self.qber.x.map(|q| q.qber)),
            show(self.qber.y.map(|q| q.qber))
        );
        if let Some(m) = self.mean_key_qber {
            s += &format!("mean QBER (Z, X) {}", pct(m));
            if let Some(all) = self.mean_qber {
                s += &format!(", all bases {}", pct(all));
            }
            s += "\n";
        }
        s += &format!(
            "key basis {}, check basis {}; R_r = {:.6e} Hz, alpha = {:.6e}, eta = {}, f = {}, S = {}\n",
            k.key_basis, k.check_basis, k.params.raw_rate_hz, k.params.alpha, k.params.eta, k.params.f, k.params.sift_ratio
        );
        s += &format!("asymptotic SKR {:.4} bit/s\n", k.skr_asymptotic_bps);
        s += "block size   SKR (bit/s)\n";
        for f in &k.finite {
            s += &format!(
                "{:>10.0e}   {:.4}{}\n",
                f.block_size,
                f.skr_fin_bps,
                if f.block_too_small { "  (block too small)" } else { "" }
            );
        }
        s
    }
}

pub struct SkrArgs<'a> {
    pub counts: Option<&'a Path>,
    /// Z, X and optionally Y.
    pub qber: Option<Vec<f64>>,
    /// Supplies analytic error rates and/or parameters.
    pub scenario: Option<&'a str>,
    pub params: Option<&'a Path>,
    pub blocks: Option<Vec<f64>>,
    pub model: Option<PenaltyModel>,
    pub seed: Option<u64>,
    pub out: OutDir,
}

/// Reads `SkrParams` from TOML, or JSON when the extension says so.
pub fn read_params(path: &Path) -> CliResult<(SkrParams, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let origin = path.display().to_string();
    let params: SkrParams = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        serde_json::from_str(&text)
            .map_err(|e| ConfigError::new(e.to_string()).in_file(origin.clone()))?
    } else {
        toml::from_str(&text).map_err(|e| toml_error(&text, &e).in_file(origin.clone()))?
    };
    params
        .validate()
        .map_err(|e| ConfigError::new(e.to_string()).in_file(origin))?;
    Ok((params, sha256_hex(text.as_bytes())))
}

pub fn params_toml(params: &SkrParams, header: &str) -> String {
    header.to_string() + &toml::to_string_pretty(params).expect("plain numeric struct")
}

pub fn run(args: SkrArgs) -> CliResult<SkrReport> {
    let sources = [args.counts.is_some(), args.qber.is_some()].iter().filter(|b| **b).count();
    if sources > 1 {
        return Err(CliError::Config(ConfigError::new("give either --counts or --qber, not both")));
    }
    let scenario = args.scenario.map(load_scenario).transpose()?;
    let link = scenario
        .as_ref()
        .map(|s| AnalyticLink::new(&s.link, s.analysis.skr_template()))
        .transpose()?;
    let mut provenance = match &scenario {
        Some(s) => Provenance::for_scenario(s),
        None => Provenance::new(None),
    };
    if args.seed.is_some() {
        provenance.seed = args.seed;
    }

    let (qber, label) = if let Some(path) = args.counts {
        let (file, digest) = read_count_file(path)?;
        provenance.input_digest = Some(digest);
        if let Some(p) = file.provenance {
            provenance.scenario = provenance.scenario.or(p.scenario);
            provenance.scenario_digest = provenance.scenario_digest.or(p.scenario_digest);
            provenance.seed = provenance.seed.or(p.seed);
        }
        (QberReport::from_counts(&file.table)?, path.display().to_string())
    } else if let Some(q) = &args.qber {
        let report = match q.as_slice() {
            [z, x] => QberReport {
                y: None,
                ..QberReport::from_values(*z, *x, 0.0)
            },
            [z, x, y] => QberReport::from_values(*z, *x, *y),
            _ => return Err(CliError::Config(ConfigError::field("qber", "expects 2 or 3 values"))),
        };
        (report, "given error rates".to_string())
    } else if let Some(link) = &link {
        (link.qber_report(), "analytic".to_string())
    } else {
        return Err(CliError::Config(ConfigError::new(
            "no error rates: give --counts, --qber or --scenario",
        )));
    };
    let label = match &scenario {
        Some(s) => format!("{} ({label})", s.name),
        None => label,
    };

    let params = if let Some(path) = args.params {
        let (p, digest) = read_params(path)?;
        if provenance.input_digest.is_none() {
            provenance.input_digest = Some(digest);
        }
        p
    } else if let Some(link) = &link {
        link.skr_params()
    } else {
        return Err(CliError::Config(ConfigError::new(
            "no key-rate parameters: give --params or --scenario",
        )));
    };
    let defaults = AnalysisParams::default();
    let analysis = scenario.as_ref().map_or(&defaults, |s| &s.analysis);
    let blocks = args.blocks.unwrap_or_else(|| analysis.block_sizes.clone());
    let model = args.model.unwrap_or(analysis.penalty_model);

    let key_rate = key_rate(&qber, &params, &blocks, model)?;
    let report = SkrReport {
        provenance,
        label,
        mean_key_qber: qber.mean_key_qber(),
        mean_qber: qber.mean_qber(),
        qber,
        key_rate,
    };
    args.out.write("qber.csv", &report.qber_csv())?;
    args.out.write("finite_key.csv", &report.finite_key_csv())?;
    args.out.write("skr.json", &to_json(&report))?;
    Ok(report)
}
