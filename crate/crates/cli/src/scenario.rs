//! Scenario files: a TOML document holding the link model, the analysis
//! parameters, the measurement plan and the seed. See `SCHEMA` for the
//! annotated layout.

use std::path::Path;

use pathlink_core::qkd::{PenaltyModel, SkrParams};
use pathlink_linksim::sim::{key_schedule, tomography_schedule, ScheduleEntry};
use pathlink_linksim::LinkConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, ConfigError};
use crate::presets;

/// Annotated schema, shipped with the binary (`pathlink schema`).
pub const SCHEMA: &str = include_str!("../presets/schema.toml");

/// Key-rate settings that do not follow from the link itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    pub f: f64,
    pub sift_ratio: f64,
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub penalty_model: PenaltyModel,
    /// Finite-key block sizes reported by `simulate` and `skr`.
    pub block_sizes: Vec<f64>,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        let d = SkrParams::default();
        AnalysisParams {
            f: d.f,
            sift_ratio: d.sift_ratio,
            eps_sec: d.eps_sec,
            eps_cor: d.eps_cor,
            penalty_model: PenaltyModel::default(),
            block_sizes: vec![1e8, 1e7, 1e6, 1e5],
        }
    }
}

impl AnalysisParams {
    /// `SkrParams` with the rate fields left at their defaults; links fill
    /// them in.
    pub fn skr_template(&self) -> SkrParams {
        SkrParams {
            f: self.f,
            sift_ratio: self.sift_ratio,
            eps_sec: self.eps_sec,
            eps_cor: self.eps_cor,
            ..SkrParams::default()
        }
    }
}

/// Which settings are acquired and for how long.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasurementPlan {
    /// All nine settings.
    Tomography { integration_s: f64 },
    /// ZZ, XX and YY.
    Key { integration_s: f64 },
    Custom { entries: Vec<ScheduleEntry> },
}

impl MeasurementPlan {
    pub fn entries(&self) -> Vec<ScheduleEntry> {
        match self {
            MeasurementPlan::Tomography { integration_s } => tomography_schedule(*integration_s),
            MeasurementPlan::Key { integration_s } => key_schedule(*integration_s),
            MeasurementPlan::Custom { entries } => entries.clone(),
        }
    }

    pub fn set_integration(&mut self, t: f64) {
        match self {
            MeasurementPlan::Tomography { integration_s } | MeasurementPlan::Key { integration_s } => {
                *integration_s = t
            }
            MeasurementPlan::Custom { entries } => entries.iter_mut().for_each(|e| e.integration_s = t),
        }
    }

    /// Integration time of the first entry.
    pub fn integration(&self) -> f64 {
        self.entries().first().map_or(0.0, |e| e.integration_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Seeds are kept below 2⁶³ so they survive TOML's signed integers.
    pub seed: u64,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub analysis: AnalysisParams,
    pub schedule: MeasurementPlan,
}

impl Scenario {
    /// Parses and validates; `origin` names the source in diagnostics.
    pub fn from_toml(text: &str, origin: &str) -> Result<Scenario, ConfigError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| toml_error(text, &e).in_file(origin))?;
        scenario.validate().map_err(|mut e| {
            if let Some(field) = &e.field {
                e.line = locate_field(text, field);
            }
            e.in_file(origin)
        })?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario fields are TOML-representable")
    }

    /// SHA-256 of the canonical serialization, so comments and layout do
    /// not change it.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::field("name", "must not be empty"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::field("seed", "must be below 2^63"));
        }
        self.link.validate().map_err(|e| match e {
            pathlink_linksim::LinkError::Config { field, message } => {
                ConfigError::field(format!("link.{field}"), message)
            }
            other => ConfigError::field("link", other.to_string()),
        })?;
        self.analysis_params().validate().map_err(|e| ConfigError::field("analysis", e.to_string()))?;
        if self.analysis.block_sizes.iter().any(|n| !(*n >= 1e3 && n.is_finite())) {
            return Err(ConfigError::field("analysis.block_sizes", "block sizes must be at least 1e3"));
        }
        let entries = self.schedule.entries();
        if entries.is_empty() {
            return Err(ConfigError::field("schedule", "plan has no entries"));
        }
        if entries.iter().any(|e| !(e.integration_s > 0.0 && e.integration_s.is_finite())) {
            return Err(ConfigError::field("schedule.integration_s", "must be positive and finite"));
        }
        Ok(())
    }

    fn analysis_params(&self) -> SkrParams {
        self.analysis.skr_template()
    }
}

/// Loads a scenario from a file path, or from a bundled preset when no such
/// file exists.
pub fn load_scenario(arg: &str) -> CliResult<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return Ok(Scenario::from_toml(&text, arg)?);
    }
    match presets::scenario_text(arg) {
        Some(text) => Ok(Scenario::from_toml(text, &format!("preset:{arg}"))?),
        None => Err(CliError::Config(ConfigError::new(format!(
            "no scenario file or bundled preset named `{arg}` (presets: {})",
            presets::NAMES.join(", ")
        )))),
    }
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].matches('\n').count() + 1
}

pub(crate) fn toml_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let line = e.span().map(|s| line_of(text, s.start));
    let field = line.and_then(|l| field_at_line(text, l));
    ConfigError {
        file: None,
        line,
        field,
        message: e.message().trim().to_string(),
    }
}

/// Dotted key assigned on `line`, qualified by the enclosing table.
fn field_at_line(text: &str, line: usize) -> Option<String> {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') {
            table = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if i + 1 == line {
            let (key, _) = l.split_once('=')?;
            let key = key.trim();
            return Some(if table.is_empty() { key.to_string() } else { format!("{table}.{key}") });
        }
    }
    None
}

/// Line assigning the dotted `field`, if written explicitly.
fn locate_field(text: &str, field: &str) -> Option<usize> {
    let (table, key) = field.rsplit_once('.').unwrap_or(("", field));
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    table_line
}
