//! Provenance stamps, count files and report formatting.

use std::fs;
use std::path::{Path, PathBuf};

use pathlink_core::counts::CountTable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::scenario::Scenario;

pub const TOOL: &str = "pathlink";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    /// JSON with full-precision numbers.
    Structured,
}

/// Stamp embedded in every output file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub scenario: Option<String>,
    pub scenario_digest: Option<String>,
    /// SHA-256 of the input file for commands that read data rather than a
    /// scenario.
    pub input_digest: Option<String>,
}

impl Provenance {
    pub fn new(seed: Option<u64>) -> Self {
        Provenance {
            tool: TOOL.to_string(),
            tool_version: VERSION.to_string(),
            seed,
            ..Provenance::default()
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Provenance {
            scenario: Some(scenario.name.clone()),
            scenario_digest: Some(scenario.digest()),
            ..Provenance::new(Some(scenario.seed))
        }
    }

    /// `# key=value` lines for delimited text files.
    pub fn header_lines(&self) -> Vec<String> {
        let mut h = vec![format!("tool={} {}", self.tool, self.tool_version)];
        let opt = |k: &str, v: &Option<String>| v.as_ref().map(|v| format!("{k}={v}"));
        h.extend(self.seed.map(|s| format!("seed={s}")));
        h.extend(opt("scenario", &self.scenario));
        h.extend(opt("scenario_digest", &self.scenario_digest));
        h.extend(opt("input_digest", &self.input_digest));
        h
    }

    pub fn header(&self) -> String {
        self.header_lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}

/// On-disk count table: the settings array plus an optional provenance
/// block. A bare `{"settings": [...]}` document is also accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(flatten)]
    pub table: CountTable,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize to JSON");
    s.push('\n');
    s
}

/// Reads a count file, returning it with the digest of its bytes.
pub fn read_count_file(path: &Path) -> CliResult<(CountFile, String)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let file: CountFile = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Validation(format!("{}: not a count table: {e}", path.display()))
    })?;
    Ok((file, sha256_hex(&bytes)))
}

/// Output directory handle; creates the directory on first write.
#[derive(Clone, Debug)]
pub struct OutDir(pub Option<PathBuf>);

impl OutDir {
    pub fn write(&self, name: &str, contents: &str) -> CliResult<Option<PathBuf>> {
        let Some(dir) = &self.0 else { return Ok(None) };
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(Some(path))
    }
}

/// Command output that can be shown as text or as a JSON document.
pub trait Report: Serialize {
    fn text(&self) -> String;

    fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text(),
            Format::Structured => to_json(self),
        }
    }
}

/// Fixed-width percentage with two decimals.
pub fn pct(x: f64) -> String {
    format!("{:6.2}%", 100.0 * x)
}
