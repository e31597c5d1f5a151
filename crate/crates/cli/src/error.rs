//! Error classes shared by every command. Each class has a stable name and
//! exit code; `main` prints `error[Class]: message` on stderr.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use pathlink_core::qkd::QkdError;
use pathlink_core::tomography::TomographyError;
use pathlink_linksim::LinkError;
use thiserror::Error;

/// Where a configuration problem was found.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigError {
    pub file: Option<String>,
    pub line: Option<usize>,
    /// Dotted path such as `link.channel.atten_db_per_km`.
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            message: message.into(),
            ..ConfigError::default()
        }
    }

    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: Some(field.into()),
            message: message.into(),
            ..ConfigError::default()
        }
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, "{file}:{line}: ")?,
            (Some(file), None) => write!(f, "{file}: ")?,
            (None, Some(line)) => write!(f, "line {line}: ")?,
            (None, None) => {}
        }
        if let Some(field) = &self.field {
            write!(f, "field `{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    NoConvergence(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Validation(_) => "ValidationError",
            CliError::Domain(_) => "DomainError",
            CliError::NotConverged(_) => "NotConverged",
            CliError::NoConvergence(_) => "NoConvergence",
            CliError::Io { .. } => "IoError",
        }
    }

    /// 2 is left to the argument parser.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Domain(_) => 5,
            CliError::NotConverged(_) => 6,
            CliError::NoConvergence(_) => 7,
            CliError::Io { .. } => 8,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<LinkError> for CliError {
    fn from(e: LinkError) -> Self {
        match e {
            LinkError::Config { field, message } => CliError::Config(ConfigError::field(field, message)),
            LinkError::Qkd(q) => q.into(),
        }
    }
}

impl From<QkdError> for CliError {
    fn from(e: QkdError) -> Self {
        match e {
            QkdError::Domain(_) => CliError::Domain(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TomographyError> for CliError {
    fn from(e: TomographyError) -> Self {
        match e {
            TomographyError::NotConverged(r) => CliError::NotConverged(format!(
                "maximum-likelihood fit stopped after {} iterations without converging",
                r.iterations
            )),
            TomographyError::InvalidRuns => CliError::Domain(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
