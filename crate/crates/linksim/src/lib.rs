//! Stochastic model of a path-encoded entanglement distribution link:
//! pair source, lossy channel, phase drift under PLL stabilization and
//! detection, producing coincidence tables and phase traces.

pub mod analytic;
pub mod config;
pub mod phase;
pub mod pll;
pub mod sim;
pub mod source;
pub mod timestamps;

use thiserror::Error;

pub use analytic::{AnalyticLink, Coherence, LinkRates};
pub use config::{
    AnalyzerParams, ChannelParams, LinkConfig, PhaseNoiseParams, PhaseProcessKind, PllParams,
    RelockStrategy, SourceParams,
};
pub use phase::{pd_power, phase_step, wrap_phase, PhaseProcess};
pub use pll::{pll_run, pll_run_with_jumps, InjectedJump, PhaseSummary, PhaseTrace};

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("invalid {field}: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Qkd(#[from] pathlink_core::qkd::QkdError),
}
