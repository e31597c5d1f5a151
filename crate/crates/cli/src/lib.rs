//! Command implementations behind the `pathlink` binary.

pub mod analysis;
pub mod commands;
pub mod error;
pub mod output;
pub mod presets;
pub mod scenario;
