//! Calibrated scenarios compiled into the binary. The files live in
//! `presets/` and are regenerated by `pathlink calibrate presets/targets.toml`.

pub const NAMES: [&str; 6] = [
    "single-chip",
    "short-4m",
    "short-4m-tomo",
    "mcf-80km",
    "mcf-80km-tomo",
    "mcf-sweep",
];

pub fn scenario_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "single-chip" => include_str!("../presets/single-chip.toml"),
        "short-4m" => include_str!("../presets/short-4m.toml"),
        "short-4m-tomo" => include_str!("../presets/short-4m-tomo.toml"),
        "mcf-80km" => include_str!("../presets/mcf-80km.toml"),
        "mcf-80km-tomo" => include_str!("../presets/mcf-80km-tomo.toml"),
        "mcf-sweep" => include_str!("../presets/mcf-sweep.toml"),
        _ => return None,
    })
}

/// Targets file the presets were fitted against.
pub const TARGETS: &str = include_str!("../presets/targets.toml");

/// Residuals written by the last calibration run.
pub const RESIDUALS: &str = include_str!("../presets/residuals.json");
