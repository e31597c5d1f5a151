use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pathlink::commands::{calibrate, simulate, skr, sweep, tomo};
use pathlink::error::{CliError, CliResult};
use pathlink::output::{Format, OutDir, Report};
use pathlink::presets;
use pathlink::scenario::SCHEMA;
use pathlink_core::qkd::PenaltyModel;

#[derive(Parser)]
#[command(name = "pathlink", version, about = "Entanglement distribution link simulation and analysis")]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files; nothing is written without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write counts, phase trace and run record.
    Simulate {
        /// Scenario file, bundled preset name, or a run.json to replay.
        scenario: String,
    },
    /// Reconstruct the two-qubit state from a count file.
    Tomo {
        /// Count file written by `simulate`.
        counts: PathBuf,
        /// Target state: phi-plus, phi-minus, psi-plus, psi-minus or mixed.
        #[arg(long, default_value = "phi-plus")]
        target: String,
        /// Monte Carlo resampling runs.
        #[arg(long, default_value_t = 2000)]
        runs: usize,
        /// Resampling variance relative to Poisson.
        #[arg(long, default_value_t = 1.0)]
        variance_scale: f64,
    },
    /// Error rates and asymptotic and finite-key secret key rates.
    Skr {
        /// Count file to take error rates from.
        #[arg(long, conflicts_with = "qber")]
        counts: Option<PathBuf>,
        /// QBER_Z,QBER_X[,QBER_Y] as fractions.
        #[arg(long, value_delimiter = ',')]
        qber: Option<Vec<f64>>,
        /// Scenario or preset supplying the link rates.
        #[arg(long)]
        scenario: Option<String>,
        /// Key-rate parameter file (TOML or JSON).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Finite-key block sizes; an empty list skips them.
        #[arg(long, value_delimiter = ',')]
        blocks: Option<Vec<f64>>,
        /// subtractive or worst-case-inflation.
        #[arg(long, value_parser = parse_model)]
        model: Option<PenaltyModel>,
    },
    /// Fit link parameters to target observables.
    Calibrate {
        /// Targets file with one [[scenario]] table per fit.
        targets: PathBuf,
    },
    /// Key rate against fiber length.
    Sweep {
        /// Scenario file or preset name.
        scenario: String,
        /// Explicit lengths in km; overrides --from/--to/--points.
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 100.0)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Skip the Monte Carlo curve.
        #[arg(long)]
        analytic_only: bool,
    },
    /// Print the annotated scenario schema, or a bundled preset.
    Schema {
        /// Preset to print instead of the schema.
        preset: Option<String>,
    },
}

fn parse_model(s: &str) -> Result<PenaltyModel, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "expected `subtractive` or `worst-case-inflation`".to_string())
}

fn run(cli: Cli) -> CliResult<String> {
    let out = OutDir(cli.out);
    let f = cli.format;
    Ok(match cli.command {
        Command::Simulate { scenario } => {
            let (report, _) = simulate::run(simulate::SimulateArgs {
                scenario: &scenario,
                seed: cli.seed,
                out,
            })?;
            report.render(f)
        }
        Command::Tomo {
            counts,
            target,
            runs,
            variance_scale,
        } => tomo::run(tomo::TomoArgs {
            counts: &counts,
            target: &target,
            runs,
            seed: cli.seed,
            variance_scale,
            out,
        })?
        .render(f),
        Command::Skr {
            counts,
            qber,
            scenario,
            params,
            blocks,
            model,
        } => skr::run(skr::SkrArgs {
            counts: counts.as_deref(),
            qber,
            scenario: scenario.as_deref(),
            params: params.as_deref(),
            blocks,
            model,
            seed: cli.seed,
            out,
        })?
        .render(f),
        Command::Calibrate { targets } => calibrate::run(calibrate::CalibrateArgs {
            targets: &targets,
            seed: cli.seed,
            out,
        })?
        .render(f),
        Command::Sweep {
            scenario,
            lengths,
            from,
            to,
            points,
            analytic_only,
        } => sweep::run(sweep::SweepArgs {
            scenario: &scenario,
            lengths: lengths.unwrap_or_else(|| sweep::linspace(from, to, points)),
            simulate: !analytic_only,
            seed: cli.seed,
            out,
        })?
        .render(f),
        Command::Schema { preset: None } => SCHEMA.to_string(),
        Command::Schema { preset: Some(name) } => presets::scenario_text(&name)
            .ok_or_else(|| {
                CliError::Config(pathlink::error::ConfigError::new(format!(
                    "no preset `{name}` (presets: {})",
                    presets::NAMES.join(", ")
                )))
            })?
            .to_string(),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code())
        }
    }
}
