use std::f64::consts::SQRT_2;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathlink::commands::calibrate::{self, target_list, Observable, Predictor, Targets};
use pathlink::commands::{simulate, skr, sweep, tomo};
use pathlink::output::{to_json, CountFile, OutDir};
use pathlink::presets;
use pathlink::scenario::{load_scenario, Scenario, SCHEMA};
use pathlink_core::quantum::{bell_phi_plus, Basis};
use pathlink_core::tomography::TomographyDataset;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathlink")).args(args).output().unwrap()
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn phi_plus_counts(dir: &Path) -> PathBuf {
    let data = TomographyDataset::from_expected(&bell_phi_plus(), 40_000.0).unwrap();
    let file = CountFile {
        provenance: None,
        table: data.table().clone(),
    };
    write(dir, "phi.json", &to_json(&file))
}

#[test]
fn simulate_is_byte_identical_for_equal_seeds() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = bin(&["simulate", "short-4m", "--seed", "5", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["counts.json", "phase_trace.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    bin(&["simulate", "short-4m", "--seed", "6", "--out", c.path().to_str().unwrap()]);
    assert_ne!(
        std::fs::read(a.path().join("counts.json")).unwrap(),
        std::fs::read(c.path().join("counts.json")).unwrap()
    );
}

#[test]
fn short_4m_preset_gives_its_z_error_rate() {
    let (report, _) = simulate::run(simulate::SimulateArgs {
        scenario: "short-4m",
        seed: None,
        out: OutDir(None),
    })
    .unwrap();
    let qz = report.qber.get(Basis::Z).unwrap();
    assert!((qz - 0.0258).abs() < 0.005, "{qz}");
}

#[test]
fn malformed_field_is_named_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = "name = \"bad\"\nseed = 1\n[link.source]\npair_prob_per_pulse = \"lots\"\n[schedule]\nplan = \"key\"\nintegration_s = 1.0\n";
    let path = write(dir.path(), "bad.toml", text);
    let o = bin(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.starts_with("error[ConfigError]: "), "{e}");
    assert!(e.contains(":4: field `link.source.pair_prob_per_pulse`"), "{e}");
}

#[test]
fn out_of_range_value_and_unknown_preset_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = "name = \"bad\"\nseed = 1\n[link.channel]\ndetector_efficiency = 1.5\n[schedule]\nplan = \"key\"\nintegration_s = 1.0\n";
    let path = write(dir.path(), "bad.toml", text);
    let o = bin(&["simulate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("link.channel.detector_efficiency"), "{}", stderr(&o));

    let o = bin(&["simulate", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("short-4m"));
}

#[test]
fn run_record_replays_bit_identically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate::run(simulate::SimulateArgs {
        scenario: "single-chip",
        seed: Some(99),
        out: OutDir(Some(a.path().into())),
    })
    .unwrap();
    let record = a.path().join("run.json");
    simulate::run(simulate::SimulateArgs {
        scenario: record.to_str().unwrap(),
        seed: None,
        out: OutDir(Some(b.path().into())),
    })
    .unwrap();
    assert_eq!(
        std::fs::read_to_string(a.path().join("counts.json")).unwrap(),
        std::fs::read_to_string(b.path().join("counts.json")).unwrap()
    );
}

#[test]
fn outputs_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let (_, record) = simulate::run(simulate::SimulateArgs {
        scenario: "short-4m",
        seed: Some(3),
        out: OutDir(Some(dir.path().into())),
    })
    .unwrap();
    let digest = record.scenario.digest();
    let trace = std::fs::read_to_string(dir.path().join("phase_trace.csv")).unwrap();
    assert!(trace.starts_with(&format!("# tool=pathlink {}\n# seed=3\n", env!("CARGO_PKG_VERSION"))));
    assert!(trace.contains(&format!("# scenario_digest={digest}")));
    let counts: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("counts.json")).unwrap()).unwrap();
    assert_eq!(counts["provenance"]["seed"], 3);
    assert_eq!(counts["provenance"]["scenario_digest"], digest.as_str());
}

#[test]
fn structured_output_is_json() {
    let o = bin(&["skr", "--qber", "0.0258,0.056", "--scenario", "short-4m", "--format", "structured"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["key_rate"]["skr_asymptotic_bps"].as_f64().unwrap() > 0.0);
}

#[test]
fn exact_phi_plus_counts_reconstruct_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let counts = phi_plus_counts(dir.path());
    let r = tomo::run(tomo::TomoArgs {
        counts: &counts,
        target: "phi-plus",
        runs: 20,
        seed: Some(1),
        variance_scale: 1.0,
        out: OutDir(Some(dir.path().join("out"))),
    })
    .unwrap();
    assert!((r.reconstruction.fidelity - 1.0).abs() < 1e-9);
    assert!((r.reconstruction.chsh - 2.0 * SQRT_2).abs() < 1e-9);
    assert_eq!(r.reconstruction.overlap, 1.0);
    for f in ["rho.csv", "rho_polar.csv", "fidelity_samples.csv", "joint.csv", "tomo.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn single_monte_carlo_run_has_zero_spread() {
    let r = tomo::run(tomo::TomoArgs {
        counts: &manifest("data/short-4m-tomo.counts.json"),
        target: "phi-plus",
        runs: 1,
        seed: None,
        variance_scale: 1.0,
        out: OutDir(None),
    })
    .unwrap();
    assert_eq!(r.monte_carlo.fidelity_std, 0.0);
    assert_eq!(r.monte_carlo.chsh_violation_sigma, None);
}

#[test]
fn bundled_80km_dataset_matches_reported_fidelity_and_overlap() {
    let r = tomo::run(tomo::TomoArgs {
        counts: &manifest("data/mcf-80km-tomo.counts.json"),
        target: "phi-plus",
        runs: 200,
        seed: None,
        variance_scale: 1.0,
        out: OutDir(None),
    })
    .unwrap();
    assert!((r.monte_carlo.fidelity_mean - 0.857).abs() < 0.01);
    assert!((r.reconstruction.overlap - 0.979).abs() < 0.01);
}

#[test]
fn unknown_target_state_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let counts = phi_plus_counts(dir.path());
    let o = bin(&["tomo", counts.to_str().unwrap(), "--target", "ghz"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error[DomainError]"));
}

#[test]
fn zero_error_rates_give_the_rate_product() {
    let dir = tempfile::tempdir().unwrap();
    // R_r·S·α·η = 1000 · 0.5 · 0.25 · 0.8 = 100
    let params = write(
        dir.path(),
        "p.toml",
        "raw_rate_hz = 1000.0\nsift_ratio = 0.5\nalpha = 0.25\neta = 0.8\nf = 1.16\n",
    );
    let r = skr::run(skr::SkrArgs {
        counts: None,
        qber: Some(vec![0.0, 0.0]),
        scenario: None,
        params: Some(&params),
        blocks: Some(vec![]),
        model: None,
        seed: None,
        out: OutDir(None),
    })
    .unwrap();
    assert!((r.key_rate.skr_asymptotic_bps - 100.0).abs() < 1e-9);
}

#[test]
fn calibrated_scenarios_give_reference_finite_key_rates() {
    for (preset, expected, tol) in [
        ("short-4m", [802.0, 800.0, 794.0, 775.0], 0.02),
        ("mcf-80km", [2.03, 2.02, 1.98, 1.87], 0.02),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let r = skr::run(skr::SkrArgs {
            counts: None,
            qber: None,
            scenario: Some(preset),
            params: None,
            blocks: Some(vec![1e8, 1e7, 1e6, 1e5]),
            model: None,
            seed: None,
            out: OutDir(Some(dir.path().into())),
        })
        .unwrap();
        for (f, e) in r.key_rate.finite.iter().zip(expected) {
            assert!((f.skr_fin_bps - e).abs() / e < tol, "{preset}: {} vs {e}", f.skr_fin_bps);
        }
        let finite = std::fs::read_to_string(dir.path().join("finite_key.csv")).unwrap();
        assert_eq!(finite.lines().filter(|l| !l.starts_with('#')).count(), 5);
    }
}

#[test]
fn out_of_domain_error_rate_is_rejected() {
    let o = bin(&["skr", "--qber", "0.7,0.02", "--scenario", "short-4m"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

fn targets_file(dir: &Path, body: &str) -> PathBuf {
    write(dir, "targets.toml", body)
}

#[test]
fn satisfied_targets_exit_without_iterating() {
    let scenario = load_scenario("short-4m").unwrap();
    let targets = Targets {
        qber_z: Some(0.0),
        qber_x: Some(0.0),
        skr_bps: Some(0.0),
        ..Targets::default()
    };
    let predicted = Predictor::new().predict(&scenario, &target_list(&targets, &[])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = targets_file(
        dir.path(),
        &format!(
            "[[scenario]]\nbase = \"short-4m\"\nfree = [\"noise_floor\"]\n[scenario.targets]\nqber_z = {:e}\nqber_x = {:e}\nskr_bps = {:e}\n",
            predicted[0], predicted[1], predicted[2]
        ),
    );
    let r = calibrate::run(calibrate::CalibrateArgs {
        targets: &path,
        seed: None,
        out: OutDir(Some(dir.path().join("out"))),
    })
    .unwrap();
    assert_eq!(r.fits[0].iterations, 0);
    assert!(r.fits[0].within_tolerance);
    assert_eq!(r.scenarios[0], scenario);
    assert!(dir.path().join("out/short-4m.toml").exists());
    assert!(dir.path().join("out/residuals.json").exists());
}

#[test]
fn fits_80km_error_rates_and_fidelity_together() {
    let dir = tempfile::tempdir().unwrap();
    let path = targets_file(
        dir.path(),
        "[[scenario]]\nbase = \"mcf-80km\"\nname = \"joint\"\n\
         free = [\"noise_floor\", \"fiber_noise_rate_hz_per_km\", \"x_phase_error_rad\", \"y_phase_error_rad\"]\n\
         [scenario.targets]\nqber_z = 0.0681\nqber_x = 0.0726\nqber_y = 0.0863\nfidelity = 0.857\n",
    );
    let r = calibrate::run(calibrate::CalibrateArgs {
        targets: &path,
        seed: None,
        out: OutDir(Some(dir.path().into())),
    })
    .unwrap();
    let fit = &r.fits[0];
    assert!(fit.max_residual() < 0.05, "{fit:?}");
    assert_eq!(fit.residuals.len(), 4);
    let fitted = Scenario::from_toml(&std::fs::read_to_string(dir.path().join("joint.toml")).unwrap(), "joint").unwrap();
    assert_eq!(fitted, r.scenarios[0]);
}

const CONTRADICTORY: &str = "[[scenario]]\nbase = \"single-chip\"\n\
    free = [\"noise_floor\", \"x_phase_error_rad\", \"y_phase_error_rad\"]\n\
    [scenario.targets]\nfidelity = 0.99\nqber_x = 0.2\n";

#[test]
fn contradictory_targets_do_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let path = targets_file(dir.path(), CONTRADICTORY);
    let out = dir.path().join("out");
    let o = bin(&["calibrate", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(7));
    let e = stderr(&o);
    assert!(e.starts_with("error[NoConvergence]"), "{e}");
    assert!(e.contains("Fidelity"), "{e}");
    // Best-found parameters are still written.
    assert!(out.join("residuals.json").exists());
}

#[test]
fn contradictory_targets_are_infeasible_on_a_grid() {
    let base = load_scenario("single-chip").unwrap();
    let wanted = target_list(
        &Targets {
            fidelity: Some(0.99),
            qber_x: Some(0.2),
            ..Targets::default()
        },
        &[],
    );
    assert_eq!(wanted[0].observable, Observable::QberX);
    let mut predictor = Predictor::new();
    let n = 10;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let mut s = base.clone();
                s.link.channel.noise_floor = 0.5 * i as f64 / n as f64;
                s.link.analyzer.x_phase_error_rad = std::f64::consts::FRAC_PI_2 * j as f64 / n as f64;
                s.link.analyzer.y_phase_error_rad = std::f64::consts::FRAC_PI_2 * k as f64 / n as f64;
                let p = predictor.predict(&s, &wanted).unwrap();
                let worst = wanted
                    .iter()
                    .zip(&p)
                    .map(|(t, p)| ((p - t.value) / t.value).abs())
                    .fold(0.0, f64::max);
                best = best.min(worst);
            }
        }
    }
    assert!(best > 0.05, "a grid point meets both targets within {best}");
}

#[test]
fn unknown_free_parameter_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = targets_file(
        dir.path(),
        "[[scenario]]\nbase = \"short-4m\"\nfree = [\"temperature\"]\n[scenario.targets]\nqber_z = 0.03\n",
    );
    let o = bin(&["calibrate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("temperature"));
}

fn analytic_sweep(scenario: &str, lengths: Vec<f64>) -> sweep::SweepReport {
    sweep::run(sweep::SweepArgs {
        scenario,
        lengths,
        simulate: false,
        seed: None,
        out: OutDir(None),
    })
    .unwrap()
}

fn analytic_skr(scenario: &str) -> f64 {
    skr::run(skr::SkrArgs {
        counts: None,
        qber: None,
        scenario: Some(scenario),
        params: None,
        blocks: Some(vec![]),
        model: None,
        seed: None,
        out: OutDir(None),
    })
    .unwrap()
    .key_rate
    .skr_asymptotic_bps
}

#[test]
fn sweep_endpoints_match_key_rate_command() {
    let r = analytic_sweep("mcf-sweep", vec![0.004, 80.0]);
    let near = analytic_skr("short-4m");
    let far = analytic_skr("mcf-80km");
    assert!((r.points[0].skr_analytic - near).abs() / near < 0.01, "{:?} vs {near}", r.points[0]);
    assert!((r.points[1].skr_analytic - far).abs() / far < 0.01, "{:?} vs {far}", r.points[1]);
    // Each endpoint also agrees with the key-rate command on the same link.
    assert!((analytic_sweep("mcf-80km", vec![80.0]).points[0].skr_analytic - far).abs() < 1e-12 * far);
}

#[test]
fn sweep_rate_does_not_increase_with_length() {
    for preset in ["mcf-sweep", "short-4m", "mcf-80km"] {
        let r = analytic_sweep(preset, sweep::linspace(0.0, 120.0, 61));
        for w in r.points.windows(2) {
            assert!(w[1].skr_analytic <= w[0].skr_analytic, "{preset}: {:?}", w);
        }
    }
}

#[test]
fn calibrated_curve_passes_both_measured_points() {
    let r = analytic_sweep("mcf-sweep", vec![0.004, 80.0]);
    assert!((r.points[0].skr_analytic - 802.0).abs() / 802.0 < 0.1);
    assert!((r.points[1].skr_analytic - 2.03).abs() / 2.03 < 0.1);
}

#[test]
fn simulated_sweep_tracks_analytic_curve() {
    let dir = tempfile::tempdir().unwrap();
    let r = sweep::run(sweep::SweepArgs {
        scenario: "short-4m",
        lengths: vec![0.004, 10.0, 20.0],
        simulate: true,
        seed: Some(12),
        out: OutDir(Some(dir.path().into())),
    })
    .unwrap();
    for p in &r.points {
        let sim = p.skr_simulated.unwrap();
        assert!((sim - p.skr_analytic).abs() / p.skr_analytic < 0.05, "{p:?}");
    }
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.contains("# seed=12\n"));
    assert!(csv.contains("length_km,skr_analytic,skr_simulated\n"));
}

#[test]
fn negative_length_is_rejected() {
    let o = bin(&["sweep", "short-4m", "--lengths=-1,2"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn scenarios_round_trip() {
    for name in presets::NAMES {
        let s = load_scenario(name).unwrap();
        assert_eq!(Scenario::from_toml(&s.to_toml(), name).unwrap(), s, "{name}");
    }
    let schema = Scenario::from_toml(SCHEMA, "schema").unwrap();
    assert_eq!(Scenario::from_toml(&schema.to_toml(), "schema").unwrap(), schema);
}

#[test]
fn committed_residuals_are_within_five_percent() {
    let fits: Vec<calibrate::FitResult> = serde_json::from_str(presets::RESIDUALS).unwrap();
    let names: Vec<&str> = fits.iter().map(|f| f.scenario.as_str()).collect();
    for name in presets::NAMES {
        assert!(names.contains(&name), "{name}");
    }
    assert!(fits.iter().all(|f| f.accepted()));
}

#[test]
fn schema_and_presets_print() {
    let o = bin(&["schema"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), SCHEMA);
    let o = bin(&["schema", "mcf-80km"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), presets::scenario_text("mcf-80km").unwrap());
}

#[test]
fn finite_key_rate_approaches_asymptote_for_every_preset() {
    for name in presets::NAMES {
        let r = skr::run(skr::SkrArgs {
            counts: None,
            qber: None,
            scenario: Some(name),
            params: None,
            blocks: Some(vec![1e12]),
            model: None,
            seed: None,
            out: OutDir(None),
        })
        .unwrap();
        let asym = r.key_rate.skr_asymptotic_bps;
        let fin = r.key_rate.finite[0].skr_fin_bps;
        assert!(fin <= asym && (asym - fin) / asym < 1e-3, "{name}: {fin} vs {asym}");
    }
}
