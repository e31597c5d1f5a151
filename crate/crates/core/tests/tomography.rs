use pathlink_core::counts::CountTable;
use pathlink_core::quantum::{bell_phi_plus, Basis, MeasurementSetting, TwoQubitState};
use pathlink_core::rng::rng_from_seed;
use pathlink_core::tomography::{
    ideal_joint_probability_matrix, joint_probability_matrix, linear_inversion, matrix_overlap,
    mle_reconstruct, monte_carlo_fidelity, resample_count, MleOptions, MonteCarloOptions,
    TomographyDataset, TomographyError,
};

fn werner(v: f64) -> TwoQubitState {
    TwoQubitState::mix(&bell_phi_plus(), &TwoQubitState::maximally_mixed(), v)
}

#[test]
fn missing_and_empty_settings_are_rejected() {
    let full = TomographyDataset::from_expected(&werner(0.9), 1000.0).unwrap();
    let mut table = full.table().clone();
    table.settings.retain(|s| s.setting() != MeasurementSetting::new(Basis::Y, Basis::X));
    assert!(matches!(
        TomographyDataset::new(table),
        Err(TomographyError::MissingSetting(_))
    ));
    let zeroed = full.table().map_counts(|_| 0);
    assert!(matches!(
        TomographyDataset::new(zeroed),
        Err(TomographyError::EmptySetting(_))
    ));
}

#[test]
fn linear_inversion_of_expected_counts_is_exact() {
    let rho = werner(0.8);
    let data = TomographyDataset::from_expected(&rho, 1e9).unwrap();
    let lin = linear_inversion(&data);
    assert!(lin.physical);
    assert!(lin.state.matrix().max_abs_diff(rho.matrix()) < 1e-8);
}

#[test]
fn monte_carlo_without_resampling_has_zero_spread() {
    let data = TomographyDataset::from_expected(&werner(0.9), 5000.0).unwrap();
    let opts = MonteCarloOptions {
        runs: 5,
        variance_scale: 0.0,
        ..MonteCarloOptions::default()
    };
    let h = monte_carlo_fidelity(&data, &bell_phi_plus(), &opts).unwrap();
    assert_eq!(h.samples.len(), 5);
    assert_eq!(h.std, 0.0);
    assert!(h.samples.iter().all(|s| *s == h.samples[0]));
    assert!((h.mean - (0.9 + 0.1 / 4.0)).abs() < 1e-3);
}

#[test]
fn monte_carlo_is_seed_deterministic() {
    let data = TomographyDataset::from_expected(&werner(0.85), 2000.0).unwrap();
    let opts = MonteCarloOptions {
        runs: 40,
        seed: 77,
        ..MonteCarloOptions::default()
    };
    let a = monte_carlo_fidelity(&data, &bell_phi_plus(), &opts).unwrap();
    let b = monte_carlo_fidelity(&data, &bell_phi_plus(), &opts).unwrap();
    assert_eq!(a.samples, b.samples);
    assert!(a.std > 0.0);
    let other = monte_carlo_fidelity(&data, &bell_phi_plus(), &MonteCarloOptions { seed: 78, ..opts }).unwrap();
    assert_ne!(a.samples, other.samples);
    assert!(matches!(
        monte_carlo_fidelity(&data, &bell_phi_plus(), &MonteCarloOptions { runs: 0, ..opts }),
        Err(TomographyError::InvalidRuns)
    ));
}

#[test]
fn monte_carlo_spread_tracks_count_level() {
    // Fidelity spread scales as 1/√N: a hundredfold increase in counts
    // should shrink it about tenfold.
    let opts = MonteCarloOptions {
        runs: 200,
        seed: 3,
        ..MonteCarloOptions::default()
    };
    let low = TomographyDataset::from_expected(&werner(0.9), 1e3).unwrap();
    let high = TomographyDataset::from_expected(&werner(0.9), 1e5).unwrap();
    let sl = monte_carlo_fidelity(&low, &bell_phi_plus(), &opts).unwrap().std;
    let sh = monte_carlo_fidelity(&high, &bell_phi_plus(), &opts).unwrap().std;
    let ratio = sl / sh;
    assert!((6.0..16.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn ideal_counts_give_unit_overlap() {
    let data = TomographyDataset::from_expected(&bell_phi_plus(), 1000.0).unwrap();
    let exp = joint_probability_matrix(data.table()).unwrap();
    let th = ideal_joint_probability_matrix(&bell_phi_plus());
    assert_eq!(matrix_overlap(&exp, &th).unwrap(), 1.0);
    assert!(matches!(
        joint_probability_matrix(&CountTable::new()),
        Err(TomographyError::MissingSetting(_))
    ));
}

#[test]
fn overlap_of_white_noise_mixture() {
    // Each block of v·Φ+ + (1−v)·I/4 differs from Φ+ by (1−v)/2 in total
    // variation for ZZ and XX, and not at all for ZX and XZ.
    let v = 0.9;
    let p = ideal_joint_probability_matrix(&werner(v));
    let o = matrix_overlap(&p, &ideal_joint_probability_matrix(&bell_phi_plus())).unwrap();
    assert!((o - (1.0 - (1.0 - v) / 4.0)).abs() < 1e-12);
}

/// Poisson-sampled counts around the expected table of `state`.
fn noisy_dataset(state: &TwoQubitState, shots: f64, seed: u64) -> TomographyDataset {
    let mean = TomographyDataset::from_expected(state, shots).unwrap();
    let mut rng = rng_from_seed(seed);
    let mut table = CountTable::new();
    for (setting, c) in mean.settings().iter().zip(mean.counts()) {
        table.add(*setting, 1.0, c.map(|n| resample_count(&mut rng, n, 1.0)), 0.0);
    }
    TomographyDataset::new(table).unwrap()
}

#[test]
fn reconstruction_error_shrinks_as_inverse_root_n() {
    let truth = werner(0.85);
    let levels = [1e3, 1e4, 1e5, 1e6];
    let median_error = |shots: f64| {
        let mut d: Vec<f64> = (0..21)
            .map(|seed| {
                let r = mle_reconstruct(&noisy_dataset(&truth, shots, seed), &MleOptions::default()).unwrap();
                r.rho.trace_distance(&truth)
            })
            .collect();
        d.sort_by(f64::total_cmp);
        d[10]
    };
    let errs: Vec<f64> = levels.iter().map(|&n| median_error(n)).collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
    // Least-squares slope of log error against log N.
    let xs: Vec<f64> = levels.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((-0.7..-0.3).contains(&slope), "slope {slope}, {errs:?}");
}
