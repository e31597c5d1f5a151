use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::quantum::{fidelity, TwoQubitState};
use crate::rng::{derive_seed, rng_from_seed};

use super::dataset::TomographyDataset;
use super::mle::{mle_reconstruct, MleOptions, ReconstructionResult};
use super::TomographyError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloOptions {
    pub runs: usize,
    pub seed: u64,
    /// Variance multiplier `v`: each count `n` becomes
    /// `round(v · Poisson(n / v))`. `v = 1` is plain Poisson resampling and
    /// `v = 0` disables resampling.
    pub variance_scale: f64,
    pub mle: MleOptions,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            runs: 2000,
            seed: 0,
            variance_scale: 1.0,
            mle: MleOptions::default(),
        }
    }
}

/// Summary of a resampled statistic.
#[derive(Clone, Debug)]
pub struct FidelityHistogram {
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`n − 1`); zero for a single sample.
    pub std: f64,
    /// Runs dropped because a resampled setting was empty.
    pub excluded: usize,
}

impl FidelityHistogram {
    pub fn from_samples(samples: Vec<f64>, excluded: usize) -> Self {
        let (mean, std) = mean_std(&samples);
        FidelityHistogram {
            samples,
            mean,
            std,
            excluded,
        }
    }

    /// Counts in `bins` equal-width bins over `[lo, hi]`; out-of-range
    /// samples are clamped to the edge bins.
    pub fn binned(&self, lo: f64, hi: f64, bins: usize) -> Vec<usize> {
        let mut out = vec![0; bins.max(1)];
        let width = (hi - lo) / out.len() as f64;
        for &s in &self.samples {
            let idx = ((s - lo) / width).floor().max(0.0) as usize;
            let last = out.len() - 1;
            out[idx.min(last)] += 1;
        }
        out
    }
}

pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.iter().all(|s| *s == samples[0]) {
        return (samples[0], 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn resample_count<R: Rng + ?Sized>(rng: &mut R, n: u64, variance_scale: f64) -> u64 {
    if variance_scale <= 0.0 || n == 0 {
        return n;
    }
    let lambda = n as f64 / variance_scale;
    let draw = Poisson::new(lambda)
        .expect("positive finite rate")
        .sample(rng);
    (variance_scale * draw).round() as u64
}

/// Reconstructs `opts.runs` resampled copies of `data` and maps each
/// estimate through `stat`. Run `i` uses `derive_seed(opts.seed, i)`, so the
/// output is independent of scheduling. Runs whose resampled data lose a
/// setting are excluded; non-converged fits keep their best estimate.
pub fn monte_carlo_resample<T, F>(
    data: &TomographyDataset,
    opts: &MonteCarloOptions,
    stat: F,
) -> Result<(Vec<T>, usize), TomographyError>
where
    T: Send,
    F: Fn(&ReconstructionResult) -> T + Sync,
{
    if opts.runs == 0 {
        return Err(TomographyError::InvalidRuns);
    }
    let results: Vec<Option<T>> = (0..opts.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(opts.seed, i as u64));
            let table = data
                .table()
                .map_counts(|n| resample_count(&mut rng, n, opts.variance_scale));
            let resampled = TomographyDataset::new(table).ok()?;
            let fit = match mle_reconstruct(&resampled, &opts.mle) {
                Ok(r) => r,
                Err(TomographyError::NotConverged(r)) => *r,
                Err(_) => return None,
            };
            Some(stat(&fit))
        })
        .collect();
    let excluded = results.iter().filter(|r| r.is_none()).count();
    Ok((results.into_iter().flatten().collect(), excluded))
}

/// Fidelity distribution of resampled MLE reconstructions against `target`.
pub fn monte_carlo_fidelity(
    data: &TomographyDataset,
    target: &TwoQubitState,
    opts: &MonteCarloOptions,
) -> Result<FidelityHistogram, TomographyError> {
    target.ensure_physical()?;
    let (samples, excluded) = monte_carlo_resample(data, opts, |r| {
        fidelity(&r.rho, target).expect("MLE estimates are physical")
    })?;
    Ok(FidelityHistogram::from_samples(samples, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn mean_std_conventions() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_scale_keeps_counts() {
        let mut rng = rng_from_seed(1);
        assert_eq!(resample_count(&mut rng, 1234, 0.0), 1234);
        assert_eq!(resample_count(&mut rng, 0, 1.0), 0);
    }

    #[test]
    fn variance_scale_multiplies_variance() {
        let mut rng = rng_from_seed(2);
        let n = 400u64;
        for v in [1.0, 4.0] {
            let draws: Vec<f64> = (0..20_000)
                .map(|_| resample_count(&mut rng, n, v) as f64)
                .collect();
            let (m, s) = mean_std(&draws);
            assert!((m - n as f64).abs() < 1.0);
            let var = s * s;
            assert!((var / (v * n as f64) - 1.0).abs() < 0.05, "v={v} var={var}");
        }
    }

    #[test]
    fn binned_clamps_edges() {
        let h = FidelityHistogram::from_samples(vec![-1.0, 0.1, 0.5, 0.99, 2.0], 0);
        assert_eq!(h.binned(0.0, 1.0, 2), vec![2, 3]);
    }
}
