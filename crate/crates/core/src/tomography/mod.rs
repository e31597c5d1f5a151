//! State reconstruction from nine-setting coincidence data.

mod dataset;
mod joint;
mod mle;
mod montecarlo;

use thiserror::Error;

use crate::quantum::{MeasurementSetting, QuantumError};

pub use dataset::{correlations_from_counts, linear_inversion, TomographyDataset};
pub use joint::{
    ideal_joint_probability_matrix, joint_probability_matrix, matrix_overlap, JointMatrix,
};
pub use mle::{mle_reconstruct, MleOptions, ReconstructionResult};
pub use montecarlo::{
    mean_std, monte_carlo_fidelity, monte_carlo_resample, resample_count, FidelityHistogram,
    MonteCarloOptions,
};

/// Lower bound on model probabilities inside the log-likelihood.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("setting {0} is missing")]
    MissingSetting(MeasurementSetting),
    #[error("setting {0} has no counts")]
    EmptySetting(MeasurementSetting),
    #[error("{matrix} block {block} sums to {sum}, expected 1")]
    NotNormalized {
        matrix: &'static str,
        block: MeasurementSetting,
        sum: f64,
    },
    #[error("likelihood maximization did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<ReconstructionResult>),
    #[error("Monte Carlo run count must be positive")]
    InvalidRuns,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}
