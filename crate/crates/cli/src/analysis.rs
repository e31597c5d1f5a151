//! Analysis steps shared by several commands.

use pathlink_core::counts::CountTable;
use pathlink_core::qkd::{
    select_key_bases, skr_asymptotic, skr_finite, FiniteKeyResult, PenaltyModel, QberReport,
    SkrParams,
};
use pathlink_core::quantum::{chsh_max, fidelity, Basis, MeasurementSetting, TwoQubitState};
use pathlink_core::tomography::{
    ideal_joint_probability_matrix, joint_probability_matrix, matrix_overlap, mle_reconstruct,
    JointMatrix, MleOptions, ReconstructionResult, TomographyDataset, TomographyError,
};
use pathlink_linksim::LinkRates;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::scenario::Scenario;

/// Asymptotic and finite-key rates for one operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    pub key_basis: Basis,
    pub check_basis: Basis,
    pub qber_key: f64,
    pub qber_check: f64,
    pub params: SkrParams,
    pub penalty_model: PenaltyModel,
    pub skr_asymptotic_bps: f64,
    pub finite: Vec<FiniteKeyResult>,
}

/// Key and check bases: the best pair when all three error rates are known,
/// Z/X otherwise.
pub fn key_bases(report: &QberReport, f: f64) -> CliResult<(Basis, Basis)> {
    if report.z.is_some() && report.x.is_some() && report.y.is_some() {
        Ok(select_key_bases(report, f)?)
    } else {
        Ok((Basis::Z, Basis::X))
    }
}

pub fn key_rate(
    report: &QberReport,
    params: &SkrParams,
    blocks: &[f64],
    model: PenaltyModel,
) -> CliResult<KeyRate> {
    let (key, check) = key_bases(report, params.f)?;
    let missing = |b: Basis| {
        crate::error::CliError::Validation(format!("no {b}-basis error rate available"))
    };
    let qk = report.get(key).ok_or_else(|| missing(key))?;
    let qc = report.get(check).ok_or_else(|| missing(check))?;
    let asym = skr_asymptotic(qk, qc, params)?;
    let finite = blocks
        .iter()
        .map(|n| skr_finite(qk, qc, params, *n, params.sifted_rate(), model))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KeyRate {
        key_basis: key,
        check_basis: check,
        qber_key: qk,
        qber_check: qc,
        params: *params,
        penalty_model: model,
        skr_asymptotic_bps: asym,
        finite,
    })
}

/// Key-rate inputs measured from simulated counts: `R_r·α·η` is the observed
/// coincidence rate of the key setting, `α` and `η` come from the link.
pub fn measured_skr_params(scenario: &Scenario, counts: &CountTable, key: Basis) -> Option<SkrParams> {
    let entry = counts.get(MeasurementSetting::new(key, key))?;
    if entry.integration_s <= 0.0 {
        return None;
    }
    let rate = entry.total() as f64 / entry.integration_s;
    let rates = LinkRates::of(&scenario.link);
    Some(SkrParams {
        raw_rate_hz: rate / (rates.t_signal * rates.eta),
        alpha: rates.t_signal,
        eta: rates.eta,
        ..scenario.analysis.skr_template()
    })
}

/// Key rate of a simulated run, if it measured the needed settings.
pub fn simulated_key_rate(scenario: &Scenario, counts: &CountTable) -> CliResult<Option<KeyRate>> {
    let report = QberReport::from_counts(counts)?;
    if report.z.is_none() || report.x.is_none() {
        return Ok(None);
    }
    let (key, _) = key_bases(&report, scenario.analysis.f)?;
    let Some(params) = measured_skr_params(scenario, counts, key) else {
        return Ok(None);
    };
    Ok(Some(key_rate(
        &report,
        &params,
        &scenario.analysis.block_sizes,
        scenario.analysis.penalty_model,
    )?))
}

/// Point estimate from a tomography dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub total_counts: u64,
    pub fidelity: f64,
    pub chsh: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub linear_inversion_physical: bool,
    pub joint_matrix: JointMatrix,
    pub overlap: f64,
}

/// MLE fit of `table`; a fit that stops early is kept and flagged.
pub fn reconstruct(table: &CountTable, opts: &MleOptions) -> CliResult<(TomographyDataset, ReconstructionResult)> {
    let data = TomographyDataset::new(table.clone())?;
    let fit = match mle_reconstruct(&data, opts) {
        Ok(r) => r,
        Err(TomographyError::NotConverged(r)) => *r,
        Err(e) => return Err(e.into()),
    };
    Ok((data, fit))
}

pub fn summarize(
    data: &TomographyDataset,
    fit: &ReconstructionResult,
    target: &TwoQubitState,
) -> CliResult<ReconstructionSummary> {
    let joint = joint_probability_matrix(data.table())?;
    let overlap = matrix_overlap(&joint, &ideal_joint_probability_matrix(target))?;
    Ok(ReconstructionSummary {
        total_counts: data.total(),
        fidelity: fidelity(&fit.rho, target).map_err(TomographyError::from)?,
        chsh: chsh_max(&fit.rho).map_err(TomographyError::from)?,
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
        converged: fit.converged,
        linear_inversion_physical: fit.linear_inversion_physical,
        joint_matrix: joint,
        overlap,
    })
}
