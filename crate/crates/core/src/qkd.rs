//! BBM92 key-rate analysis: per-basis QBER, asymptotic and finite-key secret
//! key rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counts::CountTable;
use crate::quantum::{Basis, MeasurementSetting};

#[derive(Debug, Error, PartialEq)]
pub enum QkdError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("setting {0} does not use the same basis on both sides")]
    BasisMismatch(MeasurementSetting),
    #[error("setting {0} is missing")]
    MissingSetting(MeasurementSetting),
    #[error("setting {0} has no counts")]
    EmptySetting(MeasurementSetting),
}

fn domain(msg: impl Into<String>) -> QkdError {
    QkdError::Domain(msg.into())
}

/// `H2(p) = −p log2 p − (1−p) log2(1−p)`.
pub fn binary_entropy(p: f64) -> Result<f64, QkdError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("binary entropy argument {p} outside [0, 1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Error counts for one matched-basis setting.
///
/// Φ+ is correlated in Z and X and anti-correlated in Y, so Y errors are the
/// equal-outcome events.
pub fn basis_errors(table: &CountTable, setting: MeasurementSetting) -> Result<(u64, u64), QkdError> {
    if setting.alice != setting.bob {
        return Err(QkdError::BasisMismatch(setting));
    }
    let entry = table.get(setting).ok_or(QkdError::MissingSetting(setting))?;
    let total = entry.total();
    if total == 0 {
        return Err(QkdError::EmptySetting(setting));
    }
    let c = entry.counts;
    let errors = match setting.alice {
        Basis::Y => c.pp + c.mm,
        Basis::Z | Basis::X => c.pm + c.mp,
    };
    Ok((errors, total))
}

pub fn qber_from_counts(table: &CountTable, setting: MeasurementSetting) -> Result<f64, QkdError> {
    let (errors, total) = basis_errors(table, setting)?;
    Ok(errors as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisQber {
    pub qber: f64,
    pub errors: u64,
    pub total: u64,
}

/// Per-basis error rates; a basis is absent if its matched setting was not
/// acquired.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QberReport {
    pub z: Option<BasisQber>,
    pub x: Option<BasisQber>,
    pub y: Option<BasisQber>,
}

impl QberReport {
    pub fn from_counts(table: &CountTable) -> Result<Self, QkdError> {
        let mut report = QberReport::default();
        for b in Basis::ALL {
            let s = MeasurementSetting::new(b, b);
            if !table.contains(s) {
                continue;
            }
            let (errors, total) = basis_errors(table, s)?;
            let entry = Some(BasisQber {
                qber: errors as f64 / total as f64,
                errors,
                total,
            });
            match b {
                Basis::Z => report.z = entry,
                Basis::X => report.x = entry,
                Basis::Y => report.y = entry,
            }
        }
        Ok(report)
    }

    pub fn from_values(z: f64, x: f64, y: f64) -> Self {
        let mk = |q| {
            Some(BasisQber {
                qber: q,
                errors: 0,
                total: 0,
            })
        };
        QberReport {
            z: mk(z),
            x: mk(x),
            y: mk(y),
        }
    }

    pub fn get(&self, b: Basis) -> Option<f64> {
        match b {
            Basis::Z => self.z,
            Basis::X => self.x,
            Basis::Y => self.y,
        }
        .map(|q| q.qber)
    }

    /// Mean of the Z and X error rates.
    pub fn mean_key_qber(&self) -> Option<f64> {
        Some((self.get(Basis::Z)? + self.get(Basis::X)?) / 2.0)
    }

    /// Mean over all three bases.
    pub fn mean_qber(&self) -> Option<f64> {
        Some((self.get(Basis::Z)? + self.get(Basis::X)? + self.get(Basis::Y)?) / 3.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkrParams {
    /// Error-reconciliation efficiency.
    pub f: f64,
    pub sift_ratio: f64,
    /// Raw key-basis coincidence rate before sifting.
    pub raw_rate_hz: f64,
    /// Channel transmittance factor.
    pub alpha: f64,
    /// Detector efficiency.
    pub eta: f64,
    pub eps_sec: f64,
    pub eps_cor: f64,
}

impl Default for SkrParams {
    fn default() -> Self {
        SkrParams {
            f: 1.1,
            sift_ratio: 0.5,
            raw_rate_hz: 1.0,
            alpha: 1.0,
            eta: 0.91,
            eps_sec: 1e-12,
            eps_cor: 1e-12,
        }
    }
}

impl SkrParams {
    pub fn validate(&self) -> Result<(), QkdError> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.f >= 1.0 && self.f.is_finite()) {
            return Err(domain(format!("f = {} must be at least 1", self.f)));
        }
        if !(self.sift_ratio > 0.0 && self.sift_ratio <= 1.0) {
            return Err(domain(format!("sift_ratio = {} outside (0, 1]", self.sift_ratio)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(domain(format!("eta = {} outside (0, 1]", self.eta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(domain(format!("alpha = {} must be non-negative", self.alpha)));
        }
        if !(self.raw_rate_hz >= 0.0 && self.raw_rate_hz.is_finite()) {
            return Err(domain(format!("raw_rate_hz = {} must be non-negative", self.raw_rate_hz)));
        }
        if !open_unit(self.eps_sec) || !open_unit(self.eps_cor) {
            return Err(domain("eps_sec and eps_cor must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Sifted bit rate `S · R_r · α · η`.
    pub fn sifted_rate(&self) -> f64 {
        self.sift_ratio * self.raw_rate_hz * self.alpha * self.eta
    }
}

fn check_qber(q: f64, name: &str) -> Result<(), QkdError> {
    if (0.0..=0.5).contains(&q) {
        Ok(())
    } else {
        Err(domain(format!("{name} = {q} outside [0, 0.5]")))
    }
}

/// `1 − f·H2(q_key) − H2(q_check)`, unclamped. Arguments above 1/2 are
/// evaluated at 1/2.
pub fn secret_fraction(q_key: f64, q_check: f64, f: f64) -> f64 {
    let h = |q: f64| binary_entropy(q.clamp(0.0, 0.5)).expect("clamped into domain");
    1.0 - f * h(q_key) - h(q_check)
}

/// Asymptotic secret key rate in bit/s, clamped at zero.
pub fn skr_asymptotic(qber_z: f64, qber_x: f64, params: &SkrParams) -> Result<f64, QkdError> {
    check_qber(qber_z, "qber_z")?;
    check_qber(qber_x, "qber_x")?;
    params.validate()?;
    Ok((secret_fraction(qber_z, qber_x, params.f) * params.sifted_rate()).max(0.0))
}

/// Hoeffding confidence width `√(ln(1/ε)/n)`.
pub fn hoeffding_delta(block_size: f64, eps_sec: f64) -> f64 {
    ((1.0 / eps_sec).ln() / block_size).sqrt()
}

/// How the statistical penalty enters the finite-key rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyModel {
    /// `SKR − Δ·r_sift − λ_EV/τ`: the penalty is subtracted per sifted bit.
    #[default]
    Subtractive,
    /// Secret fraction evaluated at `q + Δ` for both error rates, then
    /// `− λ_EV/τ`.
    WorstCaseInflation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteKeyResult {
    pub block_size: f64,
    pub acquisition_time_s: f64,
    pub delta: f64,
    pub lambda_ev_bits: f64,
    pub skr_asymptotic_bps: f64,
    pub skr_fin_bps: f64,
    /// Set when the penalties exceed the available key and the rate was
    /// clamped to zero.
    pub block_too_small: bool,
}

pub fn skr_finite(
    qber_z: f64,
    qber_x: f64,
    params: &SkrParams,
    block_size: f64,
    sifted_rate_bps: f64,
    model: PenaltyModel,
) -> Result<FiniteKeyResult, QkdError> {
    if !(block_size >= 1e3 && block_size.is_finite()) {
        return Err(domain(format!("block size {block_size} below 1e3")));
    }
    if !(sifted_rate_bps > 0.0 && sifted_rate_bps.is_finite()) {
        return Err(domain(format!("sifted rate {sifted_rate_bps} must be positive")));
    }
    let asym = skr_asymptotic(qber_z, qber_x, params)?;
    let delta = hoeffding_delta(block_size, params.eps_sec);
    let lambda_ev_bits = (2.0 / params.eps_cor).log2();
    let tau = block_size / sifted_rate_bps;
    let ev_rate = lambda_ev_bits / tau;
    let raw = match model {
        PenaltyModel::Subtractive => asym - delta * sifted_rate_bps - ev_rate,
        PenaltyModel::WorstCaseInflation => {
            let frac = secret_fraction(qber_z + delta, qber_x + delta, params.f);
            frac * params.sifted_rate() - ev_rate
        }
    };
    let skr = raw.clamp(0.0, asym);
    Ok(FiniteKeyResult {
        block_size,
        acquisition_time_s: tau,
        delta,
        lambda_ev_bits,
        skr_asymptotic_bps: asym,
        skr_fin_bps: skr,
        block_too_small: raw <= 0.0,
    })
}

/// Ordered (key, check) basis pair maximizing the secret fraction; ties go to
/// the earlier pair in Z, X, Y order.
pub fn select_key_bases(report: &QberReport, f: f64) -> Result<(Basis, Basis), QkdError> {
    let mut best: Option<((Basis, Basis), f64)> = None;
    for key in Basis::ALL {
        for check in Basis::ALL {
            if key == check {
                continue;
            }
            let qk = report.get(key).ok_or_else(|| domain(format!("no {key} error rate")))?;
            let qc = report.get(check).ok_or_else(|| domain(format!("no {check} error rate")))?;
            let frac = secret_fraction(qk, qc, f);
            if best.is_none_or(|(_, b)| frac > b) {
                best = Some(((key, check), frac));
            }
        }
    }
    Ok(best.expect("six candidate pairs").0)
}

/// Analytic operating point of a link at a given length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkPoint {
    pub qber_z: f64,
    pub qber_x: f64,
    pub params: SkrParams,
}

/// A link whose key-rate inputs can be evaluated analytically at any length.
pub trait LinkModel {
    type Error: From<QkdError>;

    fn operating_point(&self, length_km: f64) -> Result<LinkPoint, Self::Error>;
}

/// Asymptotic key rate of `model` at each length.
pub fn skr_vs_distance<M: LinkModel>(
    model: &M,
    lengths_km: &[f64],
) -> Result<Vec<(f64, f64)>, M::Error> {
    if lengths_km.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(domain("lengths must be non-negative").into());
    }
    if lengths_km.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("lengths must be sorted").into());
    }
    lengths_km
        .iter()
        .map(|&l| {
            let p = model.operating_point(l)?;
            let skr = skr_asymptotic(p.qber_z.min(0.5), p.qber_x.min(0.5), &p.params)?;
            Ok((l, skr))
        })
        .collect()
}
