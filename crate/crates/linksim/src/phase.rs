//! Differential phase drift between the two arms of the link.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{PhaseNoiseParams, PhaseProcessKind};

/// Wraps into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Photodiode reading `(1 + v cos φ)/2` of the reference fringe.
pub fn pd_power(residual_phase_rad: f64, fringe_visibility: f64) -> f64 {
    (1.0 + fringe_visibility * residual_phase_rad.cos()) / 2.0
}

/// Discretized drift at a fixed step.
#[derive(Clone, Debug)]
pub struct PhaseProcess {
    phase: f64,
    decay: f64,
    sigma_step: f64,
    jump_prob: f64,
    jump_magnitude: f64,
}

impl PhaseProcess {
    /// Starts from a stationary draw for OU, from zero for the random walk.
    pub fn new<R: Rng + ?Sized>(params: &PhaseNoiseParams, dt_s: f64, rng: &mut R) -> Self {
        let (decay, sigma_step) = step_coefficients(params, dt_s);
        let phase = match params.process {
            PhaseProcessKind::OrnsteinUhlenbeck => params.std_rad * rng.sample::<f64, _>(StandardNormal),
            PhaseProcessKind::RandomWalk => 0.0,
        };
        PhaseProcess {
            phase,
            decay,
            sigma_step,
            jump_prob: (params.jump_rate_hz * dt_s).min(1.0),
            jump_magnitude: params.jump_magnitude_rad,
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn kick(&mut self, delta: f64) {
        self.phase += delta;
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.phase *= self.decay;
        if self.sigma_step > 0.0 {
            self.phase += self.sigma_step * rng.sample::<f64, _>(StandardNormal);
        }
        if self.jump_prob > 0.0 && rng.random::<f64>() < self.jump_prob {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            self.phase += sign * self.jump_magnitude;
        }
        self.phase
    }
}

/// `(decay, σ_step)` per step. OU: `e^{−2π·bw·dt}` and
/// `std·√(1 − e^{−4π·bw·dt})`, which keeps the stationary std at `std`.
/// Random walk: no decay and `std·√(4π·bw·dt)`, the OU short-time diffusion.
fn step_coefficients(params: &PhaseNoiseParams, dt_s: f64) -> (f64, f64) {
    let x = 2.0 * PI * params.bandwidth_hz * dt_s;
    match params.process {
        PhaseProcessKind::OrnsteinUhlenbeck => {
            (
                (-x).exp(),
                params.std_rad * (-(-2.0 * x).exp_m1()).sqrt(),
            )
        }
        PhaseProcessKind::RandomWalk => (1.0, params.std_rad * (2.0 * x).sqrt()),
    }
}

/// One step of the drift from `phase`.
pub fn phase_step<R: Rng + ?Sized>(
    phase: f64,
    dt_s: f64,
    params: &PhaseNoiseParams,
    rng: &mut R,
) -> f64 {
    let (decay, sigma) = step_coefficients(params, dt_s);
    let mut next = phase * decay;
    if sigma > 0.0 {
        next += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    let p = params.jump_rate_hz * dt_s;
    if p > 0.0 && rng.random::<f64>() < p {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        next += sign * params.jump_magnitude_rad;
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(0.25 + 4.0 * TAU) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pd_examples() {
        assert_eq!(pd_power(0.0, 1.0), 1.0);
        assert!(pd_power(PI, 1.0).abs() < 1e-15);
        assert!((pd_power(PI / 2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
