//! Phase-locked loop holding the interferometer at its setpoint.

use serde::{Deserialize, Serialize};

use pathlink_core::rng::{rng_from_seed, SimRng};

use crate::config::{PhaseNoiseParams, PllParams};
use crate::phase::{pd_power, wrap_phase, PhaseProcess};
use crate::LinkError;

/// A phase jump forced at a given time, on top of the random process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectedJump {
    pub time_s: f64,
    pub delta_rad: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Tracking,
    /// Sweeping the stretcher in `dir` until the fringe crosses the setpoint
    /// on the stabilizing slope.
    Scanning { dir: i8 },
}

/// Velocity-form PID on the linearized photodiode error, with a filtered
/// lock detector and fringe-scan reacquisition.
#[derive(Clone, Debug)]
pub struct Controller {
    params: PllParams,
    dt: f64,
    /// Fringe offset placing the setpoint at zero residual.
    bias: f64,
    /// `d(pd)/dφ` at the lock point; negative.
    slope: f64,
    correction: f64,
    e1: f64,
    e2: f64,
    ema: f64,
    ema_alpha: f64,
    last_pd_error: f64,
    locked: bool,
    mode: Mode,
}

impl Controller {
    pub fn new(params: &PllParams) -> Self {
        let v = params.fringe_visibility;
        let bias = ((2.0 * params.setpoint_fraction - 1.0) / v).acos();
        let dt = params.dt();
        let ema_alpha = if params.lock_filter_s > 0.0 {
            dt / (params.lock_filter_s + dt)
        } else {
            1.0
        };
        Controller {
            params: params.clone(),
            dt,
            bias,
            slope: -v * bias.sin() / 2.0,
            correction: 0.0,
            e1: 0.0,
            e2: 0.0,
            ema: 0.0,
            ema_alpha,
            last_pd_error: 0.0,
            locked: true,
            mode: Mode::Tracking,
        }
    }

    pub fn correction(&self) -> f64 {
        self.correction
    }

    pub fn locked(&self) -> bool {
        self.locked
    }

    /// Photodiode reading for a given residual.
    pub fn pd_reading(&self, residual: f64) -> f64 {
        pd_power(residual + self.bias, self.params.fringe_visibility)
    }

    /// Consumes one photodiode sample and moves the stretcher.
    pub fn update(&mut self, pd: f64) {
        let p = &self.params;
        let pd_error = pd - p.setpoint_fraction;
        self.ema += self.ema_alpha * (pd_error.abs() - self.ema);
        let open = p.is_open_loop();
        match self.mode {
            Mode::Tracking => {
                if !open {
                    let e = pd_error / self.slope;
                    self.correction += p.kp * (e - self.e1)
                        + p.ki * self.dt * e
                        + p.kd / self.dt * (e - 2.0 * self.e1 + self.e2);
                    self.e2 = self.e1;
                    self.e1 = e;
                }
                let just_unlocked = self.locked && self.ema > p.unlock_threshold;
                if just_unlocked {
                    self.locked = false;
                } else if !self.locked && self.ema < p.unlock_threshold / 2.0 {
                    self.locked = true;
                }
                let saturated = self.correction.abs() >= p.actuator_range_rad;
                self.correction = self
                    .correction
                    .clamp(-p.actuator_range_rad, p.actuator_range_rad);
                if !open && (just_unlocked || saturated) {
                    self.locked = false;
                    let dir = if self.correction > 0.0 { -1 } else { 1 };
                    self.mode = Mode::Scanning { dir };
                }
            }
            Mode::Scanning { dir } => {
                self.locked = false;
                self.correction += dir as f64 * p.scan_rate_rad_per_s * self.dt;
                // Near the lock point pd − s ≈ slope·r with slope < 0, and
                // raising the correction lowers r.
                let crossed = if dir > 0 {
                    self.last_pd_error < 0.0 && pd_error >= 0.0
                } else {
                    self.last_pd_error > 0.0 && pd_error <= 0.0
                };
                if crossed {
                    let e = pd_error / self.slope;
                    self.e1 = e;
                    self.e2 = e;
                    self.mode = Mode::Tracking;
                }
            }
        }
        self.last_pd_error = pd_error;
    }
}

/// Closed-loop drift and stabilization, one controller tick at a time.
#[derive(Clone, Debug)]
pub struct PhaseLoop {
    process: PhaseProcess,
    controller: Controller,
    dt: f64,
    tick: u64,
    injected: Vec<InjectedJump>,
    next_injected: usize,
}

/// State after one tick, before the controller acts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopSample {
    pub time_s: f64,
    pub true_phase_rad: f64,
    pub correction_rad: f64,
    pub residual_rad: f64,
    pub pd_power_norm: f64,
    pub locked: bool,
}

impl PhaseLoop {
    pub fn new(
        noise: &PhaseNoiseParams,
        pll: &PllParams,
        rng: &mut SimRng,
        injected: &[InjectedJump],
    ) -> Result<Self, LinkError> {
        noise.validate()?;
        pll.validate(noise)?;
        let dt = pll.dt();
        let mut injected = injected.to_vec();
        injected.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        Ok(PhaseLoop {
            process: PhaseProcess::new(noise, dt, rng),
            controller: Controller::new(pll),
            dt,
            tick: 0,
            injected,
            next_injected: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances the drift by one tick, reads the photodiode and lets the
    /// controller respond. The returned residual is the one seen during the
    /// tick, before the new correction.
    pub fn step(&mut self, rng: &mut SimRng) -> LoopSample {
        self.tick += 1;
        let t = self.tick as f64 * self.dt;
        self.process.step(rng);
        while let Some(j) = self.injected.get(self.next_injected) {
            if j.time_s > t {
                break;
            }
            self.process.kick(j.delta_rad);
            self.next_injected += 1;
        }
        let phi = self.process.phase();
        let correction = self.controller.correction();
        let residual = wrap_phase(phi - correction);
        let pd = self.controller.pd_reading(residual);
        let sample = LoopSample {
            time_s: t,
            true_phase_rad: phi,
            correction_rad: correction,
            residual_rad: residual,
            pd_power_norm: pd,
            locked: self.controller.locked(),
        };
        self.controller.update(pd);
        sample
    }
}

/// Time series of the stabilization loop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub time_s: Vec<f64>,
    pub true_phase_rad: Vec<f64>,
    pub correction_rad: Vec<f64>,
    pub residual_rad: Vec<f64>,
    pub pd_power_norm: Vec<f64>,
    pub locked: Vec<bool>,
}

impl PhaseTrace {
    pub fn push(&mut self, s: &LoopSample) {
        self.time_s.push(s.time_s);
        self.true_phase_rad.push(s.true_phase_rad);
        self.correction_rad.push(s.correction_rad);
        self.residual_rad.push(s.residual_rad);
        self.pd_power_norm.push(s.pd_power_norm);
        self.locked.push(s.locked);
    }

    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn summary(&self) -> PhaseSummary {
        let mut acc = PhaseStats::default();
        for (r, l) in self.residual_rad.iter().zip(&self.locked) {
            acc.add(*r, *l);
        }
        acc.summary()
    }

    /// Delimited text export; `header` lines are written as `# ` comments.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "t_s,true_phase,correction,residual,pd_power,locked")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                self.time_s[i],
                self.true_phase_rad[i],
                self.correction_rad[i],
                self.residual_rad[i],
                self.pd_power_norm[i],
                self.locked[i] as u8
            )?;
        }
        Ok(())
    }
}

/// Residual statistics accumulated tick by tick.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseStats {
    ticks: u64,
    unlocked: u64,
    sum_sq_all: f64,
    sum_cos_all: f64,
    locked_n: u64,
    locked_sum: f64,
    locked_sum_sq: f64,
}

impl PhaseStats {
    pub fn add(&mut self, residual: f64, locked: bool) {
        self.ticks += 1;
        self.sum_sq_all += residual * residual;
        self.sum_cos_all += residual.cos();
        if locked {
            self.locked_n += 1;
            self.locked_sum += residual;
            self.locked_sum_sq += residual * residual;
        } else {
            self.unlocked += 1;
        }
    }

    pub fn summary(&self) -> PhaseSummary {
        let n = self.ticks.max(1) as f64;
        let ln = self.locked_n as f64;
        let locked_std = if self.locked_n > 1 {
            let mean = self.locked_sum / ln;
            ((self.locked_sum_sq - ln * mean * mean).max(0.0) / (ln - 1.0)).sqrt()
        } else {
            0.0
        };
        PhaseSummary {
            ticks: self.ticks,
            unlocked_fraction: self.unlocked as f64 / n,
            residual_rms_rad: (self.sum_sq_all / n).sqrt(),
            locked_residual_std_rad: locked_std,
            mean_cos_residual: self.sum_cos_all / n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub ticks: u64,
    pub unlocked_fraction: f64,
    pub residual_rms_rad: f64,
    pub locked_residual_std_rad: f64,
    /// Average of `cos(residual)`: the coherence left after phase noise.
    pub mean_cos_residual: f64,
}

/// Runs the loop for `duration_s` and records every tick.
pub fn pll_run(
    noise: &PhaseNoiseParams,
    pll: &PllParams,
    duration_s: f64,
    seed: u64,
) -> Result<PhaseTrace, LinkError> {
    pll_run_with_jumps(noise, pll, duration_s, seed, &[])
}

pub fn pll_run_with_jumps(
    noise: &PhaseNoiseParams,
    pll: &PllParams,
    duration_s: f64,
    seed: u64,
    injected: &[InjectedJump],
) -> Result<PhaseTrace, LinkError> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(LinkError::Config {
            field: "duration_s".into(),
            message: "must be positive".into(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut lp = PhaseLoop::new(noise, pll, &mut rng, injected)?;
    let ticks = (duration_s / lp.dt()).round() as u64;
    let mut trace = PhaseTrace::default();
    for _ in 0..ticks {
        let s = lp.step(&mut rng);
        trace.push(&s);
    }
    Ok(trace)
}
