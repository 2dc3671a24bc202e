//! Discretized Wiener paths and first passage of the channel energies
//! `w(t)² |φ_j|²` through the detection threshold.
//!
//! A single scalar path drives every channel of a signal. Crossings are
//! detected on the time grid `k·dt` without bridge correction, so reported
//! passage times carry an `O(√dt)` overshoot bias.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::gaussian::SignalVector;
use crate::par::map_blocks;
use crate::rng::{substream, Domain};
use crate::stats::{Estimate, MomentSums};

pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WienerError {
    #[error("time step must be finite and positive, got {0}")]
    InvalidStep(f64),
    #[error("horizon t_max = {t_max} must be finite and at least dt = {dt}")]
    InvalidHorizon { dt: f64, t_max: f64 },
    #[error("horizon needs {steps} steps, over the budget of {budget}")]
    StepBudgetExceeded { steps: u64, budget: u64 },
    #[error("detection threshold must be positive, got {0}")]
    ThresholdNonpositive(f64),
    #[error("time {time} is not a positive multiple of dt = {dt}")]
    NotOnGrid { time: f64, dt: f64 },
}

/// Time step and censoring horizon for one detection cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WienerConfig {
    dt: f64,
    t_max: f64,
    max_steps: u64,
}

impl WienerConfig {
    pub fn new(dt: f64, t_max: f64) -> Result<Self, WienerError> {
        Self::with_budget(dt, t_max, DEFAULT_STEP_BUDGET)
    }

    pub fn with_budget(dt: f64, t_max: f64, budget: u64) -> Result<Self, WienerError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(WienerError::InvalidStep(dt));
        }
        if !(t_max >= dt) || !t_max.is_finite() {
            return Err(WienerError::InvalidHorizon { dt, t_max });
        }
        let mut steps = (t_max / dt).floor() as u64;
        while (steps + 1) as f64 * dt <= t_max {
            steps += 1;
        }
        while steps > 1 && steps as f64 * dt > t_max {
            steps -= 1;
        }
        if steps > budget {
            return Err(WienerError::StepBudgetExceeded { steps, budget });
        }
        Ok(Self {
            dt,
            t_max,
            max_steps: steps,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Number of grid points `k·dt` in `(0, t_max]`.
    pub fn max_steps(&self) -> u64 {
        self.max_steps
    }

    /// Grid index of `time`, if it is a positive multiple of `dt`.
    pub fn steps_for(&self, time: f64) -> Result<u64, WienerError> {
        let k = (time / self.dt).round();
        if !(k >= 1.0) || (k * self.dt - time).abs() > 1e-9 * time.abs().max(self.dt) {
            return Err(WienerError::NotOnGrid { time, dt: self.dt });
        }
        Ok(k as u64)
    }
}

/// Euler increment `w + √dt · N(0, 1)`.
#[inline]
pub fn step_path<R: Rng + ?Sized>(w: f64, dt: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    w + dt.sqrt() * z
}

/// Per-channel first-passage steps of one shared path. `None` means the
/// channel did not reach the threshold by `t_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstPassageResult {
    pub dt: f64,
    pub steps: Vec<Option<u64>>,
    /// Path value at each channel's passage step.
    pub w_at_tau: Vec<Option<f64>>,
}

impl FirstPassageResult {
    pub fn tau(&self, channel: usize) -> Option<f64> {
        self.steps[channel].map(|k| k as f64 * self.dt)
    }

    pub fn is_censored(&self, channel: usize) -> bool {
        self.steps[channel].is_none()
    }
}

/// Runs one path until every channel with nonzero energy has crossed
/// `w² · energy ≥ threshold`, or until the horizon.
///
/// Channels are visited in order of decreasing energy, so each step compares
/// against a single pending barrier.
pub(crate) fn first_passage_energies<R: Rng + ?Sized>(
    energies: &[f64],
    threshold: f64,
    cfg: &WienerConfig,
    rng: &mut R,
) -> FirstPassageResult {
    let m = energies.len();
    let mut order: Vec<usize> = (0..m).filter(|&j| energies[j] > 0.0).collect();
    order.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]).then(a.cmp(&b)));

    let mut steps = vec![None; m];
    let mut w_at_tau = vec![None; m];
    let sqrt_dt = cfg.dt.sqrt();
    let mut w = 0.0f64;
    let mut next = 0;
    let mut step = 0u64;
    while next < order.len() && step < cfg.max_steps {
        let z: f64 = rng.sample(StandardNormal);
        w += sqrt_dt * z;
        step += 1;
        let w2 = w * w;
        while next < order.len() && w2 * energies[order[next]] >= threshold {
            steps[order[next]] = Some(step);
            w_at_tau[order[next]] = Some(w);
            next += 1;
        }
    }
    FirstPassageResult {
        dt: cfg.dt,
        steps,
        w_at_tau,
    }
}

/// First grid time at which each channel energy `w(t)² |φ_j|²` reaches `threshold`.
pub fn first_passage_all_channels<R: Rng + ?Sized>(
    phi: &SignalVector,
    threshold: f64,
    cfg: &WienerConfig,
    rng: &mut R,
) -> Result<FirstPassageResult, WienerError> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(WienerError::ThresholdNonpositive(threshold));
    }
    Ok(first_passage_energies(&phi.energies(), threshold, cfg, rng))
}

const PATH_BLOCK: u64 = 256;

/// Empirical `E w(τ)²` and `E w(τ)⁴` over `n_paths` independent paths.
pub fn wiener_moment_check(
    tau: f64,
    n_paths: u64,
    cfg: &WienerConfig,
    seed: u64,
) -> Result<(Estimate, Estimate), WienerError> {
    let steps = cfg.steps_for(tau)?;
    let sqrt_dt = cfg.dt.sqrt();
    let blocks = map_blocks(n_paths, PATH_BLOCK, |range| {
        let mut sums = (MomentSums::default(), MomentSums::default());
        for path in range {
            let mut rng = substream(seed, Domain::WienerPaths, path);
            let mut w = 0.0f64;
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                w += sqrt_dt * z;
            }
            let w2 = w * w;
            sums.0.push(w2);
            sums.1.push(w2 * w2);
        }
        sums
    });
    let mut second = MomentSums::default();
    let mut fourth = MomentSums::default();
    for (s2, s4) in &blocks {
        second.merge(s2);
        fourth.merge(s4);
    }
    Ok((second.estimate(), fourth.estimate()))
}

/// Mean first exit time of `|w|` through `barrier`, from non-censored paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitTimeEstimate {
    pub mean_time: Estimate,
    pub censored: u64,
}

pub fn mean_exit_time(
    barrier: f64,
    n_paths: u64,
    cfg: &WienerConfig,
    seed: u64,
) -> Result<ExitTimeEstimate, WienerError> {
    if !(barrier > 0.0) || !barrier.is_finite() {
        return Err(WienerError::ThresholdNonpositive(barrier));
    }
    let threshold = barrier * barrier;
    let blocks = map_blocks(n_paths, PATH_BLOCK, |range| {
        let mut sums = MomentSums::default();
        let mut censored = 0u64;
        for path in range {
            let mut rng = substream(seed, Domain::WienerPaths, path);
            match first_passage_energies(&[1.0], threshold, cfg, &mut rng).tau(0) {
                Some(t) => sums.push(t),
                None => censored += 1,
            }
        }
        (sums, censored)
    });
    let mut total = MomentSums::default();
    let mut censored = 0;
    for (s, c) in &blocks {
        total.merge(s);
        censored += c;
    }
    Ok(ExitTimeEstimate {
        mean_time: total.estimate(),
        censored,
    })
}
