//! Experiments built on the detection cycles: Born-rule frequencies, basis
//! invariance of the total click count, `g²(0)` against its Chebyshev bound,
//! and threshold and brightness sweeps.
//!
//! All experiments derive their randomness from `ExperimentConfig::seed` via
//! the cycle substreams, so two experiments run from the same seed see the
//! same signal draws and the same Wiener increments cycle by cycle.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::detection::{
    empirical_probabilities, run_cycles, ClickLedger, CycleRecord, DetectionError, DetectorConfig, Probabilities,
    Proportion,
};
use crate::linalg::{
    cholesky_factor, conjugate_by_unitary, normalize_to_density, validate_covariance, ComplexMatrix,
    CovarianceOperator, DensityMatrix, LinalgError,
};
use crate::stats::{least_squares_slope, Z95};
use crate::wiener::{WienerConfig, WienerError};

/// Default grid: the smallest typical barrier `E_d / b_jj` spans this many steps.
pub const DEFAULT_STEPS_PER_BARRIER: f64 = 1000.0;
/// Default horizon in units of the largest typical barrier `E_d / b_jj`.
pub const DEFAULT_HORIZON_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Wiener(#[from] WienerError),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("channel {channel} has zero population; the g² bound is undefined")]
    ZeroDiagonal { channel: usize },
    #[error("channel {channel} never clicked; g² is undefined (P_ij = {p_pair})")]
    DegenerateChannel { channel: usize, p_pair: f64 },
    #[error("channel {index} out of range for dimension {dim}")]
    ChannelOutOfRange { index: usize, dim: usize },
}

impl From<crate::gaussian::GaussianError> for HarnessError {
    fn from(e: crate::gaussian::GaussianError) -> Self {
        HarnessError::InvalidConfig(e.to_string())
    }
}

/// Default `(dt, t_max)` for a covariance and the thresholds it will be run at:
/// `dt = min E_d / (1000 · max_j b_jj)` and `t_max = 100 · max E_d / min_j b_jj`
/// (minimum over channels with `b_jj > 0`).
pub fn default_grid(covariance: &CovarianceOperator, thresholds: &[f64]) -> Result<(f64, f64), HarnessError> {
    let lo = thresholds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = thresholds.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(HarnessError::InvalidConfig(
            "thresholds must be positive and finite".into(),
        ));
    }
    let diag: Vec<f64> = (0..covariance.dim()).map(|j| covariance.diag(j)).collect();
    let b_max = diag.iter().copied().fold(0.0, f64::max);
    let b_min = diag.iter().copied().filter(|&b| b > 0.0).fold(f64::INFINITY, f64::min);
    Ok((
        lo / (DEFAULT_STEPS_PER_BARRIER * b_max),
        DEFAULT_HORIZON_FACTOR * hi / b_min,
    ))
}

pub fn default_wiener_config(
    covariance: &CovarianceOperator,
    thresholds: &[f64],
) -> Result<WienerConfig, HarnessError> {
    let (dt, t_max) = default_grid(covariance, thresholds)?;
    Ok(WienerConfig::new(dt, t_max)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub covariance: CovarianceOperator,
    pub detector: DetectorConfig,
    pub n_cycles: u64,
    pub seed: u64,
    pub sweep: Option<Vec<f64>>,
    pub brightness: Option<Vec<f64>>,
    /// Channel pair used for coincidence statistics.
    pub pair: (usize, usize),
}

impl ExperimentConfig {
    pub fn new(
        covariance: CovarianceOperator,
        detector: DetectorConfig,
        n_cycles: u64,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let cfg = Self {
            covariance,
            detector,
            n_cycles,
            seed,
            sweep: None,
            brightness: None,
            pair: (0, 1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sweep(mut self, thresholds: Vec<f64>) -> Result<Self, HarnessError> {
        self.sweep = Some(thresholds);
        self.validate()?;
        Ok(self)
    }

    pub fn with_brightness(mut self, scales: Vec<f64>) -> Result<Self, HarnessError> {
        self.brightness = Some(scales);
        self.validate()?;
        Ok(self)
    }

    pub fn with_pair(mut self, i: usize, j: usize) -> Result<Self, HarnessError> {
        self.pair = (i, j);
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.n_cycles == 0 {
            return invalid("n_cycles must be at least 1".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return invalid("sweep list is empty".into());
            }
            if sweep.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
                return invalid("sweep thresholds must be positive and finite".into());
            }
            if sweep.windows(2).any(|w| w[1] <= w[0]) {
                return invalid("sweep thresholds must be strictly increasing".into());
            }
        }
        if let Some(scales) = &self.brightness {
            if scales.is_empty() || scales.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
                return invalid("brightness scales must be a non-empty list of positive numbers".into());
            }
        }
        let (i, j) = self.pair;
        let dim = self.dim();
        if self.dim() >= 2 {
            for index in [i, j] {
                if index >= dim {
                    return Err(HarnessError::ChannelOutOfRange { index, dim });
                }
            }
            if i == j {
                return invalid(format!("coincidence pair needs two distinct channels, got ({i}, {j})"));
            }
        }
        Ok(())
    }

    fn factor(&self) -> Result<ComplexMatrix, HarnessError> {
        Ok(cholesky_factor(&self.covariance)?)
    }

    fn run(
        &self,
        covariance: &CovarianceOperator,
        detector: &DetectorConfig,
        log: bool,
    ) -> Result<(ClickLedger, Option<Vec<CycleRecord>>), HarnessError> {
        let factor = cholesky_factor(covariance)?;
        Ok(run_cycles(&factor, detector, self.n_cycles, self.seed, log))
    }
}

fn check_pair(dim: usize, i: usize, j: usize) -> Result<(), HarnessError> {
    for index in [i, j] {
        if index >= dim {
            return Err(HarnessError::ChannelOutOfRange { index, dim });
        }
    }
    if i == j {
        return Err(HarnessError::InvalidConfig(format!(
            "pair ({i}, {j}) repeats a channel"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Born rule

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornChannel {
    pub empirical: Proportion,
    pub target: f64,
    pub covered: bool,
    /// `(N_i / S_i) / Σ_k (N_k / S_k)` with `S_i` the total time channel `i`
    /// spent waiting for its clicks (censored waits count as `t_max`).
    pub rate_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornReport {
    pub channels: Vec<BornChannel>,
    pub n_clicks: u64,
    pub censored_fraction: f64,
    pub censored_passages: u64,
    /// Channels whose Born target lies outside the empirical 95% interval.
    pub flagged: Vec<usize>,
    pub ledger: ClickLedger,
}

fn rate_normalized(ledger: &ClickLedger) -> Vec<f64> {
    let rates: Vec<f64> = ledger
        .clicks
        .iter()
        .zip(&ledger.wait_time)
        .map(|(&n, &s)| if s > 0.0 { n as f64 / s } else { 0.0 })
        .collect();
    let total: f64 = rates.iter().sum();
    rates
        .iter()
        .map(|r| if total > 0.0 { r / total } else { 0.0 })
        .collect()
}

/// Click frequencies `N_i / N` against the Born targets `ρ_ii`.
pub fn born_rule_experiment(cfg: &ExperimentConfig) -> Result<BornReport, HarnessError> {
    Ok(born_rule_experiment_logged(cfg, false)?.0)
}

pub fn born_rule_experiment_logged(
    cfg: &ExperimentConfig,
    log: bool,
) -> Result<(BornReport, Option<Vec<CycleRecord>>), HarnessError> {
    let (ledger, records) = cfg.run(&cfg.covariance, &cfg.detector, log)?;
    let probs = empirical_probabilities(&ledger)?;
    let rho = normalize_to_density(&cfg.covariance);
    let rates = rate_normalized(&ledger);
    let channels: Vec<BornChannel> = probs
        .channels
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let target = rho.population(i);
            BornChannel {
                empirical: *p,
                target,
                covered: p.covers(target),
                rate_normalized: rates[i],
            }
        })
        .collect();
    let flagged = channels
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.covered)
        .map(|(i, _)| i)
        .collect();
    let report = BornReport {
        channels,
        n_clicks: probs.n_clicks,
        censored_fraction: ledger.censored_fraction(),
        censored_passages: ledger.censored_passages,
        flagged,
        ledger,
    };
    Ok((report, records))
}

// ---------------------------------------------------------------------------
// Basis invariance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisInvarianceReport {
    pub clicks_original: Vec<u64>,
    pub clicks_rotated: Vec<u64>,
    pub n_original: u64,
    pub n_rotated: u64,
    /// `|N - N'| / N`.
    pub relative_difference: f64,
    /// Three binomial standard deviations of `N - N'`, relative to `N`.
    pub relative_band: f64,
    pub within_band: bool,
}

/// Runs `B` and `U B U^†` under the same seed and compares total click counts.
pub fn basis_invariance_experiment(
    cfg: &ExperimentConfig,
    u: &ComplexMatrix,
) -> Result<BasisInvarianceReport, HarnessError> {
    let rotated = conjugate_by_unitary(&cfg.covariance, u)?;
    let (a, _) = cfg.run(&cfg.covariance, &cfg.detector, false)?;
    let (b, _) = cfg.run(&rotated, &cfg.detector, false)?;
    let (n, n_rot) = (a.total_clicks(), b.total_clicks());
    if n == 0 {
        return Err(DetectionError::NoClicks.into());
    }
    // Each channel of each cycle is one Bernoulli trial (click or not).
    let trials = (cfg.dim() as u64 * cfg.n_cycles) as f64;
    let p = (n + n_rot) as f64 / (2.0 * trials);
    let sigma_diff = (2.0 * trials * p * (1.0 - p)).max(0.0).sqrt();
    let diff = n.abs_diff(n_rot) as f64;
    Ok(BasisInvarianceReport {
        clicks_original: a.clicks.clone(),
        clicks_rotated: b.clicks.clone(),
        n_original: n,
        n_rotated: n_rot,
        relative_difference: diff / n as f64,
        relative_band: 3.0 * sigma_diff / n as f64,
        within_band: diff <= 3.0 * sigma_diff,
    })
}

// ---------------------------------------------------------------------------
// Chebyshev bound

/// Which power of `Tr B` multiplies `E τ²` in the coincidence bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum BoundReading {
    /// `3 (Tr B)² E τ² / E_d² · (ρ_ii ρ_jj + |ρ_ij|²) = 3ε² (ρ_ii ρ_jj + |ρ_ij|²)`.
    #[default]
    Consistent,
    /// `3 Tr B · E τ² / E_d² · (ρ_ii ρ_jj + |ρ_ij|²)`, one power of the trace.
    SingleTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub trace_b: f64,
    /// Empirical `E τ²`, so `Δ = √(E τ²)` is the time scale between clicks.
    pub mean_tau_sq: f64,
    pub rho: DensityMatrix,
    pub threshold: f64,
}

impl BoundInputs {
    /// `ε = Δ · Tr B / E_d`.
    pub fn epsilon(&self) -> f64 {
        self.mean_tau_sq.sqrt() * self.trace_b / self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevBound {
    pub p12_bound: f64,
    pub g2_bound: f64,
    pub epsilon: f64,
}

/// `P_ij ≤ 3ε² (ρ_ii ρ_jj + |ρ_ij|²)` and `g² ≤ 3ε² (1 + |ρ_ij|² / (ρ_ii ρ_jj))`.
pub fn bound_from_epsilon(
    epsilon: f64,
    rho: &DensityMatrix,
    i: usize,
    j: usize,
) -> Result<ChebyshevBound, HarnessError> {
    check_pair(rho.dim(), i, j)?;
    let (rii, rjj) = (rho.population(i), rho.population(j));
    for (channel, r) in [(i, rii), (j, rjj)] {
        if !(r > 0.0) {
            return Err(HarnessError::ZeroDiagonal { channel });
        }
    }
    let off = rho.entry(i, j).norm_sqr();
    let e2 = 3.0 * epsilon * epsilon;
    Ok(ChebyshevBound {
        p12_bound: e2 * (rii * rjj + off),
        g2_bound: e2 * (1.0 + off / (rii * rjj)),
        epsilon,
    })
}

pub fn chebyshev_bound(inputs: &BoundInputs, i: usize, j: usize) -> Result<ChebyshevBound, HarnessError> {
    chebyshev_bound_with(inputs, i, j, BoundReading::Consistent)
}

pub fn chebyshev_bound_with(
    inputs: &BoundInputs,
    i: usize,
    j: usize,
    reading: BoundReading,
) -> Result<ChebyshevBound, HarnessError> {
    let finite = [inputs.trace_b, inputs.mean_tau_sq, inputs.threshold]
        .iter()
        .all(|x| x.is_finite());
    if !finite || !(inputs.trace_b > 0.0) || !(inputs.mean_tau_sq >= 0.0) || !(inputs.threshold > 0.0) {
        return Err(HarnessError::InvalidConfig(format!(
            "bound inputs out of range: {inputs:?}"
        )));
    }
    let consistent = bound_from_epsilon(inputs.epsilon(), &inputs.rho, i, j)?;
    Ok(match reading {
        BoundReading::Consistent => consistent,
        BoundReading::SingleTrace => {
            // Same expression with one factor of Tr B removed.
            ChebyshevBound {
                p12_bound: consistent.p12_bound / inputs.trace_b,
                g2_bound: consistent.g2_bound / inputs.trace_b,
                epsilon: consistent.epsilon,
            }
        }
    })
}

// ---------------------------------------------------------------------------
// g²(0)

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct G2Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_i: f64,
    pub p_j: f64,
    pub p_pair: f64,
}

/// `g² = P_ij / (P_i P_j)` with a delta-method 95% interval; with no
/// coincidences the upper limit uses three coincidences in place of zero.
pub fn g2_estimate(ledger: &ClickLedger, i: usize, j: usize) -> Result<G2Estimate, HarnessError> {
    check_pair(ledger.dim, i, j)?;
    let n = ledger.total_clicks();
    if n == 0 {
        return Err(DetectionError::NoClicks.into());
    }
    let nf = n as f64;
    let c = ledger.coincidence(i, j);
    let p_pair = c as f64 / nf;
    for channel in [i, j] {
        if ledger.clicks[channel] == 0 {
            return Err(HarnessError::DegenerateChannel { channel, p_pair });
        }
    }
    let (ni, nj) = (ledger.clicks[i] as f64, ledger.clicks[j] as f64);
    let (p_i, p_j) = (ni / nf, nj / nf);
    if c == 0 {
        return Ok(G2Estimate {
            value: 0.0,
            ci_low: 0.0,
            ci_high: (3.0 / nf) / (p_i * p_j),
            p_i,
            p_j,
            p_pair,
        });
    }
    let value = p_pair / (p_i * p_j);
    // Relative variance of a binomial proportion p from k successes: (1 - p) / k.
    let rel_var = (1.0 - p_pair) / c as f64 + (1.0 - p_i) / ni + (1.0 - p_j) / nj;
    let half = Z95 * value * rel_var.sqrt();
    Ok(G2Estimate {
        value,
        ci_low: (value - half).max(0.0),
        ci_high: value + half,
        p_i,
        p_j,
        p_pair,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Report {
    pub estimate: G2Estimate,
    pub bound: ChebyshevBound,
    pub mean_tau_sq: f64,
    pub pass: bool,
    pub probabilities: Probabilities,
    pub ledger: ClickLedger,
}

fn g2_from_ledger(
    ledger: ClickLedger,
    covariance: &CovarianceOperator,
    threshold: f64,
    (i, j): (usize, usize),
) -> Result<G2Report, HarnessError> {
    let probabilities = empirical_probabilities(&ledger)?;
    let estimate = g2_estimate(&ledger, i, j)?;
    let mean_tau_sq = ledger.mean_tau_sq().ok_or(DetectionError::NoClicks)?;
    let inputs = BoundInputs {
        trace_b: covariance.trace(),
        mean_tau_sq,
        rho: normalize_to_density(covariance),
        threshold,
    };
    let bound = chebyshev_bound(&inputs, i, j)?;
    let pass = estimate.ci_high <= bound.g2_bound || estimate.value <= bound.g2_bound;
    Ok(G2Report {
        estimate,
        bound,
        mean_tau_sq,
        pass,
        probabilities,
        ledger,
    })
}

/// Empirical `g²(0)` for `cfg.pair` and the bound built from the same run's `E τ²`.
pub fn g2_experiment(cfg: &ExperimentConfig) -> Result<G2Report, HarnessError> {
    Ok(g2_experiment_logged(cfg, false)?.0)
}

pub fn g2_experiment_logged(
    cfg: &ExperimentConfig,
    log: bool,
) -> Result<(G2Report, Option<Vec<CycleRecord>>), HarnessError> {
    check_pair(cfg.dim(), cfg.pair.0, cfg.pair.1)?;
    let (ledger, records) = cfg.run(&cfg.covariance, &cfg.detector, log)?;
    let report = g2_from_ledger(ledger, &cfg.covariance, cfg.detector.threshold(), cfg.pair)?;
    Ok((report, records))
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub probabilities: Vec<f64>,
    pub p_pair: f64,
    pub g2: f64,
    pub g2_ci_low: f64,
    pub g2_ci_high: f64,
    pub epsilon: f64,
    pub g2_bound: f64,
    pub censored_fraction: f64,
    pub n_clicks: u64,
    pub n_cycles: u64,
    pub mean_tau_sq: f64,
    /// Number of non-censored passages behind `mean_tau_sq`.
    pub tau_samples: u64,
    pub pass: bool,
}

impl SweepRow {
    pub fn from_report(threshold: f64, r: &G2Report) -> Self {
        Self {
            threshold,
            probabilities: r.probabilities.channels.iter().map(|p| p.value).collect(),
            p_pair: r.estimate.p_pair,
            g2: r.estimate.value,
            g2_ci_low: r.estimate.ci_low,
            g2_ci_high: r.estimate.ci_high,
            epsilon: r.bound.epsilon,
            g2_bound: r.bound.g2_bound,
            censored_fraction: r.ledger.censored_fraction(),
            n_clicks: r.ledger.total_clicks(),
            n_cycles: r.ledger.total_cycles,
            mean_tau_sq: r.mean_tau_sq,
            tau_samples: r.ledger.tau_sq.n,
            pass: r.pass,
        }
    }

    /// The row's table fields in column order (see [`table_header`]).
    pub fn table_fields(&self) -> Vec<String> {
        let mut f = vec![self.threshold.to_string()];
        f.extend(self.probabilities.iter().map(|p| p.to_string()));
        f.extend(
            [
                self.p_pair,
                self.g2,
                self.g2_ci_low,
                self.g2_ci_high,
                self.epsilon,
                self.g2_bound,
                self.censored_fraction,
            ]
            .iter()
            .map(|x| x.to_string()),
        );
        f.push(self.n_clicks.to_string());
        f.push(self.n_cycles.to_string());
        f
    }
}

/// Column names: `E_d, P_1..P_m, P_12, g2, g2_ci_low, g2_ci_high, epsilon,
/// g2_bound, censored_fraction, n_clicks, n_cycles`. Channels are numbered
/// from one in the header; `P_12` is the configured pair.
pub fn table_header(dim: usize) -> Vec<String> {
    let mut h = vec!["E_d".to_string()];
    h.extend((1..=dim).map(|k| format!("P_{k}")));
    h.extend(
        [
            "P_12",
            "g2",
            "g2_ci_low",
            "g2_ci_high",
            "epsilon",
            "g2_bound",
            "censored_fraction",
            "n_clicks",
            "n_cycles",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub dim: usize,
    pub pair: (usize, usize),
    pub trace_b: f64,
    pub rho: DensityMatrix,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln g²` on `ln E_d` over rows with `g² > 0`.
    pub slope: Option<f64>,
    /// `E τ²` pooled over all rows' non-censored passages.
    pub pooled_mean_tau_sq: f64,
}

impl SweepResult {
    /// `g²` bound per row with `E τ²` held at the pooled estimate.
    pub fn pooled_bounds(&self) -> Result<Vec<f64>, HarnessError> {
        let (i, j) = self.pair;
        self.rows
            .iter()
            .map(|row| {
                let eps = self.pooled_mean_tau_sq.sqrt() * self.trace_b / row.threshold;
                Ok(bound_from_epsilon(eps, &self.rho, i, j)?.g2_bound)
            })
            .collect()
    }

    /// Comma-separated table with a header line.
    pub fn to_table(&self) -> String {
        let mut out = table_header(self.dim).join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.table_fields().join(","));
        }
        out
    }
}

fn assemble_sweep(cfg: &ExperimentConfig, covariance: &CovarianceOperator, rows: Vec<SweepRow>) -> SweepResult {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.g2 > 0.0)
        .map(|r| (r.threshold.ln(), r.g2.ln()))
        .collect();
    let (n, sum) = rows.iter().fold((0u64, 0.0), |(n, s), r| {
        (n + r.tau_samples, s + r.mean_tau_sq * r.tau_samples as f64)
    });
    SweepResult {
        dim: cfg.dim(),
        pair: cfg.pair,
        trace_b: covariance.trace(),
        rho: normalize_to_density(covariance),
        rows,
        slope: least_squares_slope(&points),
        pooled_mean_tau_sq: if n > 0 { sum / n as f64 } else { 0.0 },
    }
}

/// One `g²` experiment per threshold in `cfg.sweep`, all from the same seed
/// and the same time grid, so rows differ only in the threshold.
pub fn threshold_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    let thresholds = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::InvalidConfig("threshold sweep needs a sweep list".into()))?;
    check_pair(cfg.dim(), cfg.pair.0, cfg.pair.1)?;
    let factor = cfg.factor()?;
    let mut rows = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let detector = cfg.detector.with_threshold(threshold)?;
        let (ledger, _) = run_cycles(&factor, &detector, cfg.n_cycles, cfg.seed, false);
        let report = g2_from_ledger(ledger, &cfg.covariance, threshold, cfg.pair)?;
        rows.push(SweepRow::from_report(threshold, &report));
    }
    Ok(assemble_sweep(cfg, &cfg.covariance, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrightnessRow {
    pub scale: f64,
    pub row: SweepRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrightnessResult {
    pub dim: usize,
    pub rows: Vec<BrightnessRow>,
}

impl BrightnessResult {
    pub fn to_table(&self) -> String {
        let mut header = vec!["scale".to_string()];
        header.extend(table_header(self.dim));
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", r.scale, r.row.table_fields().join(","));
        }
        out
    }
}

/// `g²` experiments with `B ← c·B` at a fixed threshold and time grid.
pub fn brightness_sweep(cfg: &ExperimentConfig, scales: &[f64]) -> Result<BrightnessResult, HarnessError> {
    if scales.is_empty() || scales.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(HarnessError::InvalidConfig("brightness scales must be positive".into()));
    }
    check_pair(cfg.dim(), cfg.pair.0, cfg.pair.1)?;
    let threshold = cfg.detector.threshold();
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let covariance = validate_covariance(&cfg.covariance.matrix().scale(scale))?;
        let (ledger, _) = cfg.run(&covariance, &cfg.detector, false)?;
        let report = g2_from_ledger(ledger, &covariance, threshold, cfg.pair)?;
        rows.push(BrightnessRow {
            scale,
            row: SweepRow::from_report(threshold, &report),
        });
    }
    Ok(BrightnessResult { dim: cfg.dim(), rows })
}
