//! Renewal-cycle threshold detection.
//!
//! Each cycle draws a fresh signal vector `φ` and a fresh Wiener path, runs
//! every channel detector against the common threshold, and records which
//! channels clicked and which pairs clicked together. Detectors reset between
//! cycles. Cycle `k` always uses random substream `k`, so ledgers depend only
//! on the seed and are paired across experiments that share it.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::gaussian::sample_signal_into;
use crate::linalg::ComplexMatrix;
use crate::par::map_blocks;
use crate::rng::{substream, Domain, Stream};
use crate::stats::{wilson_interval, MomentSums, Z95};
use crate::wiener::{first_passage_energies, FirstPassageResult, WienerConfig, WienerError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("detection threshold must be positive, got {0}")]
    ThresholdNonpositive(f64),
    #[error("coincidence window {window} is not a non-negative multiple of dt = {dt}")]
    InvalidWindow { window: f64, dt: f64 },
    #[error("no clicks recorded; probabilities are undefined")]
    NoClicks,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Wiener(#[from] WienerError),
}

/// Threshold, coincidence window and path discretization shared by all detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorConfig {
    threshold: f64,
    coincidence_window: f64,
    window_steps: u64,
    wiener: WienerConfig,
}

impl DetectorConfig {
    pub fn new(threshold: f64, coincidence_window: f64, wiener: WienerConfig) -> Result<Self, DetectionError> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(DetectionError::ThresholdNonpositive(threshold));
        }
        let dt = wiener.dt();
        let invalid = DetectionError::InvalidWindow {
            window: coincidence_window,
            dt,
        };
        if !(coincidence_window >= 0.0) || !coincidence_window.is_finite() {
            return Err(invalid);
        }
        let k = (coincidence_window / dt).round();
        if (k * dt - coincidence_window).abs() > 1e-9 * dt {
            return Err(invalid);
        }
        Ok(Self {
            threshold,
            coincidence_window,
            window_steps: k as u64,
            wiener,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn coincidence_window(&self) -> f64 {
        self.coincidence_window
    }

    pub fn window_steps(&self) -> u64 {
        self.window_steps
    }

    pub fn wiener(&self) -> &WienerConfig {
        &self.wiener
    }

    /// Same window and discretization with a different threshold.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self, DetectionError> {
        Self::new(threshold, self.coincidence_window, self.wiener)
    }
}

/// Result of one emission/detection cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleOutcome {
    pub passages: FirstPassageResult,
    pub clicked: Vec<usize>,
    /// Pairs `(i, j)`, `i < j`, whose passage steps differ by at most the window.
    pub coincidences: Vec<(usize, usize)>,
    /// Channels with nonzero signal energy that reached the horizon without a click.
    pub censored_live: Vec<usize>,
    pub duration: f64,
    pub horizon: f64,
}

impl CycleOutcome {
    fn from_passages(passages: FirstPassageResult, energies: &[f64], cfg: &DetectorConfig) -> Self {
        let m = passages.steps.len();
        let clicked: Vec<usize> = (0..m).filter(|&j| passages.steps[j].is_some()).collect();
        let censored_live = (0..m)
            .filter(|&j| passages.steps[j].is_none() && energies[j] > 0.0)
            .collect();
        let mut coincidences = Vec::new();
        for (a, &i) in clicked.iter().enumerate() {
            for &j in &clicked[a + 1..] {
                let (si, sj) = (passages.steps[i].unwrap(), passages.steps[j].unwrap());
                if si.abs_diff(sj) <= cfg.window_steps {
                    coincidences.push((i, j));
                }
            }
        }
        let duration = match clicked.iter().filter_map(|&j| passages.steps[j]).max() {
            Some(k) => k as f64 * passages.dt,
            None => cfg.wiener.t_max(),
        };
        Self {
            passages,
            clicked,
            coincidences,
            censored_live,
            duration,
            horizon: cfg.wiener.t_max(),
        }
    }
}

/// One cycle: draw `φ = L z`, then run the shared path against every channel.
pub fn run_cycle(factor: &ComplexMatrix, cfg: &DetectorConfig, rng: &mut Stream) -> CycleOutcome {
    let m = factor.dim();
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    let mut phi = vec![Complex64::new(0.0, 0.0); m];
    sample_signal_into(factor, rng, &mut z, &mut phi);
    let energies: Vec<f64> = phi.iter().map(|p| p.norm_sqr()).collect();
    let passages = first_passage_energies(&energies, cfg.threshold, &cfg.wiener, rng);
    CycleOutcome::from_passages(passages, &energies, cfg)
}

fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

/// Click and coincidence counts accumulated over cycles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClickLedger {
    pub dim: usize,
    pub clicks: Vec<u64>,
    /// Upper-triangular pair counts; see [`ClickLedger::coincidence`].
    pub coincidences: Vec<u64>,
    pub total_cycles: u64,
    /// Cycles in which no channel clicked.
    pub censored_cycles: u64,
    /// Channel passages with nonzero energy cut off by the horizon.
    pub censored_passages: u64,
    pub total_observation_time: f64,
    /// Per channel: summed passage times, with `t_max` for censored live passages.
    pub wait_time: Vec<f64>,
    /// Pooled over all non-censored passages: `n`, `Σ τ²`, `Σ τ⁴`.
    pub tau_sq: MomentSums,
}

impl ClickLedger {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            clicks: vec![0; dim],
            coincidences: vec![0; dim * dim.saturating_sub(1) / 2],
            total_cycles: 0,
            censored_cycles: 0,
            censored_passages: 0,
            total_observation_time: 0.0,
            wait_time: vec![0.0; dim],
            tau_sq: MomentSums::default(),
        }
    }

    pub fn total_clicks(&self) -> u64 {
        self.clicks.iter().sum()
    }

    pub fn coincidence(&self, i: usize, j: usize) -> u64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.coincidences[pair_index(self.dim, i, j)]
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            self.censored_cycles as f64 / self.total_cycles as f64
        }
    }

    /// Empirical `E τ²` over non-censored passages (the time scale `Δ²`).
    pub fn mean_tau_sq(&self) -> Option<f64> {
        (self.tau_sq.n > 0).then(|| self.tau_sq.sum / self.tau_sq.n as f64)
    }

    pub fn accumulate(&mut self, outcome: &CycleOutcome) -> Result<(), DetectionError> {
        if outcome.passages.steps.len() != self.dim {
            return Err(DetectionError::DimensionMismatch {
                expected: self.dim,
                found: outcome.passages.steps.len(),
            });
        }
        for &j in &outcome.clicked {
            self.clicks[j] += 1;
            let t = outcome.passages.tau(j).expect("clicked channel has a passage time");
            self.tau_sq.push(t * t);
            self.wait_time[j] += t;
        }
        for &j in &outcome.censored_live {
            self.wait_time[j] += outcome.horizon;
        }
        for &(i, j) in &outcome.coincidences {
            self.coincidences[pair_index(self.dim, i, j)] += 1;
        }
        self.total_cycles += 1;
        if outcome.clicked.is_empty() {
            self.censored_cycles += 1;
        }
        self.censored_passages += outcome.censored_live.len() as u64;
        self.total_observation_time += outcome.duration;
        Ok(())
    }

    /// Adds another ledger's counts. Integer counts commute; the float sums are
    /// only reproducible when merges happen in a fixed order.
    pub fn merge(&mut self, other: &Self) -> Result<(), DetectionError> {
        if other.dim != self.dim {
            return Err(DetectionError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        for (a, b) in self.clicks.iter_mut().zip(&other.clicks) {
            *a += b;
        }
        for (a, b) in self.coincidences.iter_mut().zip(&other.coincidences) {
            *a += b;
        }
        self.total_cycles += other.total_cycles;
        self.censored_cycles += other.censored_cycles;
        self.censored_passages += other.censored_passages;
        self.total_observation_time += other.total_observation_time;
        for (a, b) in self.wait_time.iter_mut().zip(&other.wait_time) {
            *a += b;
        }
        self.tau_sq.merge(&other.tau_sq);
        Ok(())
    }
}

/// One line of the optional per-cycle event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: u64,
    /// Passage time per channel; `null` when censored.
    pub tau: Vec<Option<f64>>,
    pub coincidences: Vec<[usize; 2]>,
}

impl CycleRecord {
    fn new(cycle: u64, outcome: &CycleOutcome) -> Self {
        Self {
            cycle,
            tau: (0..outcome.passages.steps.len())
                .map(|j| outcome.passages.tau(j))
                .collect(),
            coincidences: outcome.coincidences.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

/// Writes records as JSON lines.
pub fn write_event_log<W: Write>(records: &[CycleRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

const CYCLE_BLOCK: u64 = 512;

/// Runs cycles `0..n_cycles` in parallel and merges them in cycle order.
///
/// When `log` is set the per-cycle records are returned as well.
pub fn run_cycles(
    factor: &ComplexMatrix,
    cfg: &DetectorConfig,
    n_cycles: u64,
    seed: u64,
    log: bool,
) -> (ClickLedger, Option<Vec<CycleRecord>>) {
    let m = factor.dim();
    let blocks = map_blocks(n_cycles, CYCLE_BLOCK, |range| {
        let mut ledger = ClickLedger::new(m);
        let mut records = Vec::new();
        for cycle in range {
            let mut rng = substream(seed, Domain::Cycles, cycle);
            let outcome = run_cycle(factor, cfg, &mut rng);
            ledger.accumulate(&outcome).expect("dimension matches factor");
            if log {
                records.push(CycleRecord::new(cycle, &outcome));
            }
        }
        (ledger, records)
    });
    let mut ledger = ClickLedger::new(m);
    let mut records = log.then(Vec::new);
    for (block, recs) in blocks {
        ledger.merge(&block).expect("same dimension");
        if let Some(all) = records.as_mut() {
            all.extend(recs);
        }
    }
    (ledger, records)
}

/// Point estimate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Proportion {
    fn new(count: u64, total: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(count, total, Z95);
        Self {
            value: count as f64 / total as f64,
            ci_low,
            ci_high,
        }
    }

    pub fn covers(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probabilities {
    pub n_clicks: u64,
    pub channels: Vec<Proportion>,
    /// `(i, j, P_ij)` for every pair `i < j`.
    pub pairs: Vec<(usize, usize, Proportion)>,
}

impl Probabilities {
    pub fn pair(&self, i: usize, j: usize) -> Option<&Proportion> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().find(|p| p.0 == i && p.1 == j).map(|p| &p.2)
    }
}

/// `P_i = N_i / N` and `P_ij = C_ij / N` with `N = Σ N_i`.
pub fn empirical_probabilities(ledger: &ClickLedger) -> Result<Probabilities, DetectionError> {
    let n = ledger.total_clicks();
    if n == 0 {
        return Err(DetectionError::NoClicks);
    }
    let channels = ledger.clicks.iter().map(|&k| Proportion::new(k, n)).collect();
    let mut pairs = Vec::new();
    for i in 0..ledger.dim {
        for j in (i + 1)..ledger.dim {
            pairs.push((i, j, Proportion::new(ledger.coincidence(i, j), n)));
        }
    }
    Ok(Probabilities {
        n_clicks: n,
        channels,
        pairs,
    })
}
