//! TOML experiment configuration.
//!
//! ```toml
//! [covariance]
//! # row-major [re, im] pairs; the dimension is inferred
//! entries = [[1.0, 0.0], [0.0, 0.0],
//!            [0.0, 0.0], [1.0, 0.0]]
//!
//! [detector]
//! threshold = 10.0          # E_d
//! coincidence_window = 0.0  # optional, multiple of dt
//! dt = 0.01                 # optional
//! t_max = 1000.0            # optional
//!
//! [run]
//! n_cycles = 10000
//! seed = 42
//! sweep = [10.0, 20.0, 40.0, 80.0]   # optional
//! brightness = [0.25, 1.0, 4.0]      # optional
//! pair = [0, 1]                      # optional
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use tsd_core::detection::DetectorConfig;
use tsd_core::harness::{default_grid, ExperimentConfig, DEFAULT_HORIZON_FACTOR, DEFAULT_STEPS_PER_BARRIER};
use tsd_core::linalg::{validate_covariance, ComplexMatrix};
use tsd_core::wiener::{WienerConfig, DEFAULT_STEP_BUDGET};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    covariance: RawCovariance,
    detector: RawDetector,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCovariance {
    entries: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    #[serde(alias = "E_d")]
    threshold: f64,
    coincidence_window: Option<f64>,
    dt: Option<f64>,
    t_max: Option<f64>,
    step_budget: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    n_cycles: u64,
    seed: u64,
    sweep: Option<Vec<f64>>,
    brightness: Option<Vec<f64>>,
    pair: Option<[usize; 2]>,
}

/// A parameter the config omitted, with the value filled in and the rule used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedDefault {
    pub field: String,
    pub value: serde_json::Value,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsedConfig {
    pub experiment: ExperimentConfig,
    pub defaults: Vec<AppliedDefault>,
}

pub fn parse_config(path: &Path, seed_override: Option<u64>) -> Result<ParsedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string(), seed_override)
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

pub fn parse_config_str(text: &str, origin: &str, seed_override: Option<u64>) -> Result<ParsedConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let mut defaults = Vec::new();

    let entries: Vec<Complex64> = raw
        .covariance
        .entries
        .iter()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect();
    let matrix = ComplexMatrix::from_row_major(entries).map_err(|e| invalid("covariance.entries", e.to_string()))?;
    let covariance = validate_covariance(&matrix).map_err(CliError::Covariance)?;

    let d = &raw.detector;
    let threshold = d.threshold;
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(invalid(
            "detector.threshold",
            format!("must be positive, got {threshold}"),
        ));
    }

    // Thresholds the grid has to serve; brightness c is equivalent to E_d / c.
    let mut effective = vec![threshold];
    if let Some(sweep) = &raw.run.sweep {
        effective.extend(sweep.iter().copied().filter(|t| *t > 0.0 && t.is_finite()));
    }
    if let Some(scales) = &raw.run.brightness {
        effective.extend(
            scales
                .iter()
                .filter(|c| **c > 0.0 && c.is_finite())
                .map(|c| threshold / c),
        );
    }
    let (grid_dt, grid_t_max) =
        default_grid(&covariance, &effective).map_err(|e| invalid("detector", e.to_string()))?;

    let dt = d.dt.unwrap_or_else(|| {
        defaults.push(AppliedDefault {
            field: "detector.dt".into(),
            value: grid_dt.into(),
            rule: format!("min threshold / ({DEFAULT_STEPS_PER_BARRIER} * max b_jj)"),
        });
        grid_dt
    });
    let t_max = d.t_max.unwrap_or_else(|| {
        defaults.push(AppliedDefault {
            field: "detector.t_max".into(),
            value: grid_t_max.into(),
            rule: format!("{DEFAULT_HORIZON_FACTOR} * max threshold / min positive b_jj"),
        });
        grid_t_max
    });
    let budget = match d.step_budget {
        Some(b) => b,
        None => {
            defaults.push(AppliedDefault {
                field: "detector.step_budget".into(),
                value: DEFAULT_STEP_BUDGET.into(),
                rule: "built-in step budget per cycle".into(),
            });
            DEFAULT_STEP_BUDGET
        }
    };
    let window = match d.coincidence_window {
        Some(w) => w,
        None => {
            defaults.push(AppliedDefault {
                field: "detector.coincidence_window".into(),
                value: 0.0.into(),
                rule: "exact same-step coincidence".into(),
            });
            0.0
        }
    };
    let wiener = WienerConfig::with_budget(dt, t_max, budget).map_err(|e| invalid("detector", e.to_string()))?;
    let detector = DetectorConfig::new(threshold, window, wiener).map_err(|e| invalid("detector", e.to_string()))?;

    let seed = match seed_override {
        Some(s) => {
            defaults.push(AppliedDefault {
                field: "run.seed".into(),
                value: s.into(),
                rule: "command-line seed override".into(),
            });
            s
        }
        None => raw.run.seed,
    };
    let mut experiment = ExperimentConfig::new(covariance, detector, raw.run.n_cycles, seed)
        .map_err(|e| invalid("run", e.to_string()))?;
    if let Some(sweep) = raw.run.sweep {
        experiment = experiment
            .with_sweep(sweep)
            .map_err(|e| invalid("run.sweep", e.to_string()))?;
    }
    if let Some(scales) = raw.run.brightness {
        experiment = experiment
            .with_brightness(scales)
            .map_err(|e| invalid("run.brightness", e.to_string()))?;
    }
    match raw.run.pair {
        Some([i, j]) => {
            experiment = experiment
                .with_pair(i, j)
                .map_err(|e| invalid("run.pair", e.to_string()))?;
        }
        None if experiment.dim() >= 2 => defaults.push(AppliedDefault {
            field: "run.pair".into(),
            value: serde_json::json!([0, 1]),
            rule: "first two channels".into(),
        }),
        None => {}
    }
    Ok(ParsedConfig { experiment, defaults })
}
