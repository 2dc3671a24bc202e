//! Command dispatch and result files.
//!
//! Every command writes `summary.json` (config echo, applied defaults, seed,
//! pass flags and results) and `timings.json` (wall clock and worker count).
//! Everything except `timings.json` is a pure function of the config and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use tsd_core::detection::{write_event_log, CycleRecord};
use tsd_core::harness::{
    born_rule_experiment_logged, brightness_sweep, g2_experiment_logged, table_header, threshold_sweep,
    ExperimentConfig, SweepRow,
};
use tsd_core::linalg::normalize_to_density;

use crate::config::{parse_config, AppliedDefault, ParsedConfig};
use crate::selftest::{checks_table, moment_cases, moments_table, run_selftest, SelftestPlan, Z_LIMIT};
use crate::CliError;

/// Cases and samples for the `moments` table.
pub const MOMENT_CASES: u32 = 10;
pub const MOMENT_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Validate,
    Born,
    G2,
    Sweep,
    Brightness,
    Moments,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Born => "born",
            Command::G2 => "g2",
            Command::Sweep => "sweep",
            Command::Brightness => "brightness",
            Command::Moments => "moments",
            Command::Selftest => "selftest",
        }
    }

    fn needs_config(self) -> bool {
        !matches!(self, Command::Moments | Command::Selftest)
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub command: Command,
    pub output_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub verbosity: u8,
    /// Rayon threads; 0 lets rayon choose.
    pub workers: usize,
    /// Write per-cycle `events.jsonl` for `born` and `g2`.
    pub event_log: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub seed: u64,
    pub config: Option<ExperimentConfig>,
    pub defaults: Vec<AppliedDefault>,
    pub pass: BTreeMap<String, bool>,
    pub all_pass: bool,
    pub results: Value,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

struct Produced {
    results: Value,
    pass: BTreeMap<String, bool>,
    tables: Vec<(&'static str, String)>,
    events: Option<Vec<CycleRecord>>,
}

fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("result types serialize")
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn config_or_missing(parsed: Option<&ParsedConfig>, command: Command) -> Result<&ExperimentConfig, CliError> {
    parsed.map(|p| &p.experiment).ok_or_else(|| CliError::Validation {
        field: "config".into(),
        message: format!("`{}` needs a config file", command.name()),
    })
}

fn single_row_table(dim: usize, row: &SweepRow) -> String {
    let mut out = table_header(dim).join(",");
    out.push('\n');
    let _ = writeln!(out, "{}", row.table_fields().join(","));
    out
}

fn execute(manifest: &RunManifest, parsed: Option<&ParsedConfig>, seed: u64) -> Result<Produced, CliError> {
    let mut pass = BTreeMap::new();
    let mut tables = Vec::new();
    let mut events = None;
    let results = match manifest.command {
        Command::Validate => {
            let cfg = config_or_missing(parsed, manifest.command)?;
            let rho = normalize_to_density(&cfg.covariance);
            json!({
                "dim": cfg.dim(),
                "trace_b": cfg.covariance.trace(),
                "born_targets": (0..cfg.dim()).map(|i| rho.population(i)).collect::<Vec<_>>(),
                "steps_per_cycle": cfg.detector.wiener().max_steps(),
            })
        }
        Command::Born => {
            let cfg = config_or_missing(parsed, manifest.command)?;
            let (report, records) = born_rule_experiment_logged(cfg, manifest.event_log)?;
            let mut table = String::from("channel,target,P,ci_low,ci_high,covered,rate_normalized,clicks\n");
            for (i, c) in report.channels.iter().enumerate() {
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{},{},{}",
                    i + 1,
                    c.target,
                    c.empirical.value,
                    c.empirical.ci_low,
                    c.empirical.ci_high,
                    c.covered,
                    c.rate_normalized,
                    report.ledger.clicks[i]
                );
            }
            tables.push(("born.csv", table));
            pass.insert("born_targets_covered".into(), report.flagged.is_empty());
            events = records;
            to_json(&report)
        }
        Command::G2 => {
            let cfg = config_or_missing(parsed, manifest.command)?;
            let (report, records) = g2_experiment_logged(cfg, manifest.event_log)?;
            let row = SweepRow::from_report(cfg.detector.threshold(), &report);
            tables.push(("g2.csv", single_row_table(cfg.dim(), &row)));
            pass.insert("g2_within_bound".into(), report.pass);
            events = records;
            to_json(&report)
        }
        Command::Sweep => {
            let cfg = config_or_missing(parsed, manifest.command)?;
            if cfg.sweep.is_none() {
                return Err(CliError::Validation {
                    field: "run.sweep".into(),
                    message: "`sweep` needs a list of thresholds".into(),
                });
            }
            let result = threshold_sweep(cfg)?;
            let pooled = result.pooled_bounds()?;
            let within_pooled = result.rows.iter().zip(&pooled).all(|(r, b)| r.g2_ci_high <= *b);
            pass.insert("rows_within_bound".into(), result.rows.iter().all(|r| r.pass));
            pass.insert("rows_within_pooled_bound".into(), within_pooled);
            tables.push(("sweep.csv", result.to_table()));
            let mut value = to_json(&result);
            value["pooled_g2_bounds"] = to_json(&pooled);
            value
        }
        Command::Brightness => {
            let cfg = config_or_missing(parsed, manifest.command)?;
            let scales = cfg.brightness.clone().ok_or_else(|| CliError::Validation {
                field: "run.brightness".into(),
                message: "`brightness` needs a list of scale factors".into(),
            })?;
            let result = brightness_sweep(cfg, &scales)?;
            pass.insert("rows_within_bound".into(), result.rows.iter().all(|r| r.row.pass));
            tables.push(("brightness.csv", result.to_table()));
            to_json(&result)
        }
        Command::Moments => {
            let rows = moment_cases(seed, MOMENT_CASES, MOMENT_SAMPLES)?;
            pass.insert(
                "moments_within_5_sigma".into(),
                rows.iter().all(|r| r.z.abs() <= Z_LIMIT),
            );
            tables.push(("moments.csv", moments_table(&rows)));
            to_json(&rows)
        }
        Command::Selftest => {
            let plan = SelftestPlan::default();
            let rows = run_selftest(seed, &plan)?;
            for r in &rows {
                let entry = pass.entry(r.check.clone()).or_insert(true);
                *entry &= r.pass;
            }
            tables.push(("selftest.csv", checks_table(&rows)));
            json!({ "plan": to_json(&plan), "checks": to_json(&rows) })
        }
    };
    Ok(Produced {
        results,
        pass,
        tables,
        events,
    })
}

pub fn run(manifest: &RunManifest) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let parsed = match &manifest.config_path {
        Some(path) => Some(parse_config(path, manifest.seed_override)?),
        None if manifest.command.needs_config() => {
            return Err(CliError::Validation {
                field: "config".into(),
                message: format!("`{}` needs a config file", manifest.command.name()),
            })
        }
        None => None,
    };
    let mut defaults = parsed.as_ref().map(|p| p.defaults.clone()).unwrap_or_default();
    let seed = match (&parsed, manifest.seed_override) {
        (Some(p), _) => p.experiment.seed,
        (None, Some(s)) => s,
        (None, None) => {
            defaults.push(AppliedDefault {
                field: "run.seed".into(),
                value: 0.into(),
                rule: "no config and no seed override".into(),
            });
            0
        }
    };

    fs::create_dir_all(&manifest.output_dir).map_err(|source| CliError::Io {
        path: manifest.output_dir.display().to_string(),
        source,
    })?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.workers)
        .build()
        .map_err(|e| CliError::Numeric(format!("worker pool: {e}")))?;
    if manifest.verbosity > 0 {
        eprintln!(
            "tsd {}: seed {seed}, {} workers",
            manifest.command.name(),
            pool.current_num_threads()
        );
    }
    let produced = pool.install(|| execute(manifest, parsed.as_ref(), seed))?;

    let mut files = Vec::new();
    let out = |name: &str| manifest.output_dir.join(name);
    if let Some(p) = &parsed {
        let echo = json!({ "config": to_json(&p.experiment), "defaults": to_json(&defaults) });
        let path = out("config_echo.json");
        write_file(&path, pretty(&echo).as_bytes())?;
        files.push(path);
    }
    for (name, table) in &produced.tables {
        let path = out(name);
        write_file(&path, table.as_bytes())?;
        files.push(path);
    }
    if let Some(records) = &produced.events {
        let path = out("events.jsonl");
        let mut buf = Vec::new();
        write_event_log(records, &mut buf).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        write_file(&path, &buf)?;
        files.push(path);
    }

    let summary = Summary {
        command: manifest.command.name(),
        seed,
        config: parsed.as_ref().map(|p| p.experiment.clone()),
        defaults,
        all_pass: produced.pass.values().all(|&p| p),
        pass: produced.pass,
        results: produced.results,
    };
    let path = out("summary.json");
    write_file(&path, pretty(&summary).as_bytes())?;
    files.push(path);

    let timings = json!({
        "command": manifest.command.name(),
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
        "workers": pool.current_num_threads(),
    });
    let path = out("timings.json");
    write_file(&path, pretty(&timings).as_bytes())?;
    files.push(path);

    if manifest.verbosity > 0 {
        for (name, ok) in &summary.pass {
            eprintln!("  {name}: {}", if *ok { "pass" } else { "FAIL" });
        }
    }
    if manifest.command == Command::Selftest && !summary.all_pass {
        let failed: Vec<&str> = summary
            .pass
            .iter()
            .filter(|(_, ok)| !**ok)
            .map(|(k, _)| k.as_str())
            .collect();
        return Err(CliError::Numeric(format!("selftest failed: {}", failed.join(", "))));
    }
    Ok(RunOutcome { summary, files })
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("result types serialize");
    s.push('\n');
    s
}
