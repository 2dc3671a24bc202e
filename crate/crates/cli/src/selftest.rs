//! Analytic oracle checks: Gaussian moment identities, sampler covariance,
//! Wiener increments and moments, first-passage time and bound arithmetic.

use std::fmt::Write as _;

use serde::Serialize;
use tsd_core::gaussian::{empirical_covariance, mean_quadratic, monte_carlo_moments, quartic_moment, QuadraticForm};
use tsd_core::harness::{bound_from_epsilon, chebyshev_bound, BoundInputs, HarnessError};
use tsd_core::linalg::{cholesky_factor, random_hermitian, random_psd, ComplexMatrix, DensityMatrix};
use tsd_core::rng::{substream, Domain};
use tsd_core::stats::Estimate;
use tsd_core::wiener::{mean_exit_time, wiener_moment_check, WienerConfig};

use crate::CliError;

pub const Z_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, Serialize)]
pub struct SelftestPlan {
    pub moment_cases: u32,
    pub moment_samples: u64,
    pub covariance_samples: u64,
    pub wiener_paths: u64,
    pub wiener_dt: f64,
    pub passage_paths: u64,
    pub passage_dt: f64,
    /// Relative tolerance on the mean exit time of `|w|` through 1.
    pub passage_tolerance: f64,
}

impl Default for SelftestPlan {
    fn default() -> Self {
        Self {
            moment_cases: 10,
            moment_samples: 1_000_000,
            covariance_samples: 1_000_000,
            wiener_paths: 100_000,
            wiener_dt: 1e-3,
            passage_paths: 100_000,
            passage_dt: 1e-4,
            passage_tolerance: 0.02,
        }
    }
}

/// How `deviation` is measured against `limit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Standard errors from the target.
    Z,
    Relative,
    Absolute,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::Z => "z",
            Metric::Relative => "relative",
            Metric::Absolute => "absolute",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub quantity: String,
    pub target: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub metric: Metric,
    pub deviation: f64,
    pub limit: f64,
    pub pass: bool,
}

impl CheckRow {
    fn z(check: &str, quantity: &str, target: f64, est: Estimate) -> Self {
        let z = est.z_score(target);
        Self {
            check: check.into(),
            quantity: quantity.into(),
            target,
            estimate: est.mean,
            std_err: est.std_err,
            metric: Metric::Z,
            deviation: z,
            limit: Z_LIMIT,
            pass: z.abs() <= Z_LIMIT,
        }
    }

    fn exact(check: &str, quantity: &str, target: f64, value: f64, limit: f64) -> Self {
        let deviation = (value - target).abs();
        Self {
            check: check.into(),
            quantity: quantity.into(),
            target,
            estimate: value,
            std_err: 0.0,
            metric: Metric::Absolute,
            deviation,
            limit,
            pass: deviation <= limit,
        }
    }
}

pub const CHECK_HEADER: &str = "check,quantity,target,estimate,std_err,metric,deviation,limit,pass";

pub fn checks_table(rows: &[CheckRow]) -> String {
    let mut out = String::from(CHECK_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.check,
            r.quantity,
            r.target,
            r.estimate,
            r.std_err,
            r.metric.name(),
            r.deviation,
            r.limit,
            r.pass
        );
    }
    out
}

/// One Monte Carlo comparison against `mean_quadratic` or `quartic_moment`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub case: u32,
    pub dim: usize,
    pub quantity: &'static str,
    pub analytic: f64,
    pub estimate: Estimate,
    pub z: f64,
}

pub const MOMENT_HEADER: &str = "case,dim,quantity,analytic,mc_estimate,std_err,z";

pub fn moments_table(rows: &[MomentRow]) -> String {
    let mut out = String::from(MOMENT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.case, r.dim, r.quantity, r.analytic, r.estimate.mean, r.estimate.std_err, r.z
        );
    }
    out
}

/// Random `(B, Â₁, Â₂)` triples with `dim = 2 + case mod 3`, each checked
/// against `Tr BÂ₁`, `Tr BÂ₂` and the quartic moment.
pub fn moment_cases(seed: u64, cases: u32, samples: u64) -> Result<Vec<MomentRow>, CliError> {
    let mut rows = Vec::with_capacity(3 * cases as usize);
    for case in 0..cases {
        let mut rng = substream(seed, Domain::CaseGeneration, case as u64);
        let dim = 2 + (case % 3) as usize;
        let b = random_psd(dim, &mut rng);
        let a1 = QuadraticForm::new(random_hermitian(dim, &mut rng)).map_err(HarnessError::from)?;
        let a2 = QuadraticForm::new(random_hermitian(dim, &mut rng)).map_err(HarnessError::from)?;
        let factor = cholesky_factor(&b).map_err(HarnessError::from)?;
        let mc = monte_carlo_moments(&factor, &a1, &a2, samples, seed, case).map_err(HarnessError::from)?;
        let analytic = [
            (
                "mean_A1",
                mean_quadratic(&b, &a1).map_err(HarnessError::from)?,
                mc.first,
            ),
            (
                "mean_A2",
                mean_quadratic(&b, &a2).map_err(HarnessError::from)?,
                mc.second,
            ),
            (
                "quartic",
                quartic_moment(&b, &a1, &a2).map_err(HarnessError::from)?,
                mc.product,
            ),
        ];
        for (quantity, value, estimate) in analytic {
            rows.push(MomentRow {
                case,
                dim,
                quantity,
                analytic: value,
                estimate,
                z: estimate.z_score(value),
            });
        }
    }
    Ok(rows)
}

fn wiener(dt: f64, t_max: f64) -> Result<WienerConfig, CliError> {
    WienerConfig::new(dt, t_max).map_err(|e| CliError::Harness(e.into()))
}

pub fn run_selftest(seed: u64, plan: &SelftestPlan) -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();

    for m in moment_cases(seed, plan.moment_cases, plan.moment_samples)? {
        rows.push(CheckRow::z(
            &format!("moments_case_{}", m.case),
            m.quantity,
            m.analytic,
            m.estimate,
        ));
    }

    // Sampler covariance: every entry of (1/n) Σ φ φ^† against B.
    let mut rng = substream(seed, Domain::CaseGeneration, u32::MAX as u64);
    let b = random_psd(3, &mut rng);
    let factor = cholesky_factor(&b).map_err(HarnessError::from)?;
    let (emp, errs) = empirical_covariance(&factor, plan.covariance_samples, seed);
    let dim = b.dim();
    for i in 0..dim {
        for j in 0..dim {
            let (se_re, se_im) = errs[i * dim + j];
            let target = b.entry(i, j);
            let n = plan.covariance_samples;
            let quantity = format!("b_{}{}_re", i + 1, j + 1);
            rows.push(CheckRow::z(
                "sampler_covariance",
                &quantity,
                target.re,
                Estimate {
                    mean: emp[(i, j)].re,
                    std_err: se_re,
                    n,
                },
            ));
            if i != j {
                let quantity = format!("b_{}{}_im", i + 1, j + 1);
                rows.push(CheckRow::z(
                    "sampler_covariance",
                    &quantity,
                    target.im,
                    Estimate {
                        mean: emp[(i, j)].im,
                        std_err: se_im,
                        n,
                    },
                ));
            }
        }
    }

    let dt = plan.wiener_dt;
    let (inc, _) =
        wiener_moment_check(dt, plan.wiener_paths, &wiener(dt, dt)?, seed).map_err(|e| CliError::Harness(e.into()))?;
    rows.push(CheckRow::z("increment_variance", "E dW^2", dt, inc));

    let (w2, w4) = wiener_moment_check(1.0, plan.wiener_paths, &wiener(dt, 1.0)?, seed ^ 1)
        .map_err(|e| CliError::Harness(e.into()))?;
    rows.push(CheckRow::z("wiener_moments", "E w(1)^2", 1.0, w2));
    rows.push(CheckRow::z("wiener_moments", "E w(1)^4", 3.0, w4));

    // |w| exits [-1, 1] at mean time 1; the horizon is far enough out that
    // censoring has probability below 1e-20.
    let exit = mean_exit_time(1.0, plan.passage_paths, &wiener(plan.passage_dt, 50.0)?, seed ^ 2)
        .map_err(|e| CliError::Harness(e.into()))?;
    let rel = (exit.mean_time.mean - 1.0).abs();
    rows.push(CheckRow {
        check: "first_passage".into(),
        quantity: "E tau (a = 1)".into(),
        target: 1.0,
        estimate: exit.mean_time.mean,
        std_err: exit.mean_time.std_err,
        metric: Metric::Relative,
        deviation: rel,
        limit: plan.passage_tolerance,
        pass: rel <= plan.passage_tolerance && exit.censored == 0,
    });

    let full = DensityMatrix::new(
        ComplexMatrix::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).map_err(HarnessError::from)?,
    )
    .map_err(HarnessError::from)?;
    let mixed = DensityMatrix::new(ComplexMatrix::diagonal(&[0.5, 0.5])).map_err(HarnessError::from)?;
    for eps in [0.1, 0.01] {
        let g = bound_from_epsilon(eps, &full, 0, 1)?.g2_bound;
        rows.push(CheckRow::exact(
            "bound_arithmetic",
            &format!("g2_bound full eps={eps}"),
            6.0 * eps * eps,
            g,
            1e-12,
        ));
        let g = bound_from_epsilon(eps, &mixed, 0, 1)?.g2_bound;
        rows.push(CheckRow::exact(
            "bound_arithmetic",
            &format!("g2_bound diagonal eps={eps}"),
            3.0 * eps * eps,
            g,
            1e-12,
        ));
    }
    let inputs = BoundInputs {
        trace_b: 2.0,
        mean_tau_sq: 0.7,
        rho: full,
        threshold: 5.0,
    };
    let base = chebyshev_bound(&inputs, 0, 1)?;
    let doubled = chebyshev_bound(
        &BoundInputs {
            threshold: 10.0,
            ..inputs.clone()
        },
        0,
        1,
    )?;
    rows.push(CheckRow::exact(
        "bound_arithmetic",
        "g2_bound ratio on doubling E_d",
        0.25,
        doubled.g2_bound / base.g2_bound,
        1e-12,
    ));
    rows.push(CheckRow::exact(
        "bound_arithmetic",
        "p12_bound ratio on doubling E_d",
        0.25,
        doubled.p12_bound / base.p12_bound,
        1e-12,
    ));

    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> SelftestPlan {
        SelftestPlan {
            moment_cases: 3,
            moment_samples: 100_000,
            covariance_samples: 100_000,
            wiener_paths: 5_000,
            wiener_dt: 1e-2,
            passage_paths: 5_000,
            passage_dt: 1e-3,
            passage_tolerance: 0.05,
        }
    }

    #[test]
    fn small_selftest_passes() {
        let rows = run_selftest(3, &small_plan()).unwrap();
        for r in &rows {
            assert!(r.pass, "{r:?}");
        }
        let names: Vec<&str> = rows.iter().map(|r| r.check.as_str()).collect();
        for check in [
            "moments_case_0",
            "sampler_covariance",
            "increment_variance",
            "wiener_moments",
            "first_passage",
            "bound_arithmetic",
        ] {
            assert!(names.contains(&check), "missing {check}");
        }
    }

    #[test]
    fn moment_cases_cover_dims_two_to_four() {
        let rows = moment_cases(1, 3, 1000).unwrap();
        assert_eq!(rows.len(), 9);
        let dims: Vec<usize> = rows.iter().map(|r| r.dim).collect();
        assert_eq!(dims, vec![2, 2, 2, 3, 3, 3, 4, 4, 4]);
        let table = moments_table(&rows);
        assert_eq!(table.lines().count(), 10);
        assert!(table.starts_with(MOMENT_HEADER));
    }
}
