use num_complex::Complex64;
use proptest::prelude::*;
use tsd_core::detection::{empirical_probabilities, run_cycles, DetectorConfig};
use tsd_core::harness::{
    born_rule_experiment, brightness_sweep, default_wiener_config, g2_experiment, threshold_sweep, ExperimentConfig,
    SweepRow,
};
use tsd_core::linalg::{cholesky_factor, random_psd, validate_covariance, ComplexMatrix, CovarianceOperator};
use tsd_core::rng::{substream, Domain};
use tsd_core::wiener::WienerConfig;

fn coherent() -> CovarianceOperator {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let m = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.4, 0.3)], vec![c(0.4, -0.3), c(1.0, 0.0)]]).unwrap();
    validate_covariance(&m).unwrap()
}

fn config(b: CovarianceOperator, thresholds: &[f64], n_cycles: u64, seed: u64) -> ExperimentConfig {
    let wiener = default_wiener_config(&b, thresholds).unwrap();
    let det = DetectorConfig::new(thresholds[0], 0.0, wiener).unwrap();
    ExperimentConfig::new(b, det, n_cycles, seed).unwrap()
}

#[test]
fn sweep_output_is_repeatable() {
    let cfg = config(coherent(), &[1.0, 2.0, 4.0], 800, 31)
        .with_sweep(vec![1.0, 2.0, 4.0])
        .unwrap();
    let a = threshold_sweep(&cfg).unwrap();
    let b = threshold_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_table(), b.to_table());
    assert_eq!(a.rows.len(), 3);
}

#[test]
fn every_sweep_row_matches_the_bound_formula() {
    let cfg = config(coherent(), &[1.0, 2.0, 4.0], 800, 32)
        .with_sweep(vec![1.0, 2.0, 4.0])
        .unwrap();
    let result = threshold_sweep(&cfg).unwrap();
    let (r11, r22) = (result.rho.population(0), result.rho.population(1));
    let off = result.rho.entry(0, 1).norm_sqr();
    for row in &result.rows {
        let expected = 3.0 * row.epsilon * row.epsilon * (1.0 + off / (r11 * r22));
        assert!((row.g2_bound - expected).abs() <= 1e-12 * expected.max(1.0), "{row:?}");
        let eps = row.mean_tau_sq.sqrt() * result.trace_b / row.threshold;
        assert_eq!(eps, row.epsilon);
    }
}

#[test]
fn unit_brightness_reproduces_the_baseline_run() {
    let cfg = config(coherent(), &[2.0], 600, 33);
    let bright = brightness_sweep(&cfg, &[1.0]).unwrap();
    let baseline = g2_experiment(&cfg).unwrap();
    assert_eq!(bright.rows[0].row, SweepRow::from_report(2.0, &baseline));
}

#[test]
fn brightness_raises_the_bound_column() {
    // One grid serving E_d / c for every scale.
    let b = coherent();
    let wiener = default_wiener_config(&b, &[0.5, 1.0, 2.0]).unwrap();
    let det = DetectorConfig::new(1.0, 0.0, wiener).unwrap();
    let cfg = ExperimentConfig::new(b, det, 600, 34).unwrap();
    let result = brightness_sweep(&cfg, &[0.5, 1.0, 2.0]).unwrap();
    let bounds: Vec<f64> = result.rows.iter().map(|r| r.row.g2_bound).collect();
    assert!(bounds.windows(2).all(|w| w[1] > w[0]), "{bounds:?}");
    let table = result.to_table();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("scale,E_d,P_1,P_2,P_12,"));
}

#[test]
fn identity_g2_stays_under_the_bound() {
    let b = validate_covariance(&ComplexMatrix::identity(2)).unwrap();
    let report = g2_experiment(&config(b, &[2.0], 3_000, 35)).unwrap();
    assert!(report.pass, "{:?} vs {:?}", report.estimate, report.bound);
    assert!(report.estimate.ci_high <= report.bound.g2_bound);
}

#[test]
fn symmetric_born_targets_covered_at_1e5_clicks() {
    let b = validate_covariance(&ComplexMatrix::identity(2)).unwrap();
    let det = DetectorConfig::new(1.0, 0.0, WienerConfig::new(0.01, 100.0).unwrap()).unwrap();
    let report = born_rule_experiment(&ExperimentConfig::new(b, det, 52_000, 36).unwrap()).unwrap();
    assert!(report.n_clicks >= 100_000, "{}", report.n_clicks);
    for ch in &report.channels {
        assert!(ch.covered, "{ch:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ledger_counts_are_consistent(seed in any::<u64>(), dim in 2usize..=4, threshold in 0.5f64..4.0) {
        let b = random_psd(dim, &mut substream(seed, Domain::CaseGeneration, 0));
        let wiener = WienerConfig::new(threshold / (50.0 * (0..dim).map(|j| b.diag(j)).fold(0.0, f64::max)), 20.0 * threshold).unwrap();
        let det = DetectorConfig::new(threshold, 0.0, wiener).unwrap();
        let factor = cholesky_factor(&b).unwrap();
        let (ledger, _) = run_cycles(&factor, &det, 64, seed, false);
        prop_assert_eq!(ledger.total_cycles, 64);
        prop_assert!(ledger.total_clicks() <= (dim as u64) * 64);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let c = ledger.coincidence(i, j);
                prop_assert!(c <= ledger.clicks[i].min(ledger.clicks[j]));
            }
        }
        if ledger.total_clicks() > 0 {
            let p = empirical_probabilities(&ledger).unwrap();
            let total: f64 = p.channels.iter().map(|c| c.value).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for c in &p.channels {
                prop_assert!(c.ci_low <= c.value && c.value <= c.ci_high);
            }
        }
    }
}
