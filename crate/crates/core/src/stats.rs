//! Interval estimates and small fitting helpers.

use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: u64,
}

impl Estimate {
    /// Number of standard errors between the estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_err > 0.0 {
            (self.mean - target) / self.std_err
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY.copysign(self.mean - target)
        }
    }

    pub fn within(&self, target: f64, n_sigma: f64) -> bool {
        self.z_score(target).abs() <= n_sigma
    }
}

/// Running first and second power sums, merged in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MomentSums {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MomentSums {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_err: (var / n).sqrt(),
            n: self.n,
        }
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Ordinary least-squares slope of `y` on `x`; `None` with fewer than two
/// points or no spread in `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > 0.0 {
        Some(sxy / sxx)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_the_proportion() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        // Reference values for 30/100 at z = 1.96.
        assert!((lo - 0.2189).abs() < 1e-3);
        assert!((hi - 0.3958).abs() < 1e-3);
    }

    #[test]
    fn wilson_zero_successes_has_positive_upper_bound() {
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 3.0 / 1000.0 * 1.5);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0]
            .iter()
            .map(|&x| (x.ln(), (5.0 * x.powi(-2)).ln()))
            .collect();
        assert!((least_squares_slope(&pts).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }

    #[test]
    fn moment_sums_estimate() {
        let mut s = MomentSums::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            s.push(x);
        }
        let e = s.estimate();
        assert_eq!(e.mean, 2.5);
        assert!((e.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
