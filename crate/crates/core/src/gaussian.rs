//! Zero-mean complex Gaussian signal vectors and their exact moments.
//!
//! A signal `φ` with covariance `B` satisfies `E φ_i conj(φ_j) = b_ij`. For
//! Hermitian `Â` the quadratic form `f_A(φ) = ⟨Âφ, φ⟩` has mean `Tr BÂ`, and
//! the product of two forms has mean `Tr BÂ₁ · Tr BÂ₂ + Tr BÂ₂BÂ₁`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{ComplexMatrix, CovarianceOperator, LinalgError, HERMITIAN_TOL};
use crate::par::map_blocks;
use crate::rng::{substream, Domain};
use crate::stats::{Estimate, MomentSums};

/// `E w(τ)⁴ = 3 τ²` for a standard Wiener process.
pub const WIENER_FOURTH_MOMENT_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaussianError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("energy correlation needs two distinct channels, got {0} twice")]
    SameChannel(usize),
    #[error("channel {index} out of range for dimension {dim}")]
    ChannelOutOfRange { index: usize, dim: usize },
    #[error("time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
    #[error("operator is not Hermitian: {0}")]
    NotHermitian(LinalgError),
}

/// One realization of the signal's internal components `φ_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalVector {
    pub components: Vec<Complex64>,
}

impl SignalVector {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Per-channel energy factors `|φ_j|²`.
    pub fn energies(&self) -> Vec<f64> {
        self.components.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            components: self.components.iter().map(|z| z * c).collect(),
        }
    }
}

/// Quadratic form of a Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    operator: ComplexMatrix,
}

impl QuadraticForm {
    pub fn new(operator: ComplexMatrix) -> Result<Self, GaussianError> {
        let (row, col, deviation) = operator.hermitian_defect();
        let tolerance = HERMITIAN_TOL * operator.max_abs();
        if deviation > tolerance {
            return Err(GaussianError::NotHermitian(LinalgError::NotHermitian {
                row,
                col,
                deviation,
                tolerance,
            }));
        }
        Ok(Self { operator })
    }

    pub fn operator(&self) -> &ComplexMatrix {
        &self.operator
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }
}

#[inline]
fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Writes `φ = L z` into `out`, with `z` standard complex normal
/// (`E |z_i|² = 1`, real and imaginary parts each of variance 1/2).
pub fn sample_signal_into<R: Rng + ?Sized>(
    factor: &ComplexMatrix,
    rng: &mut R,
    z: &mut [Complex64],
    out: &mut [Complex64],
) {
    let m = factor.dim();
    debug_assert_eq!(z.len(), m);
    debug_assert_eq!(out.len(), m);
    for zi in z.iter_mut() {
        *zi = standard_complex_normal(rng);
    }
    for i in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..=i {
            acc += factor[(i, k)] * z[k];
        }
        out[i] = acc;
    }
}

/// Draws a signal vector with covariance `L L^†` from a lower-triangular factor.
pub fn sample_signal<R: Rng + ?Sized>(factor: &ComplexMatrix, rng: &mut R) -> SignalVector {
    let m = factor.dim();
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    let mut components = vec![Complex64::new(0.0, 0.0); m];
    sample_signal_into(factor, rng, &mut z, &mut components);
    SignalVector { components }
}

fn check_dim(expected: usize, found: usize) -> Result<(), GaussianError> {
    if expected == found {
        Ok(())
    } else {
        Err(GaussianError::DimensionMismatch { expected, found })
    }
}

fn quadratic_value(a: &ComplexMatrix, phi: &[Complex64]) -> f64 {
    let m = phi.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..m {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..m {
            row += a[(i, j)] * phi[j];
        }
        acc += row * phi[i].conj();
    }
    acc.re
}

/// `⟨Âφ, φ⟩`, real for Hermitian `Â`.
pub fn eval_quadratic_form(f: &QuadraticForm, phi: &SignalVector) -> Result<f64, GaussianError> {
    check_dim(f.dim(), phi.dim())?;
    Ok(quadratic_value(&f.operator, &phi.components))
}

fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Exact mean `Tr BÂ` of a quadratic form under the Gaussian with covariance `B`.
pub fn mean_quadratic(b: &CovarianceOperator, a: &QuadraticForm) -> Result<f64, GaussianError> {
    check_dim(b.dim(), a.dim())?;
    Ok(trace_of_product(b.matrix(), &a.operator).re)
}

/// Exact mean of `f_{A₁}(φ) f_{A₂}(φ)`: `Tr BÂ₁ · Tr BÂ₂ + Tr BÂ₂BÂ₁`.
pub fn quartic_moment(b: &CovarianceOperator, a1: &QuadraticForm, a2: &QuadraticForm) -> Result<f64, GaussianError> {
    check_dim(b.dim(), a1.dim())?;
    check_dim(b.dim(), a2.dim())?;
    let ba1 = b.matrix().matmul(&a1.operator).expect("checked");
    let ba2 = b.matrix().matmul(&a2.operator).expect("checked");
    let t1 = ba1.trace().re;
    let t2 = ba2.trace().re;
    let cross = trace_of_product(&ba2, &ba1).re;
    Ok(t1 * t2 + cross)
}

/// `E E_i(τ) E_j(τ) = 3τ² (b_ii b_jj + |b_ij|²)` for the signal `w(τ) φ`.
pub fn energy_correlation(b: &CovarianceOperator, i: usize, j: usize, tau: f64) -> Result<f64, GaussianError> {
    let dim = b.dim();
    for index in [i, j] {
        if index >= dim {
            return Err(GaussianError::ChannelOutOfRange { index, dim });
        }
    }
    if i == j {
        return Err(GaussianError::SameChannel(i));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(GaussianError::InvalidTime(tau));
    }
    let bij = b.entry(i, j);
    Ok(WIENER_FOURTH_MOMENT_FACTOR * tau * tau * (b.diag(i) * b.diag(j) + bij.norm_sqr()))
}

const SAMPLE_BLOCK: u64 = 1 << 14;

/// Monte Carlo estimates of `E f_{A₁}`, `E f_{A₂}` and `E f_{A₁} f_{A₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimates {
    pub first: Estimate,
    pub second: Estimate,
    pub product: Estimate,
}

/// Estimates the quadratic-form moments from `n` signal draws.
///
/// Sampling is split into fixed blocks with one substream each, keyed by
/// `case` and block index, so the estimates do not depend on thread count.
pub fn monte_carlo_moments(
    factor: &ComplexMatrix,
    a1: &QuadraticForm,
    a2: &QuadraticForm,
    n: u64,
    seed: u64,
    case: u32,
) -> Result<MomentEstimates, GaussianError> {
    let m = factor.dim();
    check_dim(m, a1.dim())?;
    check_dim(m, a2.dim())?;
    let blocks = map_blocks(n, SAMPLE_BLOCK, |range| {
        let block = range.start / SAMPLE_BLOCK;
        let mut rng = substream(seed, Domain::Moments, ((case as u64) << 32) | block);
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        let mut phi = vec![Complex64::new(0.0, 0.0); m];
        let mut sums = [MomentSums::default(); 3];
        for _ in range {
            sample_signal_into(factor, &mut rng, &mut z, &mut phi);
            let f1 = quadratic_value(&a1.operator, &phi);
            let f2 = quadratic_value(&a2.operator, &phi);
            sums[0].push(f1);
            sums[1].push(f2);
            sums[2].push(f1 * f2);
        }
        sums
    });
    let mut total = [MomentSums::default(); 3];
    for block in &blocks {
        for (t, s) in total.iter_mut().zip(block) {
            t.merge(s);
        }
    }
    Ok(MomentEstimates {
        first: total[0].estimate(),
        second: total[1].estimate(),
        product: total[2].estimate(),
    })
}

/// Empirical covariance `(1/n) Σ φ_i conj(φ_j)` over `n` draws, together with
/// entrywise standard errors of the real and imaginary parts.
pub fn empirical_covariance(factor: &ComplexMatrix, n: u64, seed: u64) -> (ComplexMatrix, Vec<(f64, f64)>) {
    let m = factor.dim();
    let blocks = map_blocks(n, SAMPLE_BLOCK, |range| {
        let block = range.start / SAMPLE_BLOCK;
        let mut rng = substream(seed, Domain::Moments, (u32::MAX as u64) << 32 | block);
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        let mut phi = vec![Complex64::new(0.0, 0.0); m];
        let mut sums = vec![(MomentSums::default(), MomentSums::default()); m * m];
        for _ in range {
            sample_signal_into(factor, &mut rng, &mut z, &mut phi);
            for i in 0..m {
                for j in 0..m {
                    let v = phi[i] * phi[j].conj();
                    sums[i * m + j].0.push(v.re);
                    sums[i * m + j].1.push(v.im);
                }
            }
        }
        sums
    });
    let mut total = vec![(MomentSums::default(), MomentSums::default()); m * m];
    for block in &blocks {
        for (t, s) in total.iter_mut().zip(block) {
            t.0.merge(&s.0);
            t.1.merge(&s.1);
        }
    }
    let mut cov = ComplexMatrix::zeros(m);
    let mut errs = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let (re, im) = (total[i * m + j].0.estimate(), total[i * m + j].1.estimate());
            cov[(i, j)] = Complex64::new(re.mean, im.mean);
            errs.push((re.std_err, im.std_err));
        }
    }
    (cov, errs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky_factor, projector, random_hermitian, random_psd, validate_covariance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qf(m: ComplexMatrix) -> QuadraticForm {
        QuadraticForm::new(m).unwrap()
    }

    fn cov(rows: &[Vec<f64>]) -> CovarianceOperator {
        validate_covariance(&ComplexMatrix::from_real_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn zero_factor_gives_zero_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let phi = sample_signal(&ComplexMatrix::zeros(3), &mut rng);
            assert!(phi.components.iter().all(|z| *z == c(0.0, 0.0)));
        }
    }

    #[test]
    fn quadratic_form_examples() {
        let phi = SignalVector {
            components: vec![c(1.0, 0.0), c(0.0, 1.0)],
        };
        assert_eq!(eval_quadratic_form(&qf(ComplexMatrix::identity(2)), &phi).unwrap(), 2.0);

        let phi = SignalVector {
            components: vec![c(3.0, 4.0), c(7.0, 0.0)],
        };
        assert_eq!(eval_quadratic_form(&qf(projector(2, 0).unwrap()), &phi).unwrap(), 25.0);

        let flip = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let phi = SignalVector {
            components: vec![c(1.0, 0.0), c(1.0, 0.0)],
        };
        assert_eq!(eval_quadratic_form(&qf(flip), &phi).unwrap(), 2.0);

        let phi3 = SignalVector {
            components: vec![c(1.0, 0.0); 3],
        };
        assert!(matches!(
            eval_quadratic_form(&qf(ComplexMatrix::identity(2)), &phi3),
            Err(GaussianError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn quadratic_form_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(QuadraticForm::new(m), Err(GaussianError::NotHermitian(_))));
    }

    #[test]
    fn mean_quadratic_examples() {
        let b = cov(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(mean_quadratic(&b, &qf(projector(2, 0).unwrap())).unwrap(), 1.0);
        let b = validate_covariance(&ComplexMatrix::diagonal(&[3.0, 7.0])).unwrap();
        assert_eq!(mean_quadratic(&b, &qf(ComplexMatrix::identity(2))).unwrap(), 10.0);
    }

    #[test]
    fn quartic_moment_examples() {
        let p0 = qf(projector(2, 0).unwrap());
        let p1 = qf(projector(2, 1).unwrap());
        let b = cov(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(quartic_moment(&b, &p0, &p1).unwrap(), 1.0);
        let b = cov(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert_eq!(quartic_moment(&b, &p0, &p1).unwrap(), 1.25);
    }

    #[test]
    fn energy_correlation_examples() {
        let b = cov(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(energy_correlation(&b, 0, 1, 1.0).unwrap(), 3.0);
        assert_eq!(energy_correlation(&b, 0, 1, 0.0).unwrap(), 0.0);
        let b = cov(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert_eq!(energy_correlation(&b, 0, 1, 2.0).unwrap(), 15.0);
        assert!(matches!(
            energy_correlation(&b, 1, 1, 1.0),
            Err(GaussianError::SameChannel(1))
        ));
        assert!(matches!(
            energy_correlation(&b, 0, 2, 1.0),
            Err(GaussianError::ChannelOutOfRange { .. })
        ));
        assert!(matches!(
            energy_correlation(&b, 0, 1, -1.0),
            Err(GaussianError::InvalidTime(_))
        ));
    }

    #[test]
    fn energy_correlation_matches_quartic_of_projectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 2..5 {
            let b = random_psd(dim, &mut rng);
            for (i, j) in [(0, 1), (1, dim - 1)] {
                if i == j {
                    continue;
                }
                let q = quartic_moment(&b, &qf(projector(dim, i).unwrap()), &qf(projector(dim, j).unwrap())).unwrap();
                for tau in [0.5, 1.0, 3.0] {
                    let e = energy_correlation(&b, i, j, tau).unwrap();
                    assert!((e - 3.0 * tau * tau * q).abs() <= 1e-12 * e.abs());
                }
            }
        }
    }

    #[test]
    fn quartic_moment_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dim in 1..6 {
            let b = random_psd(dim, &mut rng);
            let a1 = qf(random_hermitian(dim, &mut rng));
            let a2 = qf(random_hermitian(dim, &mut rng));
            let x = quartic_moment(&b, &a1, &a2).unwrap();
            let y = quartic_moment(&b, &a2, &a1).unwrap();
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn unit_covariance_second_moment() {
        let l = ComplexMatrix::identity(2);
        let p0 = qf(projector(2, 0).unwrap());
        let est = monte_carlo_moments(&l, &p0, &p0, 1_000_000, 17, 0).unwrap();
        assert!(
            (0.99..=1.01).contains(&est.first.mean),
            "mean |φ_1|² = {}",
            est.first.mean
        );
        assert!(est.first.within(1.0, 5.0));
    }

    #[test]
    fn correlated_covariance_is_reproduced() {
        let b = cov(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let l = cholesky_factor(&b).unwrap();
        let (emp, errs) = empirical_covariance(&l, 1_000_000, 23);
        for i in 0..2 {
            for j in 0..2 {
                let (se_re, se_im) = errs[i * 2 + j];
                let d = emp[(i, j)] - b.entry(i, j);
                assert!(d.re.abs() <= 5.0 * se_re, "({i},{j}) re off by {}", d.re / se_re);
                if i != j {
                    assert!(d.im.abs() <= 5.0 * se_im, "({i},{j}) im off by {}", d.im / se_im);
                }
            }
        }
    }

    #[test]
    fn random_moments_match_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..4u32 {
            let dim = 2 + (case as usize % 3);
            let b = random_psd(dim, &mut rng);
            let a1 = qf(random_hermitian(dim, &mut rng));
            let a2 = qf(random_hermitian(dim, &mut rng));
            let l = cholesky_factor(&b).unwrap();
            let est = monte_carlo_moments(&l, &a1, &a2, 200_000, 5, case).unwrap();
            assert!(est.first.within(mean_quadratic(&b, &a1).unwrap(), 5.0));
            assert!(est.second.within(mean_quadratic(&b, &a2).unwrap(), 5.0));
            let q = quartic_moment(&b, &a1, &a2).unwrap();
            assert!(
                est.product.within(q, 5.0),
                "case {case}: z = {}",
                est.product.z_score(q)
            );
        }
    }
}
