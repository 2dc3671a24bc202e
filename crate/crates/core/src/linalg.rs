//! Small dense complex matrices: Hermitian validation, semidefinite Cholesky,
//! projectors and unitary basis changes.
//!
//! Dimensions here are tiny (polarization-like internal degrees of freedom),
//! so everything is stored densely in row-major order and the algorithms are
//! the textbook ones.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for Hermiticity, PSD and unitarity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_ONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is empty (dimension must be at least 1)")]
    Empty,
    #[error("entry array has {len} elements, which is not a perfect square")]
    NotSquare { len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("not Hermitian: |b[{row}][{col}] - conj(b[{col}][{row}])| = {deviation:e} exceeds {tolerance:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
        tolerance: f64,
    },
    #[error("not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPositiveSemidefinite { eigenvalue: f64, tolerance: f64 },
    #[error("trace {trace:e} is not strictly positive")]
    ZeroTrace { trace: f64 },
    #[error("density matrix trace {trace} differs from one")]
    TraceNotOne { trace: f64 },
    #[error("not unitary: max |U U^† - I| = {deviation:e} exceeds {tolerance:e}")]
    NotUnitary { deviation: f64, tolerance: f64 },
    #[error("channel index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("factorization failed: max |L L^† - B| = {residual:e} exceeds {tolerance:e}")]
    FactorizationFailure { residual: f64, tolerance: f64 },
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Builds a matrix from a row-major entry list; the dimension is inferred.
    pub fn from_row_major(entries: Vec<Complex64>) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::Empty);
        }
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(LinalgError::NotSquare { len: entries.len() });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LinalgError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { dim, entries })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.check_dim(rhs.dim)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        self.check_dim(other.dim)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Worst Hermiticity violation as `(row, col, |a_ij - conj(a_ji)|)`.
    pub fn hermitian_defect(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst.2 {
                    worst = (i, j, d);
                }
            }
        }
        worst
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermitian_defect().2 <= rel_tol * self.max_abs()
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.dim).all(|i| ((i + 1)..self.dim).all(|j| self[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    /// `(A + A^†) / 2` with an exactly real diagonal.
    pub fn hermitian_part(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            out[(i, i)] = Complex64::new(self[(i, i)].re, 0.0);
            for j in (i + 1)..self.dim {
                let v = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        out
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        let h = self.hermitian_part();
        DMatrix::from_fn(self.dim, self.dim, |i, j| h[(i, j)])
    }

    fn check_dim(&self, other: usize) -> Result<(), LinalgError> {
        if self.dim == other {
            Ok(())
        } else {
            Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                found: other,
            })
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[Complex64]> = self.entries.chunks(self.dim).collect();
        f.debug_struct("ComplexMatrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

/// Validated Hermitian positive semidefinite covariance operator `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceOperator {
    matrix: ComplexMatrix,
    trace: f64,
}

impl CovarianceOperator {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Diagonal entry `b_jj`.
    pub fn diag(&self, j: usize) -> f64 {
        self.matrix[(j, j)].re
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// `c·B` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, LinalgError> {
        validate_covariance(&self.matrix.scale(c))
    }
}

/// Trace-one Hermitian PSD matrix `ρ = B / Tr B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// Born probability `ρ_ii = Tr ρ Ĉ_i`.
    pub fn population(&self, i: usize) -> f64 {
        self.matrix[(i, i)].re
    }

    /// Builds a density matrix directly, checking Hermiticity, PSD and unit trace.
    pub fn new(matrix: ComplexMatrix) -> Result<Self, LinalgError> {
        let cov = validate_covariance(&matrix)?;
        let deviation = (cov.trace - 1.0).abs();
        if deviation > TRACE_ONE_TOL {
            return Err(LinalgError::TraceNotOne { trace: cov.trace });
        }
        Ok(Self { matrix: cov.matrix })
    }
}

/// Checks Hermiticity, positive semidefiniteness and positive trace.
///
/// The accepted matrix is replaced by its exact Hermitian part, which differs
/// from the input by at most the Hermiticity tolerance.
pub fn validate_covariance(raw: &ComplexMatrix) -> Result<CovarianceOperator, LinalgError> {
    let scale = raw.max_abs();
    let (row, col, deviation) = raw.hermitian_defect();
    let tolerance = HERMITIAN_TOL * scale;
    if deviation > tolerance {
        return Err(LinalgError::NotHermitian {
            row,
            col,
            deviation,
            tolerance,
        });
    }
    let matrix = raw.hermitian_part();
    let trace = matrix.trace().re;

    let psd_tol = HERMITIAN_TOL * trace.abs();
    let smallest = matrix.hermitian_eigenvalues()[0];
    if smallest < -psd_tol {
        return Err(LinalgError::NotPositiveSemidefinite {
            eigenvalue: smallest,
            tolerance: psd_tol,
        });
    }
    if !(trace > 0.0) {
        return Err(LinalgError::ZeroTrace { trace });
    }
    Ok(CovarianceOperator { matrix, trace })
}

pub fn normalize_to_density(b: &CovarianceOperator) -> DensityMatrix {
    let inv = b.trace;
    let mut matrix = b.matrix.clone();
    for z in &mut matrix.entries {
        *z /= inv;
    }
    DensityMatrix { matrix }
}

/// Lower-triangular `L` with `L L^† = B`.
///
/// Runs an outer-product Cholesky that zeroes any column whose pivot falls
/// inside the PSD tolerance, which handles rank-deficient `B`. If the result
/// does not reproduce `B`, falls back to an eigen factor reduced to lower
/// triangular form by an LQ decomposition.
pub fn cholesky_factor(b: &CovarianceOperator) -> Result<ComplexMatrix, LinalgError> {
    let tolerance = HERMITIAN_TOL * b.matrix.max_abs();
    let l = semidefinite_cholesky(&b.matrix, HERMITIAN_TOL * b.trace);
    let residual = product_residual(&l, &b.matrix);
    if residual <= tolerance {
        return Ok(l);
    }
    let l = eigen_lower_factor(&b.matrix);
    let residual = product_residual(&l, &b.matrix);
    if residual <= tolerance {
        Ok(l)
    } else {
        Err(LinalgError::FactorizationFailure { residual, tolerance })
    }
}

fn product_residual(l: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let llh = l.matmul(&l.adjoint()).expect("same dimension");
    llh.max_abs_diff(b).expect("same dimension")
}

fn semidefinite_cholesky(b: &ComplexMatrix, pivot_tol: f64) -> ComplexMatrix {
    let n = b.dim;
    let mut l = ComplexMatrix::zeros(n);
    for j in 0..n {
        let mut d = b[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= pivot_tol {
            // Zero Schur pivot of a PSD matrix: the whole column vanishes.
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    l
}

fn eigen_lower_factor(b: &ComplexMatrix) -> ComplexMatrix {
    let n = b.dim;
    let eig = b.to_nalgebra().symmetric_eigen();
    // F = V sqrt(Λ) with negative round-off eigenvalues clamped.
    let mut f = ComplexMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            f[(i, k)] = eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt();
        }
    }
    // F^† = Q R  =>  F F^† = R^† R, and R^† is lower triangular.
    let (_, r) = gram_schmidt_qr(&f.adjoint());
    r.adjoint()
}

/// Modified Gram–Schmidt `A = Q R` with `R` upper triangular.
///
/// Numerically dependent columns get a zero `q` and a zero diagonal in `R`,
/// so `A = Q R` and `R^† R = A^† A` still hold.
pub fn gram_schmidt_qr(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.dim;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut q = ComplexMatrix::zeros(n);
    let mut r = ComplexMatrix::zeros(n);
    for k in 0..n {
        let mut v: Vec<Complex64> = (0..n).map(|i| a[(i, k)]).collect();
        // Two passes keep the basis orthogonal to working precision.
        for _ in 0..2 {
            for p in 0..k {
                let proj: Complex64 = (0..n).map(|i| q[(i, p)].conj() * v[i]).sum();
                r[(p, k)] += proj;
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi -= q[(i, p)] * proj;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= 1e-14 * scale {
            continue;
        }
        r[(k, k)] = Complex64::new(norm, 0.0);
        for (i, vi) in v.iter().enumerate() {
            q[(i, k)] = vi / norm;
        }
    }
    (q, r)
}

/// Orthogonal projector `|e_k⟩⟨e_k|` onto basis vector `k`.
pub fn projector(dim: usize, k: usize) -> Result<ComplexMatrix, LinalgError> {
    if dim == 0 {
        return Err(LinalgError::Empty);
    }
    if k >= dim {
        return Err(LinalgError::IndexOutOfRange { index: k, dim });
    }
    let mut p = ComplexMatrix::zeros(dim);
    p[(k, k)] = Complex64::new(1.0, 0.0);
    Ok(p)
}

/// Max entrywise deviation of `U U^†` from the identity.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let uuh = u.matmul(&u.adjoint()).expect("same dimension");
    uuh.max_abs_diff(&ComplexMatrix::identity(u.dim))
        .expect("same dimension")
}

/// Basis change `U B U^†`.
pub fn conjugate_by_unitary(b: &CovarianceOperator, u: &ComplexMatrix) -> Result<CovarianceOperator, LinalgError> {
    b.matrix.check_dim(u.dim)?;
    let deviation = unitarity_defect(u);
    if deviation > HERMITIAN_TOL {
        return Err(LinalgError::NotUnitary {
            deviation,
            tolerance: HERMITIAN_TOL,
        });
    }
    let rotated = u.matmul(&b.matrix)?.matmul(&u.adjoint())?.hermitian_part();
    let trace = rotated.trace().re;
    Ok(CovarianceOperator { matrix: rotated, trace })
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix: independent standard complex normal entries.
pub fn random_ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let entries = (0..dim * dim).map(|_| complex_normal(rng)).collect();
    ComplexMatrix { dim, entries }
}

/// Random PSD matrix `G G^†` with `G` Ginibre.
pub fn random_psd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CovarianceOperator {
    let g = random_ginibre(dim, rng);
    let m = g.matmul(&g.adjoint()).expect("same dimension");
    validate_covariance(&m).expect("G G^† is Hermitian PSD")
}

/// Random Hermitian matrix `(G + G^†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    random_ginibre(dim, rng).hermitian_part()
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix,
/// with the phases of `R`'s diagonal absorbed into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let (mut q, r) = gram_schmidt_qr(&random_ginibre(dim, rng));
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, k)] *= phase;
        }
    }
    q
}
