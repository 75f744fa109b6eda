//! Dense complex operators on a finite-dimensional Hilbert space.
//!
//! Three validated wrappers carry escalating invariants:
//! [`HermitianOperator`] ⊂ [`PositiveOperator`] ⊂ [`DensityOperator`].
//! Tolerances are relative to `1 + ‖M‖_max`.
//!
//! The inner product on the state space is linear in the first slot,
//! `⟨x, y⟩ = Σ x_i conj(y_i)`, so a covariance operator is the second-moment
//! matrix `B = E[φ φ†]`. The Hilbert–Schmidt product is `Tr(X† Y)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_DEGENERACY_TOL: f64 = 1e-14;
pub const UNIT_TRACE_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Checks that `m` is a non-empty square matrix with finite entries and
/// returns its dimension.
pub fn validate_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::EmptyDimension);
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(m.nrows())
}

pub fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `(M + M†) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `[A, B] = AB − BA`
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::NAN)
}

fn psd_threshold(m: &CMatrix, tol: f64) -> f64 {
    -tol * (1.0 + max_abs(m))
}

/// Hilbert–Schmidt inner product `Tr(X† Y)`, conjugate-linear in `x`.
pub fn hs_inner(x: &CMatrix, y: &CMatrix) -> Result<Complex64> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.nrows(),
        });
    }
    Ok(x.dotc(y))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        validate_square(&m)?;
        let deviation = hermitian_deviation(&m);
        if deviation > HERMITIAN_TOL * (1.0 + max_abs(&m)) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let v = CVector::from_iterator(diag.len(), diag.iter().map(|&d| Complex64::new(d, 0.0)));
        Self::new(CMatrix::from_diagonal(&v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

impl AsRef<CMatrix> for HermitianOperator {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Positive semidefinite Hermitian operator; houses covariance operators.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveOperator(HermitianOperator);

impl PositiveOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::from_hermitian(HermitianOperator::new(m)?)
    }

    pub fn from_hermitian(h: HermitianOperator) -> Result<Self> {
        let (ok, min_eigenvalue) = is_positive(&h, PSD_TOL);
        if !ok {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self(h))
    }

    /// `S S†` is positive for any square `S`.
    pub fn gram(s: &CMatrix) -> Result<Self> {
        validate_square(s)?;
        Self::new(hermitian_part(&(s * s.adjoint())))
    }

    pub fn zeros(n: usize) -> Self {
        Self(HermitianOperator::zeros(n))
    }

    pub fn identity(n: usize) -> Self {
        Self(HermitianOperator::identity(n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_hermitian(HermitianOperator::from_real_diagonal(diag)?)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0.into_matrix()
    }

    pub fn trace(&self) -> f64 {
        trace(self.matrix()).re
    }
}

impl AsRef<CMatrix> for PositiveOperator {
    fn as_ref(&self) -> &CMatrix {
        self.matrix()
    }
}

/// Unit-trace positive operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(PositiveOperator);

impl DensityOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::from_positive(PositiveOperator::new(m)?)
    }

    pub fn from_positive(p: PositiveOperator) -> Result<Self> {
        let tr = p.trace();
        if (tr - 1.0).abs() > UNIT_TRACE_TOL {
            return Err(Error::NotUnitTrace { trace: tr });
        }
        Ok(Self(p))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(PositiveOperator(HermitianOperator(
            CMatrix::identity(n, n).unscale(n as f64),
        )))
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `psi`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateTrace { trace: 0.0 });
        }
        let v = psi.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn as_positive(&self) -> &PositiveOperator {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0.into_matrix()
    }
}

impl AsRef<CMatrix> for DensityOperator {
    fn as_ref(&self) -> &CMatrix {
        self.matrix()
    }
}

/// Returns whether `λ_min ≥ −tol·(1 + ‖M‖_max)` together with `λ_min`.
pub fn is_positive(m: &HermitianOperator, tol: f64) -> (bool, f64) {
    let lambda_min = m.min_eigenvalue();
    (lambda_min >= psd_threshold(m.matrix(), tol), lambda_min)
}

/// Scales `B` to unit trace and returns the trace it had.
pub fn normalize_trace(b: &PositiveOperator) -> Result<(DensityOperator, f64)> {
    let tr = b.trace();
    if tr <= TRACE_DEGENERACY_TOL * (1.0 + max_abs(b.matrix())) {
        return Err(Error::DegenerateTrace { trace: tr });
    }
    let rho = DensityOperator(PositiveOperator(HermitianOperator(b.matrix().unscale(tr))));
    Ok((rho, tr))
}

/// Hermitian positive square root. Eigenvalues within tolerance below zero
/// are clamped to zero.
pub fn sqrt_psd(b: &PositiveOperator) -> Result<CMatrix> {
    let h = hermitian_part(b.matrix());
    let threshold = psd_threshold(&h, PSD_TOL);
    let eig = h.symmetric_eigen();
    let n = b.dim();
    let mut roots = CVector::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < threshold {
            return Err(Error::NotPositive {
                min_eigenvalue: lambda,
            });
        }
        roots[k] = Complex64::new(lambda.max(0.0).sqrt(), 0.0);
    }
    let v = &eig.eigenvectors;
    let s = v * CMatrix::from_diagonal(&roots) * v.adjoint();
    Ok(hermitian_part(&s))
}

/// `Tr(B Â)` for Hermitian arguments; the result is real up to rounding.
pub fn trace_product(b: &CMatrix, a: &CMatrix) -> Result<Complex64> {
    ensure_dim(b.nrows(), a.nrows())?;
    // Tr(BA) = Σ_ij B_ij A_ji without forming the product.
    Ok(b.transpose().dot(a))
}

/// Pauli matrices and other fixed operators used throughout the tests and
/// example scenarios.
pub mod pauli {
    use super::*;

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }
}
