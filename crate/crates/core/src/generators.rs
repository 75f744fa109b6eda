//! Superoperator generators in the column-stacking representation.
//!
//! A matrix `X` is vectorized by stacking its columns, so entry `(i, j)` lands
//! at index `i + n·j`, and the map `X ↦ A X B` is the Kronecker product
//! `Bᵀ ⊗ A`. nalgebra stores matrices column-major, so vectorizing is a
//! reinterpretation of the storage.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::operator::{
    ensure_dim, hermitian_part, max_abs, validate_square, CMatrix, CVector, HermitianOperator,
    I, ONE, ZERO,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Zero,
    Identity,
    Scaling,
    Commutator,
    Similarity,
    Gksl,
    Affine,
    Propagator,
    Custom,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Zero => "zero",
            GeneratorKind::Identity => "identity",
            GeneratorKind::Scaling => "scaling",
            GeneratorKind::Commutator => "commutator",
            GeneratorKind::Similarity => "similarity",
            GeneratorKind::Gksl => "gksl",
            GeneratorKind::Affine => "affine",
            GeneratorKind::Propagator => "propagator",
            GeneratorKind::Custom => "custom",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// Matrix of the map `X ↦ A X B`.
pub fn sandwich(a: &CMatrix, b: &CMatrix) -> CMatrix {
    b.transpose().kronecker(a)
}

/// A linear map on `n×n` matrices stored as an `n²×n²` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: CMatrix,
    kind: GeneratorKind,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix, kind: GeneratorKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        let n2 = dim * dim;
        validate_square(&matrix)?;
        ensure_dim(n2, matrix.nrows())?;
        Ok(Self { dim, matrix, kind })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            dim: n,
            matrix: CMatrix::zeros(n * n, n * n),
            kind: GeneratorKind::Zero,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            dim: n,
            matrix: CMatrix::identity(n * n, n * n),
            kind: GeneratorKind::Identity,
        }
    }

    /// `B ↦ a·B`
    pub fn scaling(n: usize, a: f64) -> Self {
        Self {
            dim: n,
            matrix: CMatrix::identity(n * n, n * n).scale(a),
            kind: GeneratorKind::Scaling,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn apply(&self, m: &CMatrix) -> Result<CMatrix> {
        ensure_dim(self.dim, m.nrows())?;
        ensure_dim(self.dim, m.ncols())?;
        Ok(unvectorize(&(&self.matrix * vectorize(m)), self.dim))
    }

    /// The semigroup element `e^{t𝓛}`.
    pub fn exp(&self, t: f64) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: expm(&self.matrix.scale(t)),
            kind: GeneratorKind::Propagator,
        }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Superoperator) -> Result<Superoperator> {
        ensure_dim(self.dim, other.dim)?;
        Ok(Superoperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
            kind: GeneratorKind::Custom,
        })
    }

    /// Largest `|Tr 𝓛(E_ab)|` over matrix units.
    pub fn trace_defect(&self) -> f64 {
        // Tr 𝓛(E_ab) is the sum of the rows of the matrix that hold diagonal
        // entries, taken at column a + n·b.
        let n = self.dim;
        (0..n * n)
            .map(|col| {
                (0..n)
                    .map(|d| self.matrix[(d + n * d, col)])
                    .sum::<Complex64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpOperator {
    pub operator: CMatrix,
    pub rate: f64,
}

/// Hamiltonian plus rated jump operators (ħ = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct GkslSpec {
    pub hamiltonian: HermitianOperator,
    pub jumps: Vec<JumpOperator>,
}

impl GkslSpec {
    pub fn validate(&self) -> Result<usize> {
        let n = self.hamiltonian.dim();
        for (index, jump) in self.jumps.iter().enumerate() {
            validate_square(&jump.operator)?;
            ensure_dim(n, jump.operator.nrows())?;
            if !(jump.rate >= 0.0) || !jump.rate.is_finite() {
                return Err(Error::NegativeRate {
                    index,
                    rate: jump.rate,
                });
            }
        }
        Ok(n)
    }
}

/// `𝓛B = −i[H, B] + Σ_k γ_k (L_k B L_k† − ½{L_k† L_k, B})`
pub fn build_gksl(spec: &GkslSpec) -> Result<Superoperator> {
    let n = spec.validate()?;
    let ident = CMatrix::identity(n, n);
    let mut matrix = build_commutator(&spec.hamiltonian).matrix;
    for jump in &spec.jumps {
        if jump.rate == 0.0 {
            continue;
        }
        let l = &jump.operator;
        let l_dag = l.adjoint();
        let ldl = &l_dag * l;
        let term = sandwich(l, &l_dag)
            - sandwich(&ldl, &ident).scale(0.5)
            - sandwich(&ident, &ldl).scale(0.5);
        matrix += term.scale(jump.rate);
    }
    Ok(Superoperator {
        dim: n,
        matrix,
        kind: GeneratorKind::Gksl,
    })
}

/// `B ↦ −i[H, B]`
pub fn build_commutator(h: &HermitianOperator) -> Superoperator {
    let n = h.dim();
    let ident = CMatrix::identity(n, n);
    let m = h.matrix();
    let matrix = (sandwich(m, &ident) - sandwich(&ident, m)).map(|z| z * -I);
    Superoperator {
        dim: n,
        matrix,
        kind: GeneratorKind::Commutator,
    }
}

/// `B ↦ A B + B A†`
pub fn build_similarity(a: &CMatrix) -> Result<Superoperator> {
    let n = validate_square(a)?;
    let ident = CMatrix::identity(n, n);
    let matrix = sandwich(a, &ident) + sandwich(&ident, &a.adjoint());
    Ok(Superoperator {
        dim: n,
        matrix,
        kind: GeneratorKind::Similarity,
    })
}

/// `B ↦ 𝓛B + Σ`
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGenerator {
    linear: Superoperator,
    inhomogeneity: HermitianOperator,
}

pub fn build_affine(linear: Superoperator, sigma: HermitianOperator) -> Result<AffineGenerator> {
    ensure_dim(linear.dim(), sigma.dim())?;
    Ok(AffineGenerator {
        linear,
        inhomogeneity: sigma,
    })
}

impl AffineGenerator {
    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn linear(&self) -> &Superoperator {
        &self.linear
    }

    pub fn inhomogeneity(&self) -> &HermitianOperator {
        &self.inhomogeneity
    }

    pub fn evaluate(&self, b: &CMatrix) -> Result<CMatrix> {
        Ok(self.linear.apply(b)? + self.inhomogeneity.matrix())
    }

    /// `(n²+1)`-dimensional homogeneous embedding `[[𝓛, vec Σ], [0, 0]]`,
    /// whose exponential carries both the propagator and the accumulated
    /// inhomogeneity in its last column.
    pub fn homogeneous_embedding(&self) -> CMatrix {
        let n2 = self.dim() * self.dim();
        let mut m = CMatrix::zeros(n2 + 1, n2 + 1);
        m.view_mut((0, 0), (n2, n2)).copy_from(self.linear.matrix());
        m.view_mut((0, n2), (n2, 1))
            .copy_from(&vectorize(self.inhomogeneity.matrix()));
        m
    }
}

/// Either a linear or an affine generator of covariance dynamics.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Linear(Superoperator),
    Affine(AffineGenerator),
}

impl Generator {
    pub fn dim(&self) -> usize {
        match self {
            Generator::Linear(l) => l.dim(),
            Generator::Affine(a) => a.dim(),
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        match self {
            Generator::Linear(l) => l.kind(),
            Generator::Affine(_) => GeneratorKind::Affine,
        }
    }

    pub fn linear(&self) -> &Superoperator {
        match self {
            Generator::Linear(l) => l,
            Generator::Affine(a) => a.linear(),
        }
    }

    pub fn inhomogeneity(&self) -> Option<&HermitianOperator> {
        match self {
            Generator::Linear(_) => None,
            Generator::Affine(a) => Some(a.inhomogeneity()),
        }
    }

    pub fn evaluate(&self, b: &CMatrix) -> Result<CMatrix> {
        match self {
            Generator::Linear(l) => l.apply(b),
            Generator::Affine(a) => a.evaluate(b),
        }
    }
}

impl From<Superoperator> for Generator {
    fn from(l: Superoperator) -> Self {
        Generator::Linear(l)
    }
}

impl From<AffineGenerator> for Generator {
    fn from(a: AffineGenerator) -> Self {
        Generator::Affine(a)
    }
}

/// Piecewise-constant schedule of `(duration, value)` segments starting at
/// time zero. The final segment extends past its nominal end.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule<T> {
    segments: Vec<(f64, T)>,
}

impl<T> Schedule<T> {
    pub fn new(segments: Vec<(f64, T)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        for (k, (duration, _)) in segments.iter().enumerate() {
            if !(*duration > 0.0) || !duration.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} has non-positive duration {duration}"
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(value: T) -> Self {
        Self {
            segments: vec![(f64::INFINITY, value)],
        }
    }

    pub fn segments(&self) -> &[(f64, T)] {
        &self.segments
    }

    /// Index of the segment active on `[s, s + ε)`.
    pub fn segment_index(&self, s: f64) -> usize {
        let mut end = 0.0;
        for (k, (duration, _)) in self.segments.iter().enumerate() {
            end += duration;
            if s < end {
                return k;
            }
        }
        self.segments.len() - 1
    }

    pub fn at(&self, s: f64) -> &T {
        &self.segments[self.segment_index(s)].1
    }

    /// Segment end times strictly inside `(from, to)`.
    pub fn breakpoints_between(&self, from: f64, to: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut end = 0.0;
        for (duration, _) in &self.segments[..self.segments.len() - 1] {
            end += duration;
            if end > from && end < to {
                out.push(end);
            }
        }
        out
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<Schedule<U>> {
        let segments = self
            .segments
            .iter()
            .map(|(d, v)| Ok((*d, f(v)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule { segments })
    }
}

/// Orthonormal basis of the state space, stored as the columns of a unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    vectors: CMatrix,
}

pub const ORTHONORMAL_TOL: f64 = 1e-10;

impl OrthonormalBasis {
    pub fn new(vectors: CMatrix) -> Result<Self> {
        let n = validate_square(&vectors)?;
        let gram = vectors.adjoint() * &vectors;
        let deviation = max_abs(&(gram - CMatrix::identity(n, n)));
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { vectors })
    }

    pub fn standard(n: usize) -> Self {
        Self {
            vectors: CMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// `|e_k⟩⟨e_m|`
    pub fn unit(&self, k: usize, m: usize) -> CMatrix {
        self.vectors.column(k) * self.vectors.column(m).adjoint()
    }

    /// Matrix elements `⟨e_i| X |e_j⟩`.
    pub fn coordinates(&self, x: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * x * &self.vectors
    }
}

/// Hilbert–Schmidt matrix elements of a generator,
/// `T[k][m][i][j] = Tr(E_ij† 𝓛(E_km))` with `E_km = |e_k⟩⟨e_m|`.
///
/// With this slot order, contracting against the coordinates `B_km` of any
/// matrix reproduces the coordinates of `𝓛B`:
/// `Σ_km B_km T[k][m][i][j] = (𝓛B)_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTensor {
    dim: usize,
    values: Vec<Complex64>,
}

impl CoefficientTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, k: usize, m: usize, i: usize, j: usize) -> usize {
        let n = self.dim;
        ((k * n + m) * n + i) * n + j
    }

    pub fn get(&self, k: usize, m: usize, i: usize, j: usize) -> Complex64 {
        self.values[self.index(k, m, i, j)]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `C_ij = Σ_km moments_km · T[k][m][i][j]`
    pub fn contract(&self, moments: &CMatrix) -> Result<CMatrix> {
        let n = self.dim;
        ensure_dim(n, moments.nrows())?;
        ensure_dim(n, moments.ncols())?;
        let mut out = CMatrix::zeros(n, n);
        for k in 0..n {
            for m in 0..n {
                let w = moments[(k, m)];
                if w == ZERO {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] += w * self.get(k, m, i, j);
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn coefficient_tensor(
    l: &Superoperator,
    basis: &OrthonormalBasis,
) -> Result<CoefficientTensor> {
    let n = l.dim();
    ensure_dim(n, basis.dim())?;
    let mut values = vec![ZERO; n * n * n * n];
    for k in 0..n {
        for m in 0..n {
            let image = basis.coordinates(&l.apply(&basis.unit(k, m))?);
            for i in 0..n {
                for j in 0..n {
                    values[((k * n + m) * n + i) * n + j] = image[(i, j)];
                }
            }
        }
    }
    Ok(CoefficientTensor { dim: n, values })
}

/// Choi matrix `Σ_ab E_ab ⊗ Φ(E_ab)` of a map on `n×n` matrices.
pub fn choi_matrix(map: &Superoperator) -> CMatrix {
    let n = map.dim();
    let mut choi = CMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            let mut unit = CMatrix::zeros(n, n);
            unit[(a, b)] = ONE;
            let image = map
                .apply(&unit)
                .expect("matrix unit has the map's dimension");
            choi.view_mut((a * n, b * n), (n, n)).copy_from(&image);
        }
    }
    choi
}

/// Whether the Choi matrix of `map` is PSD within `tol·(1 + ‖C‖_max)`;
/// also returns its smallest eigenvalue.
pub fn is_completely_positive(map: &Superoperator, tol: f64) -> (bool, f64) {
    let choi = choi_matrix(map);
    let lambda = hermitian_part(&choi)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    (lambda >= -tol * (1.0 + max_abs(&choi)), lambda)
}
