//! Zero-mean complex Gaussian fields and the averages that connect them to
//! quantum expectations.
//!
//! A field `φ` with covariance `B = E[φφ†]` gives the quadratic observable
//! `f_A(φ) = ⟨Âφ, φ⟩ = φ†Âφ` the classical average `Tr(BÂ)`, and its
//! dispersion `E‖φ‖² = Tr B` is the factor between classical and quantum
//! averages.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{coefficient_tensor, Generator, OrthonormalBasis};
use crate::operator::{
    ensure_dim, hermitian_part, max_abs, normalize_trace, sqrt_psd, trace_product, CMatrix,
    CVector, DensityOperator, HermitianOperator, PositiveOperator, ZERO,
};
use crate::rng::{standard_complex_normal, substream};

/// Realness tolerance for `f_A(φ)`, relative to `1 + |f_A(φ)|`.
pub const REALNESS_TOL: f64 = 1e-10;

/// `N` samples of a circularly-symmetric complex Gaussian with covariance
/// `B`, stored as the columns of an `n×N` matrix. Sample `k` is drawn from
/// substream `k` of `seed`, so the ensemble is a function of `(B, N, seed)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianEnsemble {
    covariance: PositiveOperator,
    samples: CMatrix,
    seed: u64,
}

impl GaussianEnsemble {
    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn covariance(&self) -> &PositiveOperator {
        &self.covariance
    }

    pub fn samples(&self) -> &CMatrix {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> CVector {
        self.samples.column(k).into_owned()
    }
}

/// `φ = √B z` with `z` standard complex normal (`E zz† = I`, `E zzᵀ = 0`).
pub fn sample_gaussian(b: &PositiveOperator, n_samples: usize, seed: u64) -> Result<GaussianEnsemble> {
    if n_samples == 0 {
        return Err(Error::TooFewSamples {
            required: 1,
            found: 0,
        });
    }
    let n = b.dim();
    let root = sqrt_psd(b)?;
    let mut data = vec![ZERO; n * n_samples];
    data.par_chunks_mut(n)
        .enumerate()
        .for_each_init(
            || vec![ZERO; n],
            |z, (k, column)| {
                let mut rng = substream(seed, k as u64);
                for zj in z.iter_mut() {
                    *zj = standard_complex_normal(&mut rng);
                }
                for (i, out) in column.iter_mut().enumerate() {
                    *out = (0..n).map(|j| root[(i, j)] * z[j]).sum();
                }
            },
        );
    Ok(GaussianEnsemble {
        covariance: b.clone(),
        samples: CMatrix::from_vec(n, n_samples, data),
        seed,
    })
}

/// Hermitian `Â` viewed as the classical variable `φ ↦ ⟨Âφ, φ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObservable(HermitianOperator);

impl QuadraticObservable {
    pub fn new(a: HermitianOperator) -> Self {
        Self(a)
    }

    pub fn identity(n: usize) -> Self {
        Self(HermitianOperator::identity(n))
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `φ†Âφ`, real up to rounding.
    pub fn evaluate(&self, phi: &[Complex64]) -> Complex64 {
        let a = self.0.matrix();
        let n = phi.len();
        let mut acc = ZERO;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += a[(i, j)] * phi[j];
            }
            acc += phi[i].conj() * row;
        }
        acc
    }
}

impl From<HermitianOperator> for QuadraticObservable {
    fn from(a: HermitianOperator) -> Self {
        Self(a)
    }
}

/// Sample mean with standard error `s/√N` (`s` the unbiased sample
/// standard deviation; zero when `N = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl EstimateWithError {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let std_error = if n > 1 {
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            (var / nf).sqrt()
        } else {
            0.0
        };
        Self {
            value: mean,
            std_error,
            n_samples: n,
        }
    }

    /// `|value − reference| ≤ k·std_error`
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.std_error
    }
}

fn observable_values(ens: &GaussianEnsemble, obs: &QuadraticObservable) -> Result<Vec<f64>> {
    ensure_dim(ens.dim(), obs.dim())?;
    let n = ens.dim();
    let data = ens.samples.as_slice();
    data.chunks(n)
        .map(|phi| {
            let f = obs.evaluate(phi);
            if f.im.abs() > REALNESS_TOL * (1.0 + f.re.abs()) {
                Err(Error::NonRealObservable {
                    value: f.re,
                    imag: f.im,
                })
            } else {
                Ok(f.re)
            }
        })
        .collect()
}

fn squared_norms(ens: &GaussianEnsemble) -> Vec<f64> {
    ens.samples
        .column_iter()
        .map(|phi| phi.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Monte Carlo estimate of `E f_A(φ) = Tr(BÂ)`.
pub fn classical_average(ens: &GaussianEnsemble, obs: &QuadraticObservable) -> Result<EstimateWithError> {
    Ok(EstimateWithError::from_values(&observable_values(ens, obs)?))
}

/// `Tr(ρÂ)`
pub fn quantum_average(rho: &DensityOperator, obs: &QuadraticObservable) -> Result<f64> {
    Ok(trace_product(rho.matrix(), obs.matrix())?.re)
}

/// Monte Carlo estimate of `σ² = E‖φ‖² = Tr B`.
pub fn dispersion(ens: &GaussianEnsemble) -> Result<EstimateWithError> {
    if ens.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: ens.len(),
        });
    }
    Ok(EstimateWithError::from_values(&squared_norms(ens)))
}

/// The classical average divided by the dispersion next to the quantum
/// average of the normalized covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingComparison {
    /// `⟨f_A⟩_μ / σ²` estimated from one ensemble.
    pub classical: f64,
    /// `Tr(ρÂ)` with `ρ = B / Tr B`.
    pub quantum: f64,
    /// Delta-method standard error of the ratio estimator.
    pub std_error: f64,
}

impl ScalingComparison {
    pub fn agrees(&self, k: f64) -> bool {
        (self.classical - self.quantum).abs() <= k * self.std_error
    }
}

pub fn scaling_bridge(ens: &GaussianEnsemble, obs: &QuadraticObservable) -> Result<ScalingComparison> {
    let (rho, _) = normalize_trace(ens.covariance())?;
    let quantum = quantum_average(&rho, obs)?;
    let f = observable_values(ens, obs)?;
    let norms = squared_norms(ens);
    let nf = f.len() as f64;
    let mean_f = f.iter().sum::<f64>() / nf;
    let mean_n = norms.iter().sum::<f64>() / nf;
    if !(mean_n > 0.0) {
        return Err(Error::DegenerateTrace { trace: mean_n });
    }
    let ratio = mean_f / mean_n;
    // Var(X̄/Ȳ) ≈ Var(X − R·Y) / (N Ȳ²)
    let std_error = if f.len() > 1 {
        let var = f
            .iter()
            .zip(&norms)
            .map(|(x, y)| (x - ratio * y).powi(2))
            .sum::<f64>()
            / (nf - 1.0);
        (var / nf).sqrt() / mean_n
    } else {
        0.0
    };
    Ok(ScalingComparison {
        classical: ratio,
        quantum,
        std_error,
    })
}

/// `(1/N) Σ φ_k φ_k†` without mean subtraction (the field has zero mean).
pub fn empirical_covariance(ens: &GaussianEnsemble) -> Result<HermitianOperator> {
    if ens.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: ens.len(),
        });
    }
    let s = &ens.samples;
    let m = (s * s.adjoint()).unscale(ens.len() as f64);
    HermitianOperator::new(hermitian_part(&m))
}

/// Largest discrepancy between the moment form of the Gaussian-measure
/// evolution and the operator flow.
///
/// With moments `M_km = E[u_k u_m*]` of the field in `basis` (the basis
/// coordinates of `B`) and coefficient tensor `T` of the linear part, this is
/// `max_ij |Σ_km M_km T[k][m][i][j] + Σ_ij − ⟨e_i|𝓛B + Σ|e_j⟩|`, which
/// vanishes identically; the inhomogeneity only enters affine generators.
pub fn moment_evolution_residual(
    generator: &Generator,
    b: &PositiveOperator,
    basis: &OrthonormalBasis,
) -> Result<f64> {
    ensure_dim(generator.dim(), b.dim())?;
    let tensor = coefficient_tensor(generator.linear(), basis)?;
    let moments = basis.coordinates(b.matrix());
    let mut predicted = tensor.contract(&moments)?;
    if let Some(sigma) = generator.inhomogeneity() {
        predicted += basis.coordinates(sigma.matrix());
    }
    let direct = basis.coordinates(&generator.evaluate(b.matrix())?);
    Ok(max_abs(&(predicted - direct)))
}

/// Residual of the one-dimensional real Gaussian density equation along
/// `B_t = b0·e^{at}`.
///
/// Compares `∂_t p_t(x) = (Ḃ_t/2)(x²/B_t² − 1/B_t) p_t(x)` with
/// `(a/2)·B_t·p_t''(x)` on every grid point and returns the largest absolute
/// difference, which is zero up to rounding.
pub fn density_pde_residual_1d(a: f64, b0: f64, t: f64, xgrid: &[f64]) -> Result<f64> {
    if !(b0 > 0.0) || !b0.is_finite() {
        return Err(Error::NotPositive { min_eigenvalue: b0 });
    }
    let bt = b0 * (a * t).exp();
    let dbt = a * bt;
    let density = |x: f64| (-x * x / (2.0 * bt)).exp() / (2.0 * std::f64::consts::PI * bt).sqrt();
    let mut worst: f64 = 0.0;
    for &x in xgrid {
        let p = density(x);
        let lhs = dbt / 2.0 * (x * x / (bt * bt) - 1.0 / bt) * p;
        // p'' from differentiating p twice: p' = −(x/B)p, p'' = (x²/B² − 1/B)p
        let second = (x / bt) * (x / bt) * p - p / bt;
        let rhs = a / 2.0 * bt * second;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
