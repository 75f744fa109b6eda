//! Path ensembles for Brownian motion with covariance `Σ` and for the linear
//! SDE `dφ = A_t φ dt + √Σ dw`, `φ_0 = ξ_0 ~ N(0, B_0)`, plus the covariance
//! ODE `dB/dt = A_t B + B A_t† + Σ` they should reproduce.
//!
//! Brownian increments are circularly-symmetric complex Gaussians with
//! `E[Δw Δw†] = dt·I`. Path `k` draws `ξ_0` and then every increment from
//! substream `k` of the run seed.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{propagate_covariance_piecewise, Method, OperatorTrajectory, TimeGrid};
use crate::error::{Error, Result};
use crate::generators::{build_affine, build_similarity, Generator, Schedule};
use crate::operator::{
    ensure_dim, hermitian_part, sqrt_psd, trace, validate_square, CMatrix, HermitianOperator,
    PositiveOperator, ZERO,
};
use crate::rng::{standard_complex_normal, substream};
use crate::table;

/// Drift schedule, diffusion covariance and initial covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct SdeSpec {
    drift: Schedule<CMatrix>,
    diffusion: PositiveOperator,
    initial_covariance: PositiveOperator,
}

impl SdeSpec {
    pub fn new(
        drift: Schedule<CMatrix>,
        diffusion: PositiveOperator,
        initial_covariance: PositiveOperator,
    ) -> Result<Self> {
        let n = diffusion.dim();
        ensure_dim(n, initial_covariance.dim())?;
        for (_, a) in drift.segments() {
            ensure_dim(n, validate_square(a)?)?;
        }
        Ok(Self {
            drift,
            diffusion,
            initial_covariance,
        })
    }

    /// Zero drift: `w_Σ(t) = ξ_0 + √Σ w(t)`.
    pub fn brownian(diffusion: PositiveOperator, initial_covariance: PositiveOperator) -> Result<Self> {
        let n = diffusion.dim();
        Self::new(Schedule::constant(CMatrix::zeros(n, n)), diffusion, initial_covariance)
    }

    pub fn constant_drift(
        a: CMatrix,
        diffusion: PositiveOperator,
        initial_covariance: PositiveOperator,
    ) -> Result<Self> {
        Self::new(Schedule::constant(a), diffusion, initial_covariance)
    }

    pub fn dim(&self) -> usize {
        self.diffusion.dim()
    }

    pub fn drift(&self) -> &Schedule<CMatrix> {
        &self.drift
    }

    pub fn diffusion(&self) -> &PositiveOperator {
        &self.diffusion
    }

    pub fn initial_covariance(&self) -> &PositiveOperator {
        &self.initial_covariance
    }
}

/// Which grid points a simulation keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recording {
    All,
    Indices(Vec<usize>),
}

impl Recording {
    fn resolve(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        match self {
            Recording::All => Ok((0..grid.len()).collect()),
            Recording::Indices(idx) => {
                let mut idx = idx.clone();
                idx.sort_unstable();
                idx.dedup();
                if let Some(&bad) = idx.iter().find(|&&k| k >= grid.len()) {
                    return Err(Error::IndexNotRecorded { index: bad });
                }
                Ok(idx)
            }
        }
    }
}

/// States of `N` paths at the recorded grid indices; `snapshots[r]` is the
/// `n×N` matrix of all paths at `recorded[r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    spec: SdeSpec,
    grid: TimeGrid,
    seed: u64,
    n_paths: usize,
    recorded: Vec<usize>,
    snapshots: Vec<CMatrix>,
}

impl PathEnsemble {
    pub fn spec(&self) -> &SdeSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn recorded_indices(&self) -> &[usize] {
        &self.recorded
    }

    pub fn snapshot(&self, t_index: usize) -> Result<&CMatrix> {
        self.recorded
            .binary_search(&t_index)
            .map(|r| &self.snapshots[r])
            .map_err(|_| Error::IndexNotRecorded { index: t_index })
    }

    /// One row per recorded time: `t`, empirical covariance entries, trace.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.spec.dim();
        let mut header = vec!["t".to_string()];
        header.extend(table::matrix_header("", n));
        header.push("trace".into());
        writeln!(out, "{}", header.join(","))?;
        for &k in &self.recorded {
            let cov = empirical_covariance_at(self, k).map_err(io::Error::other)?;
            let mut row = vec![table::float(self.grid.time(k))];
            row.extend(table::matrix_cells(cov.matrix()));
            row.push(table::float(trace(cov.matrix()).re));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Long format: `path, t, re_0, im_0, ...` for every recorded time.
    pub fn write_paths_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.spec.dim();
        let mut header = vec!["path".to_string(), "t".to_string()];
        for i in 0..n {
            header.push(format!("re_{i}"));
            header.push(format!("im_{i}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for p in 0..self.n_paths {
            for (r, &k) in self.recorded.iter().enumerate() {
                let mut row = vec![p.to_string(), table::float(self.grid.time(k))];
                for i in 0..n {
                    let z = self.snapshots[r][(i, p)];
                    row.push(table::float(z.re));
                    row.push(table::float(z.im));
                }
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

fn flat_row_major(m: &CMatrix) -> Vec<Complex64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

/// `out = m·v` for a row-major flat `n×n` matrix.
#[inline]
fn matvec_add(m: &[Complex64], v: &[Complex64], out: &mut [Complex64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * n..(i + 1) * n];
        let mut acc = ZERO;
        for j in 0..n {
            acc += row[j] * v[j];
        }
        *o += acc;
    }
}

/// Euler–Maruyama: `φ_{k+1} = φ_k + A(t_k)φ_k dt + √Σ √dt z_k`.
pub fn simulate_linear_sde(
    spec: &SdeSpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    recording: &Recording,
) -> Result<PathEnsemble> {
    grid.validate()?;
    if n_paths == 0 {
        return Err(Error::TooFewSamples {
            required: 1,
            found: 0,
        });
    }
    let n = spec.dim();
    let dt = grid.dt();
    let recorded = recording.resolve(grid)?;

    let init_root = flat_row_major(&sqrt_psd(&spec.initial_covariance)?);
    let noise_root = flat_row_major(&sqrt_psd(&spec.diffusion)?.scale(dt.sqrt()));
    let noiseless = noise_root.iter().all(|z| *z == ZERO);

    // A·dt per segment, and the segment active at each step's left endpoint.
    let drift_dt: Vec<Option<Vec<Complex64>>> = spec
        .drift
        .segments()
        .iter()
        .map(|(_, a)| (!a.iter().all(|z| *z == ZERO)).then(|| flat_row_major(&a.scale(dt))))
        .collect();
    let step_segment: Vec<usize> = (0..grid.steps)
        .map(|k| spec.drift.segment_index(k as f64 * dt))
        .collect();

    let per_path: Vec<Vec<Complex64>> = (0..n_paths)
        .into_par_iter()
        .map_init(
            || (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]),
            |(phi, next, z), p| {
                let mut rng = substream(seed, p as u64);
                let mut out = Vec::with_capacity(recorded.len() * n);
                let mut cursor = 0;

                for zj in z.iter_mut() {
                    *zj = standard_complex_normal(&mut rng);
                }
                phi.fill(ZERO);
                matvec_add(&init_root, z, phi);
                if recorded.first() == Some(&0) {
                    out.extend_from_slice(phi);
                    cursor = 1;
                }

                for (k, &seg) in step_segment.iter().enumerate() {
                    next.copy_from_slice(phi);
                    if let Some(a) = &drift_dt[seg] {
                        matvec_add(a, phi, next);
                    }
                    // Increments are drawn even when Σ = 0 so that paths of
                    // the same seed share their ξ_0 across specs.
                    for zj in z.iter_mut() {
                        *zj = standard_complex_normal(&mut rng);
                    }
                    if !noiseless {
                        matvec_add(&noise_root, z, next);
                    }
                    std::mem::swap(phi, next);
                    if recorded.get(cursor) == Some(&(k + 1)) {
                        out.extend_from_slice(phi);
                        cursor += 1;
                    }
                }
                out
            },
        )
        .collect();

    let snapshots = (0..recorded.len())
        .map(|r| CMatrix::from_fn(n, n_paths, |i, p| per_path[p][r * n + i]))
        .collect();
    Ok(PathEnsemble {
        spec: spec.clone(),
        grid: *grid,
        seed,
        n_paths,
        recorded,
        snapshots,
    })
}

/// Paths of `w_Σ(t) = ξ_0 + √Σ w(t)` with `ξ_0 ~ N(0, B_0)` independent of `w`.
pub fn simulate_brownian(
    sigma: &PositiveOperator,
    b0: &PositiveOperator,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    recording: &Recording,
) -> Result<PathEnsemble> {
    let spec = SdeSpec::brownian(sigma.clone(), b0.clone())?;
    simulate_linear_sde(&spec, grid, n_paths, seed, recording)
}

/// Solves `dB/dt = A_t B + B A_t† + Σ` exactly per drift segment.
pub fn ou_covariance_ode(spec: &SdeSpec, grid: &TimeGrid) -> Result<OperatorTrajectory> {
    let sigma = spec.diffusion.as_hermitian().clone();
    let schedule: Schedule<Generator> = spec
        .drift
        .map(|a| Ok(build_affine(build_similarity(a)?, sigma.clone())?.into()))?;
    propagate_covariance_piecewise(&schedule, &spec.initial_covariance, grid, Method::Exact)
}

/// `(1/N) Σ_k φ_k(t) φ_k(t)†` at a recorded grid index.
pub fn empirical_covariance_at(ens: &PathEnsemble, t_index: usize) -> Result<HermitianOperator> {
    let s = ens.snapshot(t_index)?;
    let m = (s * s.adjoint()).unscale(ens.n_paths as f64);
    HermitianOperator::new(hermitian_part(&m))
}

/// `(1/N) Σ_k ξ_0 (Δw_Σ/√dt)†` for the first increment, which has the
/// scale of a covariance entry and vanishes in expectation because the
/// initial value is independent of the noise. Needs indices 0 and 1.
pub fn initial_increment_cross_covariance(ens: &PathEnsemble) -> Result<CMatrix> {
    let x0 = ens.snapshot(0)?;
    let x1 = ens.snapshot(1)?;
    let dt = ens.grid.dt();
    let a = ens.spec.drift.at(0.0);
    let increments = (x1 - x0 - (a * x0).scale(dt)).unscale(dt.sqrt());
    Ok((x0 * increments.adjoint()).unscale(ens.n_paths as f64))
}

/// `max_k |‖φ_k(t)‖² / ‖φ_k(0)‖² − 1|` over paths with nonzero start.
pub fn max_norm_drift(ens: &PathEnsemble, t_index: usize) -> Result<f64> {
    let x0 = ens.snapshot(0)?;
    let xt = ens.snapshot(t_index)?;
    Ok(x0
        .column_iter()
        .zip(xt.column_iter())
        .filter_map(|(a, b)| {
            let n0 = a.norm_squared();
            (n0 > 0.0).then(|| (b.norm_squared() / n0 - 1.0).abs())
        })
        .fold(0.0, f64::max))
}

/// Entrywise bound `5‖B‖_max/√N + 10·dt` between an `N`-path empirical
/// covariance and the covariance ODE.
pub fn ito_tolerance(reference_max: f64, n_paths: usize, dt: f64) -> f64 {
    5.0 * reference_max / (n_paths as f64).sqrt() + 10.0 * dt
}
