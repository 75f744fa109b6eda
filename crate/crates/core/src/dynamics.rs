//! Covariance and density-operator flows.
//!
//! Covariances follow the linear (or affine) Cauchy problem `dB/dt = 𝓛B (+ Σ)`.
//! Their trace-normalizations follow the quadratic flow
//! `dρ/dt = 𝓛ρ − ρ Tr(𝓛ρ)`, which collapses to `dρ/dt = 𝓛ρ` when `𝓛` is
//! trace-preserving.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::generators::{unvectorize, vectorize, Generator, Schedule, Superoperator};
use crate::operator::{
    ensure_dim, hermitian_part, max_abs, min_eigenvalue, normalize_trace, trace, CMatrix, CVector,
    DensityOperator, PositiveOperator, PSD_TOL,
};
use crate::table;

/// Nonlinear density flows abort when the trace drifts further than this.
pub const TRACE_DRIFT_ABORT: f64 = 1e-6;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        let grid = Self { t0, t1, steps };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid on `[t0, t1]` whose spacing is at most `dt`.
    pub fn with_max_step(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("step {dt} must be positive")));
        }
        let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t0, t1, steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if !(self.t1 > self.t0) {
            return Err(Error::InvalidGrid(format!(
                "t1 = {} must exceed t0 = {}",
                self.t1, self.t0
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidGrid("steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.time(k))
    }

    /// Grid index whose time is within `10⁻⁹·dt` of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t0) / self.dt()).round();
        if k < 0.0 || k > self.steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 1e-9 * self.dt()).then_some(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Covariance,
    Density,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Exact,
    Rk4,
}

/// A grid point where the state left the PSD cone by more than tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PositivityWarning {
    pub time: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTrajectory {
    grid: TimeGrid,
    values: Vec<CMatrix>,
    kind: TrajectoryKind,
    warnings: Vec<PositivityWarning>,
}

impl OperatorTrajectory {
    fn from_states(grid: TimeGrid, kind: TrajectoryKind, states: Vec<CVector>, n: usize) -> Self {
        let values: Vec<CMatrix> = states.iter().map(|v| unvectorize(v, n)).collect();
        let warnings = values
            .iter()
            .enumerate()
            .filter_map(|(k, m)| {
                let lambda = min_eigenvalue(m);
                (lambda < -PSD_TOL * (1.0 + max_abs(m))).then(|| PositivityWarning {
                    time: grid.time(k),
                    min_eigenvalue: lambda,
                })
            })
            .collect();
        Self {
            grid,
            values,
            kind,
            warnings,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn warnings(&self) -> &[PositivityWarning] {
        &self.warnings
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn last(&self) -> &CMatrix {
        self.values.last().expect("trajectories hold steps + 1 values")
    }

    pub fn at_time(&self, t: f64) -> Option<&CMatrix> {
        self.grid.index_of(t).map(|k| &self.values[k])
    }

    pub fn traces(&self) -> Vec<f64> {
        self.values.iter().map(|m| trace(m).re).collect()
    }

    pub fn min_eigenvalues(&self) -> Vec<f64> {
        self.values.iter().map(min_eigenvalue).collect()
    }

    /// `max_t |Tr X_t − 1|`
    pub fn max_trace_drift(&self) -> f64 {
        self.traces()
            .into_iter()
            .fold(0.0, |acc, tr| acc.max((tr - 1.0).abs()))
    }

    /// Columns: `t`, row-major `re_i_j, im_i_j`, `trace`, `min_eigenvalue`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(table::matrix_header("", self.dim()));
        header.push("trace".into());
        header.push("min_eigenvalue".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, m) in self.values.iter().enumerate() {
            let mut row = vec![table::float(self.grid.time(k))];
            row.extend(table::matrix_cells(m));
            row.push(table::float(trace(m).re));
            row.push(table::float(min_eigenvalue(m)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn vec_trace(v: &CVector, n: usize) -> num_complex::Complex64 {
    (0..n).map(|d| v[d + n * d]).sum()
}

fn rk4_step(v: &CVector, h: f64, f: impl Fn(&CVector) -> CVector) -> CVector {
    let k1 = f(v);
    let k2 = f(&(v + k1.scale(0.5 * h)));
    let k3 = f(&(v + k2.scale(0.5 * h)));
    let k4 = f(&(v + k3.scale(h)));
    v + (k1 + (k2 + k3).scale(2.0) + k4).scale(h / 6.0)
}

/// Affine propagator over a fixed interval: `v ↦ P v + c`.
struct Propagator {
    linear: CMatrix,
    offset: Option<CVector>,
}

impl Propagator {
    fn new(generator: &Generator, h: f64) -> Self {
        match generator {
            Generator::Linear(l) => Propagator {
                linear: expm(&l.matrix().scale(h)),
                offset: None,
            },
            Generator::Affine(a) => {
                let n2 = a.dim() * a.dim();
                let e = expm(&a.homogeneous_embedding().scale(h));
                Propagator {
                    linear: e.view((0, 0), (n2, n2)).into_owned(),
                    offset: Some(e.view((0, n2), (n2, 1)).column(0).into_owned()),
                }
            }
        }
    }

    fn apply(&self, v: &CVector) -> CVector {
        let out = &self.linear * v;
        match &self.offset {
            Some(c) => out + c,
            None => out,
        }
    }
}

fn vector_field(generator: &Generator) -> impl Fn(&CVector) -> CVector + '_ {
    let source = generator.inhomogeneity().map(|s| vectorize(s.matrix()));
    move |v| {
        let out = generator.linear().matrix() * v;
        match &source {
            Some(s) => out + s,
            None => out,
        }
    }
}

/// Propagates `B0` under a time-independent generator.
pub fn propagate_covariance(
    generator: &Generator,
    b0: &PositiveOperator,
    grid: &TimeGrid,
    method: Method,
) -> Result<OperatorTrajectory> {
    propagate_covariance_piecewise(&Schedule::constant(generator.clone()), b0, grid, method)
}

/// Propagates `B0` under a piecewise-constant generator schedule whose time
/// origin is `grid.t0`. Steps that straddle a segment boundary are split at
/// the boundary, so both methods stay exact per segment.
pub fn propagate_covariance_piecewise(
    schedule: &Schedule<Generator>,
    b0: &PositiveOperator,
    grid: &TimeGrid,
    method: Method,
) -> Result<OperatorTrajectory> {
    grid.validate()?;
    let n = b0.dim();
    for (_, g) in schedule.segments() {
        ensure_dim(n, g.dim())?;
    }

    let dt = grid.dt();
    let mut cache: HashMap<(usize, u64), Propagator> = HashMap::new();
    let mut advance = |v: &CVector, seg: usize, h: f64| -> CVector {
        let generator = &schedule.segments()[seg].1;
        match method {
            Method::Exact => cache
                .entry((seg, h.to_bits()))
                .or_insert_with(|| Propagator::new(generator, h))
                .apply(v),
            Method::Rk4 => rk4_step(v, h, vector_field(generator)),
        }
    };

    let mut states = Vec::with_capacity(grid.len());
    let mut v = vectorize(b0.matrix());
    states.push(v.clone());
    for k in 0..grid.steps {
        let (from, to) = (k as f64 * dt, (k + 1) as f64 * dt);
        let mut cuts = schedule.breakpoints_between(from, to);
        if cuts.is_empty() {
            v = advance(&v, schedule.segment_index(from), dt);
        } else {
            cuts.insert(0, from);
            cuts.push(to);
            for w in cuts.windows(2) {
                v = advance(&v, schedule.segment_index(w[0]), w[1] - w[0]);
            }
        }
        states.push(v.clone());
    }
    Ok(OperatorTrajectory::from_states(
        *grid,
        TrajectoryKind::Covariance,
        states,
        n,
    ))
}

/// Fixed-step RK4 integration of `dρ/dt = 𝓛ρ − ρ Tr(𝓛ρ)`.
///
/// The trace is monitored, never projected back to one. Drift beyond
/// [`TRACE_DRIFT_ABORT`] returns [`Error::StepSize`].
pub fn propagate_density_nonlinear(
    l: &Superoperator,
    rho0: &DensityOperator,
    grid: &TimeGrid,
) -> Result<OperatorTrajectory> {
    grid.validate()?;
    let n = rho0.dim();
    ensure_dim(n, l.dim())?;
    let field = |v: &CVector| {
        let lv = l.matrix() * v;
        let tr = vec_trace(&lv, n);
        let correction = v * tr;
        lv - correction
    };
    let dt = grid.dt();
    let mut states = Vec::with_capacity(grid.len());
    let mut v = vectorize(rho0.matrix());
    states.push(v.clone());
    for k in 1..=grid.steps {
        v = rk4_step(&v, dt, field);
        let drift = (vec_trace(&v, n).re - 1.0).abs();
        if !(drift <= TRACE_DRIFT_ABORT) {
            return Err(Error::StepSize {
                time: grid.time(k),
                drift,
            });
        }
        states.push(v.clone());
    }
    Ok(OperatorTrajectory::from_states(
        *grid,
        TrajectoryKind::Density,
        states,
        n,
    ))
}

/// Trace-normalizes every value of a covariance trajectory.
pub fn normalize_trajectory(traj: &OperatorTrajectory) -> Result<OperatorTrajectory> {
    let n = traj.dim();
    let states = traj
        .values()
        .iter()
        .map(|b| {
            let tr = trace(b).re;
            if !(tr > crate::operator::TRACE_DEGENERACY_TOL * (1.0 + max_abs(b))) {
                return Err(Error::DegenerateTrace { trace: tr });
            }
            Ok(vectorize(&b.unscale(tr)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorTrajectory::from_states(
        *traj.grid(),
        TrajectoryKind::Density,
        states,
        n,
    ))
}

/// `e^{At} B0 (e^{At})†`
pub fn closed_form_similarity(a: &CMatrix, b0: &PositiveOperator, t: f64) -> Result<PositiveOperator> {
    ensure_dim(b0.dim(), a.nrows())?;
    ensure_dim(b0.dim(), a.ncols())?;
    let u = expm(&a.scale(t));
    PositiveOperator::new(hermitian_part(&(&u * b0.matrix() * u.adjoint())))
}

fn brownian_covariance(b0: &PositiveOperator, sigma: &PositiveOperator, t: f64) -> Result<PositiveOperator> {
    ensure_dim(b0.dim(), sigma.dim())?;
    if !(t >= 0.0) {
        return Err(Error::InvalidGrid(format!("time {t} must be non-negative")));
    }
    PositiveOperator::new(b0.matrix() + sigma.matrix().scale(t))
}

/// `ρ_t = (B0 + Σt) / Tr(B0 + Σt)`
pub fn brownian_density(b0: &PositiveOperator, sigma: &PositiveOperator, t: f64) -> Result<DensityOperator> {
    let b = brownian_covariance(b0, sigma, t)?;
    Ok(normalize_trace(&b)?.0)
}

/// Time derivative of the Brownian density flow,
/// `dρ/dt = (Σ − ρ_t Tr Σ) / Tr(B0 + Σt)`.
///
/// Its coefficients depend explicitly on `t`, so the flow is not generated
/// by any fixed superoperator.
pub fn brownian_effective_drift(b0: &PositiveOperator, sigma: &PositiveOperator, t: f64) -> Result<CMatrix> {
    let b = brownian_covariance(b0, sigma, t)?;
    let (rho, tr) = normalize_trace(&b)?;
    Ok((sigma.matrix() - rho.matrix().scale(sigma.trace())).unscale(tr))
}

/// Whether `max_ab |Tr 𝓛(E_ab)| ≤ tol`.
pub fn check_trace_preserving(l: &Superoperator, tol: f64) -> bool {
    l.trace_defect() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{build_affine, build_commutator, build_gksl, build_similarity};
    use crate::operator::{pauli, CVector, HermitianOperator, I, ONE};
    use crate::random::{random_gksl, random_hermitian_operator, random_matrix, random_psd, seeded};
    use num_complex::Complex64;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            values.len(),
            values.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    fn sup_diff(a: &[CMatrix], b: &[CMatrix]) -> f64 {
        a.iter().zip(b).map(|(x, y)| max_abs(&(x - y))).fold(0.0, f64::max)
    }

    #[test]
    fn grid_validation_and_lookup() {
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, f64::NAN, 3).is_err());
        let g = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        assert_eq!(g.len(), 2001);
        assert_eq!(g.time(2000), 2.0);
        assert_eq!(g.index_of(0.5), Some(500));
        assert_eq!(g.index_of(2.0), Some(2000));
        assert_eq!(g.index_of(0.5005), None);
        assert_eq!(g.index_of(3.0), None);
        let g = TimeGrid::with_max_step(0.0, 5.0, 1e-3).unwrap();
        assert_eq!(g.steps, 5000);
    }

    #[test]
    fn scalar_exponential_growth() {
        // n = 1, 𝓛B = 0.5·B, B0 = 1: B_2 = e.
        let l = Superoperator::scaling(1, 0.5);
        let b0 = PositiveOperator::identity(1);
        let grid = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        for method in [Method::Exact, Method::Rk4] {
            let traj = propagate_covariance(&l.clone().into(), &b0, &grid, method).unwrap();
            let b = traj.last()[(0, 0)].re;
            assert!((b - std::f64::consts::E).abs() < 1e-10, "{method:?}: {b}");
        }
    }

    #[test]
    fn zero_generator_gives_constant_trajectory() {
        let mut rng = seeded(11);
        let b0 = random_psd(&mut rng, 3);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let traj = propagate_covariance(&Superoperator::zero(3).into(), &b0, &grid, Method::Exact).unwrap();
        assert!(traj.values().iter().all(|b| b == b0.matrix()));
    }

    #[test]
    fn brownian_covariance_flow() {
        let sigma = HermitianOperator::from_real_diagonal(&[1.0, 0.0]).unwrap();
        let g: Generator = build_affine(Superoperator::zero(2), sigma).unwrap().into();
        let grid = TimeGrid::new(0.0, 2.0, 20).unwrap();
        for method in [Method::Exact, Method::Rk4] {
            let traj = propagate_covariance(&g, &PositiveOperator::identity(2), &grid, method).unwrap();
            assert!(max_abs(&(traj.last() - diag(&[3.0, 1.0]))) < 1e-13);
        }
    }

    #[test]
    fn exact_and_rk4_agree() {
        let mut rng = seeded(12);
        let grid = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        for n in 2..=3 {
            let b0 = random_psd(&mut rng, n);
            let gens: Vec<Generator> = vec![
                build_gksl(&random_gksl(&mut rng, n, 2)).unwrap().into(),
                build_similarity(&random_matrix(&mut rng, n).scale(0.3)).unwrap().into(),
                build_affine(
                    build_commutator(&random_hermitian_operator(&mut rng, n)),
                    random_psd(&mut rng, n).as_hermitian().clone(),
                )
                .unwrap()
                .into(),
            ];
            for g in &gens {
                let a = propagate_covariance(g, &b0, &grid, Method::Exact).unwrap();
                let b = propagate_covariance(g, &b0, &grid, Method::Rk4).unwrap();
                assert!(sup_diff(a.values(), b.values()) < 1e-6);
            }
        }
    }

    #[test]
    fn non_psd_initial_value_is_rejected() {
        assert!(matches!(
            PositiveOperator::from_real_diagonal(&[1.0, -0.5]),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn semigroup_property() {
        let mut rng = seeded(13);
        let l = build_gksl(&random_gksl(&mut rng, 3, 2)).unwrap();
        let (t, s) = (0.7, 1.9);
        let lhs = l.exp(t + s);
        let rhs = l.exp(t).compose(&l.exp(s)).unwrap();
        assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-10);
    }

    #[test]
    fn nonlinear_flow_with_trace_preserving_generator_is_linear() {
        let mut rng = seeded(14);
        let l = build_gksl(&random_gksl(&mut rng, 2, 2)).unwrap();
        let rho0 = normalize_trace(&random_psd(&mut rng, 2)).unwrap().0;
        let grid = TimeGrid::new(0.0, 3.0, 3000).unwrap();
        let nonlinear = propagate_density_nonlinear(&l, &rho0, &grid).unwrap();
        let linear = propagate_covariance(&l.into(), rho0.as_positive(), &grid, Method::Exact).unwrap();
        assert!(sup_diff(nonlinear.values(), linear.values()) < 1e-8);
        assert!(nonlinear.max_trace_drift() < 1e-8);
    }

    #[test]
    fn identity_generator_is_a_fixed_point() {
        let mut rng = seeded(15);
        let rho0 = normalize_trace(&random_psd(&mut rng, 3)).unwrap().0;
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let traj = propagate_density_nonlinear(&Superoperator::identity(3), &rho0, &grid).unwrap();
        assert!(traj.values().iter().all(|r| max_abs(&(r - rho0.matrix())) < 1e-15));
    }

    #[test]
    fn nonlinear_flow_matches_normalized_closed_form() {
        let a = diag(&[0.0, 1.0]);
        let l = build_similarity(&a).unwrap();
        let rho0 = DensityOperator::maximally_mixed(2);
        let grid = TimeGrid::new(0.0, 5.0, 5000).unwrap();
        let traj = propagate_density_nonlinear(&l, &rho0, &grid).unwrap();
        for (k, rho) in traj.values().iter().enumerate() {
            let b = closed_form_similarity(&a, rho0.as_positive(), grid.time(k)).unwrap();
            let expected = normalize_trace(&b).unwrap().0;
            assert!(max_abs(&(rho - expected.matrix())) < 1e-6);
        }
    }

    #[test]
    fn excessive_trace_drift_is_an_error() {
        // Stiff growth with a coarse step: RK4 stability is lost.
        let a = diag(&[0.0, 400.0]);
        let l = build_similarity(&a).unwrap();
        let rho0 = DensityOperator::maximally_mixed(2);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            propagate_density_nonlinear(&l, &rho0, &grid),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn closed_form_similarity_examples() {
        let mut rng = seeded(16);
        let b0 = random_psd(&mut rng, 2);
        let same = closed_form_similarity(&CMatrix::zeros(2, 2), &b0, 3.0).unwrap();
        assert_eq!(same.matrix(), b0.matrix());

        let b = closed_form_similarity(&diag(&[1.0, 0.0]), &PositiveOperator::identity(2), 1.0).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!(max_abs(&(b.matrix() - diag(&[e2, 1.0]))) < 1e-13);

        // A = −iσ_z, t = π/2 rotates |+⟩⟨+| to |−⟩⟨−|.
        let a = pauli::z().map(|z| z * -I);
        let plus = CVector::from_vec(vec![ONE, ONE]);
        let b0 = DensityOperator::pure(&plus).unwrap();
        let t = std::f64::consts::FRAC_PI_2;
        let closed = closed_form_similarity(&a, b0.as_positive(), t).unwrap();
        let minus = DensityOperator::pure(&CVector::from_vec(vec![ONE, -ONE])).unwrap();
        assert!(max_abs(&(closed.matrix() - minus.matrix())) < 1e-14);
        let grid = TimeGrid::new(0.0, t, 1571).unwrap();
        let g = build_similarity(&a).unwrap().into();
        let traj = propagate_covariance(&g, b0.as_positive(), &grid, Method::Rk4).unwrap();
        assert!(max_abs(&(traj.last() - closed.matrix())) < 1e-10);
    }

    #[test]
    fn brownian_density_examples() {
        let b0 = PositiveOperator::identity(2);
        let sigma = PositiveOperator::from_real_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(
            brownian_density(&b0, &sigma, 0.0).unwrap(),
            normalize_trace(&b0).unwrap().0
        );
        let rho = brownian_density(&b0, &sigma, 2.0).unwrap();
        assert_eq!(rho.matrix(), &diag(&[0.75, 0.25]));
        let still = PositiveOperator::zeros(2);
        assert_eq!(
            brownian_density(&b0, &still, 0.0).unwrap(),
            brownian_density(&b0, &still, 9.0).unwrap()
        );
        assert!(brownian_density(&PositiveOperator::zeros(2), &still, 1.0).is_err());
        assert!(brownian_density(&b0, &sigma, -1.0).is_err());
    }

    #[test]
    fn brownian_effective_drift_matches_finite_difference_and_varies() {
        let b0 = PositiveOperator::identity(2);
        let sigma = PositiveOperator::from_real_diagonal(&[1.0, 0.0]).unwrap();
        let h = 1e-5;
        for &t in &[0.5, 2.0] {
            let fd = (brownian_density(&b0, &sigma, t + h).unwrap().into_matrix()
                - brownian_density(&b0, &sigma, t - h).unwrap().into_matrix())
            .unscale(2.0 * h);
            let drift = brownian_effective_drift(&b0, &sigma, t).unwrap();
            assert!(max_abs(&(fd - &drift)) < 1e-8);
        }
        let d0 = brownian_effective_drift(&b0, &sigma, 0.0).unwrap();
        let d2 = brownian_effective_drift(&b0, &sigma, 2.0).unwrap();
        assert!(max_abs(&(d0 - d2)) > 0.1);
    }

    #[test]
    fn trace_preservation_check() {
        let mut rng = seeded(17);
        assert!(check_trace_preserving(&build_gksl(&random_gksl(&mut rng, 3, 3)).unwrap(), 1e-12));
        let l = build_similarity(&diag(&[1.0, 0.0])).unwrap();
        assert!(!check_trace_preserving(&l, 1e-12));
        assert!((l.trace_defect() - 2.0).abs() < 1e-15);
        assert!(check_trace_preserving(&Superoperator::zero(2), 0.0));
    }

    #[test]
    fn von_neumann_flow_conserves_spectrum() {
        let mut rng = seeded(18);
        let h = random_hermitian_operator(&mut rng, 3);
        let b0 = random_psd(&mut rng, 3);
        let grid = TimeGrid::new(0.0, 3.0, 3000).unwrap();
        let traj = propagate_covariance(&build_commutator(&h).into(), &b0, &grid, Method::Rk4).unwrap();
        let spectrum0 = b0.as_hermitian().eigenvalues();
        let purity0 = (b0.matrix() * b0.matrix()).trace().re;
        for b in traj.values() {
            let spectrum = crate::operator::hermitian_eigenvalues(b);
            for (x, y) in spectrum.iter().zip(&spectrum0) {
                assert!((x - y).abs() < 1e-8);
            }
            assert!((trace(b).re - b0.trace()).abs() < 1e-8);
            assert!(((b * b).trace().re - purity0).abs() < 1e-8);
        }
    }

    #[test]
    fn piecewise_schedule_splits_steps_at_boundaries() {
        // Two similarity segments with a boundary off the grid (0.35).
        let a1 = diag(&[0.5, -0.2]);
        let a2 = pauli::x().scale(0.7);
        let schedule = Schedule::new(vec![
            (0.35, build_similarity(&a1).unwrap().into()),
            (10.0, build_similarity(&a2).unwrap().into()),
        ])
        .unwrap();
        let b0 = PositiveOperator::identity(2);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let traj = propagate_covariance_piecewise(&schedule, &b0, &grid, Method::Exact).unwrap();
        let mid = closed_form_similarity(&a1, &b0, 0.35).unwrap();
        let end = closed_form_similarity(&a2, &mid, 0.65).unwrap();
        assert!(max_abs(&(traj.last() - end.matrix())) < 1e-12);

        let fine = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let rk = propagate_covariance_piecewise(&schedule, &b0, &fine, Method::Rk4).unwrap();
        assert!(max_abs(&(rk.last() - end.matrix())) < 1e-10);
    }

    #[test]
    fn positivity_grazing_is_recorded_not_fatal() {
        // dB_00/dt = −B_00 − 2B_11 is not positivity-preserving.
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = Complex64::new(-1.0, 0.0);
        m[(0, 3)] = Complex64::new(-2.0, 0.0);
        let l = Superoperator::from_matrix(2, m, crate::generators::GeneratorKind::Custom).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let traj = propagate_covariance(&l.into(), &PositiveOperator::identity(2), &grid, Method::Exact).unwrap();
        assert!(!traj.warnings().is_empty());
        assert!(traj.warnings().iter().all(|w| w.min_eigenvalue < 0.0));
    }

    #[test]
    fn csv_layout() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let traj = propagate_covariance(&Superoperator::zero(1).into(), &PositiveOperator::identity(1), &grid, Method::Exact).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,re_0_0,im_0_0,trace,min_eigenvalue");
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[2],
            "5.0000000000000000e-1,1.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0,1.0000000000000000e0"
        );
    }
}
