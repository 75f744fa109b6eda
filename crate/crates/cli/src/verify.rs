//! Named checks for `preq verify`.

use std::fmt;
use std::str::FromStr;

use preq_core::dynamics::{
    normalize_trajectory, propagate_covariance, propagate_density_nonlinear, Method,
};
use preq_core::generators::{is_completely_positive, Generator, OrthonormalBasis, Superoperator};
use preq_core::operator::{
    max_abs, normalize_trace, trace, HermitianOperator, PositiveOperator, PSD_TOL,
};
use preq_core::prequantum::{
    classical_average, density_pde_residual_1d, dispersion, empirical_covariance,
    moment_evolution_residual, sample_gaussian, scaling_bridge, GaussianEnsemble,
    QuadraticObservable,
};
use preq_core::random::{random_hermitian_operator, random_psd, random_unitary};
use preq_core::rng::{substream, Substream};
use preq_core::stochastic::{
    empirical_covariance_at, ito_tolerance, ou_covariance_ode, simulate_linear_sde, Recording,
};

use crate::config::Scenario;
use crate::error::CliError;
use crate::report::CheckResult;

/// Substream reserved for drawing random instances, disjoint from the
/// per-sample substreams `0..N`.
pub const INSTANCE_STREAM: u64 = u64::MAX;

pub const STAT_SIGMAS: f64 = 4.0;
pub const MOMENT_TOL: f64 = 1e-10;
pub const PDE_TOL: f64 = 1e-12;
pub const NONLINEAR_TOL: f64 = 1e-6;
pub const TRACE_TOL: f64 = 1e-12;
pub const SEMIGROUP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckName {
    Bridge,
    Dispersion,
    Scaling,
    CovarianceRecovery,
    Moment,
    Pde1d,
    NonlinearVsNormalized,
    TracePreserving,
    Semigroup,
    CompletePositivity,
    Ito,
}

impl CheckName {
    pub const ALL: [CheckName; 11] = [
        CheckName::Bridge,
        CheckName::Dispersion,
        CheckName::Scaling,
        CheckName::CovarianceRecovery,
        CheckName::Moment,
        CheckName::Pde1d,
        CheckName::NonlinearVsNormalized,
        CheckName::TracePreserving,
        CheckName::Semigroup,
        CheckName::CompletePositivity,
        CheckName::Ito,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Bridge => "bridge",
            CheckName::Dispersion => "dispersion",
            CheckName::Scaling => "scaling",
            CheckName::CovarianceRecovery => "covariance-recovery",
            CheckName::Moment => "moment",
            CheckName::Pde1d => "pde-1d",
            CheckName::NonlinearVsNormalized => "nonlinear-vs-normalized",
            CheckName::TracePreserving => "trace-preserving",
            CheckName::Semigroup => "semigroup",
            CheckName::CompletePositivity => "complete-positivity",
            CheckName::Ito => "ito",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
                CliError::Config(format!(
                    "unknown check {s:?}; available checks: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Lazily-built shared inputs so that checks named together reuse one
/// instance and one ensemble.
struct Context<'a> {
    scenario: &'a Scenario,
    seed: u64,
    instance_rng: Substream,
    b: Option<PositiveOperator>,
    observable: Option<HermitianOperator>,
    ensemble: Option<GaussianEnsemble>,
}

impl<'a> Context<'a> {
    fn random_instance(&self) -> bool {
        self.scenario.verify.as_ref().is_some_and(|v| v.random_instance)
    }

    fn covariance(&mut self) -> Result<PositiveOperator, CliError> {
        if self.b.is_none() {
            let b = if self.random_instance() {
                random_psd(&mut self.instance_rng, self.scenario.dim)
            } else {
                self.scenario.require_initial()?.clone()
            };
            self.b = Some(b);
        }
        Ok(self.b.clone().expect("set above"))
    }

    fn observable(&mut self) -> Result<HermitianOperator, CliError> {
        self.covariance()?;
        if self.observable.is_none() {
            let given = self.scenario.verify.as_ref().and_then(|v| v.observable.clone());
            let a = match given {
                Some(a) => a,
                None => random_hermitian_operator(&mut self.instance_rng, self.scenario.dim),
            };
            self.observable = Some(a);
        }
        Ok(self.observable.clone().expect("set above"))
    }

    fn ensemble(&mut self) -> Result<&GaussianEnsemble, CliError> {
        if self.ensemble.is_none() {
            let b = self.covariance()?;
            let n = self.scenario.require_samples()?;
            self.ensemble = Some(sample_gaussian(&b, n, self.seed)?);
        }
        Ok(self.ensemble.as_ref().expect("set above"))
    }

    fn generator_kind(&self) -> Option<String> {
        self.scenario
            .generator
            .as_ref()
            .map(|g| g.kind().as_str().to_string())
    }

    fn linear_generator(&self) -> Result<&Superoperator, CliError> {
        match self.scenario.require_generator()? {
            Generator::Linear(l) => Ok(l),
            Generator::Affine(_) => Err(CliError::Config(
                "this check needs a linear (non-affine) generator".into(),
            )),
        }
    }

    fn result(&self, check: CheckName) -> CheckResult {
        CheckResult {
            check: check.as_str().to_string(),
            generator_kind: self.generator_kind(),
            n: self.scenario.dim,
            n_samples: None,
            seed: self.seed,
            value: f64::NAN,
            reference: 0.0,
            std_error: None,
            tolerance: 0.0,
            pass: false,
        }
    }
}

fn deterministic(mut r: CheckResult, value: f64, reference: f64, tolerance: f64) -> CheckResult {
    r.value = value;
    r.reference = reference;
    r.tolerance = tolerance;
    r.pass = (value - reference).abs() <= tolerance;
    r
}

fn statistical(mut r: CheckResult, value: f64, reference: f64, std_error: f64, n: usize) -> CheckResult {
    r.value = value;
    r.reference = reference;
    r.std_error = Some(std_error);
    r.n_samples = Some(n);
    r.tolerance = STAT_SIGMAS * std_error;
    r.pass = (value - reference).abs() <= r.tolerance;
    r
}

pub fn run_checks(
    scenario: &Scenario,
    checks: &[CheckName],
    seed: u64,
) -> Result<Vec<CheckResult>, CliError> {
    let mut ctx = Context {
        scenario,
        seed,
        instance_rng: substream(seed, INSTANCE_STREAM),
        b: None,
        observable: None,
        ensemble: None,
    };
    checks.iter().map(|&c| run_check(&mut ctx, c)).collect()
}

fn run_check(ctx: &mut Context<'_>, check: CheckName) -> Result<CheckResult, CliError> {
    let base = ctx.result(check);
    let result = match check {
        CheckName::Bridge => {
            let b = ctx.covariance()?;
            let a = ctx.observable()?;
            let reference = trace(&(b.matrix() * a.matrix())).re;
            let est = classical_average(ctx.ensemble()?, &QuadraticObservable::new(a))?;
            statistical(base, est.value, reference, est.std_error, est.n_samples)
        }
        CheckName::Dispersion => {
            let reference = ctx.covariance()?.trace();
            let est = dispersion(ctx.ensemble()?)?;
            statistical(base, est.value, reference, est.std_error, est.n_samples)
        }
        CheckName::Scaling => {
            let a = ctx.observable()?;
            let ens = ctx.ensemble()?;
            let n = ens.len();
            let cmp = scaling_bridge(ens, &QuadraticObservable::new(a))?;
            statistical(base, cmp.classical, cmp.quantum, cmp.std_error, n)
        }
        CheckName::CovarianceRecovery => {
            let b = ctx.covariance()?;
            let ens = ctx.ensemble()?;
            let n = ens.len();
            let emp = empirical_covariance(ens)?;
            let mut r = deterministic(
                base,
                max_abs(&(emp.matrix() - b.matrix())),
                0.0,
                5.0 * max_abs(b.matrix()) / (n as f64).sqrt(),
            );
            r.n_samples = Some(n);
            r
        }
        CheckName::Moment => {
            let b = ctx.covariance()?;
            let u = random_unitary(&mut ctx.instance_rng, ctx.scenario.dim);
            let basis = OrthonormalBasis::new(u)?;
            let generator = ctx.scenario.require_generator()?;
            let residual = moment_evolution_residual(generator, &b, &basis)?;
            deterministic(base, residual, 0.0, MOMENT_TOL)
        }
        CheckName::Pde1d => {
            if ctx.scenario.dim != 1 {
                return Err(CliError::Config("pde-1d needs dim = 1".into()));
            }
            let rate = ctx.linear_generator()?.matrix()[(0, 0)];
            if rate.im != 0.0 {
                return Err(CliError::Config(
                    "pde-1d needs a real scalar generator".into(),
                ));
            }
            let b0 = ctx.scenario.require_initial()?.matrix()[(0, 0)].re;
            let t = ctx.scenario.require_grid()?.t1;
            let xs: Vec<f64> = (0..=200).map(|k| -5.0 + 0.05 * k as f64).collect();
            let residual = density_pde_residual_1d(rate.re, b0, t, &xs)?;
            deterministic(base, residual, 0.0, PDE_TOL)
        }
        CheckName::NonlinearVsNormalized => {
            let l = ctx.linear_generator()?.clone();
            let grid = *ctx.scenario.require_grid()?;
            let (rho0, _) = normalize_trace(ctx.scenario.require_initial()?)?;
            let linear = propagate_covariance(&l.clone().into(), rho0.as_positive(), &grid, Method::Exact)?;
            let normalized = normalize_trajectory(&linear)?;
            let nonlinear = propagate_density_nonlinear(&l, &rho0, &grid)?;
            let sup = normalized
                .values()
                .iter()
                .zip(nonlinear.values())
                .map(|(a, b)| max_abs(&(a - b)))
                .fold(0.0, f64::max);
            deterministic(base, sup, 0.0, NONLINEAR_TOL)
        }
        CheckName::TracePreserving => {
            let defect = ctx.scenario.require_generator()?.linear().trace_defect();
            deterministic(base, defect, 0.0, TRACE_TOL)
        }
        CheckName::Semigroup => {
            let l = ctx.scenario.require_generator()?.linear();
            let s = ctx.scenario.grid.map_or(0.5, |g| (g.t1 - g.t0) / 2.0);
            let whole = l.exp(2.0 * s);
            let halves = l.exp(s).compose(&l.exp(s))?;
            let defect = max_abs(&(whole.matrix() - halves.matrix())) / max_abs(whole.matrix()).max(1.0);
            deterministic(base, defect, 0.0, SEMIGROUP_TOL)
        }
        CheckName::CompletePositivity => {
            let l = ctx.scenario.require_generator()?.linear();
            let mut worst = f64::INFINITY;
            let mut pass = true;
            for t in [0.1, 1.0] {
                let (ok, lambda) = is_completely_positive(&l.exp(t), PSD_TOL);
                pass &= ok;
                worst = worst.min(lambda);
            }
            let mut r = base;
            r.value = worst;
            r.reference = 0.0;
            r.tolerance = PSD_TOL;
            r.pass = pass;
            r
        }
        CheckName::Ito => ito_check(ctx, base)?,
    };
    Ok(result)
}

/// Worst time, measured against its own bound, of the Euler–Maruyama
/// covariance against the covariance ODE.
fn ito_check(ctx: &mut Context<'_>, mut r: CheckResult) -> Result<CheckResult, CliError> {
    let scenario = ctx.scenario;
    let paths = scenario
        .paths
        .as_ref()
        .ok_or_else(|| CliError::Config("ito needs a paths section".into()))?;
    let grid = *scenario.require_grid()?;
    let n = scenario.require_samples()?;
    let spec = paths.spec(scenario.require_initial()?)?;
    let indices = crate::paths::record_indices(&grid, &paths.record_times)?;
    let ens = simulate_linear_sde(&spec, &grid, n, ctx.seed, &Recording::Indices(indices.clone()))?;
    let ode = ou_covariance_ode(&spec, &grid)?;

    let mut worst: Option<(f64, f64)> = None;
    for &k in &indices {
        let reference = &ode.values()[k];
        let emp = empirical_covariance_at(&ens, k)?;
        let diff = max_abs(&(emp.matrix() - reference));
        let tol = ito_tolerance(max_abs(reference), n, grid.dt());
        if worst.map_or(true, |(d, t)| diff / tol > d / t) {
            worst = Some((diff, tol));
        }
    }
    let (diff, tol) = worst.expect("at least one recorded time");
    r.value = diff;
    r.reference = 0.0;
    r.tolerance = tol;
    r.n_samples = Some(n);
    r.pass = diff <= tol;
    Ok(r)
}
