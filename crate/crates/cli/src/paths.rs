//! `preq paths`: simulate an SDE ensemble and compare its empirical
//! covariance with the covariance ODE.

use std::io::Write;

use preq_core::dynamics::TimeGrid;
use preq_core::operator::{max_abs, trace, CMatrix};
use preq_core::stochastic::{
    empirical_covariance_at, initial_increment_cross_covariance, ito_tolerance, max_norm_drift,
    ou_covariance_ode, simulate_linear_sde, PathEnsemble, Recording, SdeSpec,
};
use preq_core::table;

use crate::error::CliError;
use crate::report::CheckResult;

/// Grid indices of the requested comparison times (the grid end if none).
pub fn record_indices(grid: &TimeGrid, times: &[f64]) -> Result<Vec<usize>, CliError> {
    if times.is_empty() {
        return Ok(vec![grid.steps]);
    }
    let mut out = times
        .iter()
        .map(|&t| {
            grid.index_of(t).ok_or_else(|| {
                CliError::Config(format!("paths.record_times: {t} is not a grid point"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub struct PathsOutcome {
    pub ensemble: PathEnsemble,
    pub compared: Vec<usize>,
    pub checks: Vec<CheckResult>,
    pub summary_csv: Vec<u8>,
}

fn is_anti_hermitian(a: &CMatrix) -> bool {
    max_abs(&(a + a.adjoint())) <= 1e-12 * max_abs(a).max(1.0)
}

fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn run(
    spec: &SdeSpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    record_times: &[f64],
    keep_all: bool,
    generator_kind: Option<String>,
) -> Result<PathsOutcome, CliError> {
    let compared = record_indices(grid, record_times)?;
    let recording = if keep_all {
        Recording::All
    } else {
        let mut recorded = compared.clone();
        recorded.extend([0, 1]);
        Recording::Indices(recorded)
    };
    let ensemble = simulate_linear_sde(spec, grid, n_paths, seed, &recording)?;
    let ode = ou_covariance_ode(spec, grid)?;
    let n = spec.dim();
    let sqrt_n = (n_paths as f64).sqrt();

    let base = |check: String| CheckResult {
        check,
        generator_kind: generator_kind.clone(),
        n,
        n_samples: Some(n_paths),
        seed,
        value: f64::NAN,
        reference: 0.0,
        std_error: None,
        tolerance: 0.0,
        pass: false,
    };

    let mut csv = Vec::new();
    let mut header = vec!["t".to_string()];
    header.extend(table::matrix_header("empirical_", n));
    header.extend(table::matrix_header("ode_", n));
    header.extend(["max_abs_diff", "tolerance", "pass"].map(String::from));
    writeln!(csv, "{}", header.join(",")).expect("in-memory write");

    let mut checks = Vec::new();
    let zero_drift = spec
        .drift()
        .segments()
        .iter()
        .all(|(_, a)| a.iter().all(|z| z.norm_sqr() == 0.0));
    for &k in &compared {
        let t = grid.time(k);
        let reference = &ode.values()[k];
        let emp = empirical_covariance_at(&ensemble, k)?;
        let diff = max_abs(&(emp.matrix() - reference));
        let tol = ito_tolerance(max_abs(reference), n_paths, grid.dt());
        let pass = diff <= tol;

        let mut row = vec![table::float(t)];
        row.extend(table::matrix_cells(emp.matrix()));
        row.extend(table::matrix_cells(reference));
        row.extend([table::float(diff), table::float(tol), pass.to_string()]);
        writeln!(csv, "{}", row.join(",")).expect("in-memory write");

        let mut c = base(format!("covariance@{}", table::float(t)));
        c.value = diff;
        c.tolerance = tol;
        c.pass = pass;
        checks.push(c);

        if zero_drift {
            // Brownian motion: the trace grows linearly, Tr B0 + t Tr Σ.
            let expected = trace(reference).re;
            let mut c = base(format!("trace@{}", table::float(t)));
            c.value = trace(emp.matrix()).re;
            c.reference = expected;
            c.tolerance = 5.0 * expected / sqrt_n;
            c.pass = (c.value - expected).abs() <= c.tolerance;
            checks.push(c);
        }
    }

    // ξ_0 is drawn independently of the noise.
    let cross = initial_increment_cross_covariance(&ensemble)?;
    let scale = |m: &CMatrix| (0..n).map(|i| m[(i, i)].re).fold(0.0, f64::max);
    let mut c = base("initial-independence".into());
    c.value = max_abs(&cross);
    c.tolerance = 5.0 * (scale(spec.initial_covariance().matrix()) * scale(spec.diffusion().matrix())).sqrt() / sqrt_n + 1e-12;
    c.pass = c.value <= c.tolerance;
    checks.push(c);

    // Noiseless unitary drift: Euler inflates each squared norm by at most
    // (1 + ‖A‖²dt²) per step, so the drift stays within exp(‖A‖² dt t) − 1.
    let noiseless = spec.diffusion().matrix().iter().all(|z| z.norm_sqr() == 0.0);
    let segments = spec.drift().segments();
    if noiseless && segments.iter().all(|(_, a)| is_anti_hermitian(a)) {
        let last = *compared.last().expect("non-empty");
        let a_sq = segments.iter().map(|(_, a)| frobenius_sq(a)).fold(0.0, f64::max);
        let elapsed = grid.time(last) - grid.t0;
        let mut c = base("norm-conservation".into());
        c.value = max_norm_drift(&ensemble, last)?;
        c.tolerance = (a_sq * grid.dt() * elapsed).exp_m1() + 1e-12;
        c.pass = c.value <= c.tolerance;
        checks.push(c);
    }

    Ok(PathsOutcome {
        ensemble,
        compared,
        checks,
        summary_csv: csv,
    })
}
