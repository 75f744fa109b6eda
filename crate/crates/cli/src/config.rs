//! Scenario files. Parsing is strict: unknown keys anywhere are rejected,
//! because a misspelled matrix field would otherwise silently default.

use std::collections::BTreeSet;

use preq_core::dynamics::{Method, TimeGrid, DEFAULT_DT};
use preq_core::generators::{
    build_affine, build_commutator, build_gksl, build_similarity, Generator, GkslSpec, JumpOperator,
    Schedule,
};
use preq_core::operator::{CMatrix, HermitianOperator, PositiveOperator};
use preq_core::stochastic::SdeSpec;
use serde::Deserialize;

use crate::error::CliError;
use crate::verify::CheckName;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    #[serde(with = "preq_core::matrix_json")]
    pub operator: CMatrix,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorConfig {
    Gksl {
        #[serde(with = "preq_core::matrix_json")]
        hamiltonian: CMatrix,
        #[serde(default)]
        jumps: Vec<JumpConfig>,
    },
    Commutator {
        #[serde(with = "preq_core::matrix_json")]
        hamiltonian: CMatrix,
    },
    Similarity {
        #[serde(with = "preq_core::matrix_json")]
        a: CMatrix,
    },
    Affine {
        linear: Box<GeneratorConfig>,
        #[serde(with = "preq_core::matrix_json")]
        sigma: CMatrix,
    },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub duration: f64,
    pub generator: GeneratorConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSegmentConfig {
    pub duration: f64,
    #[serde(with = "preq_core::matrix_json")]
    pub a: CMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub steps: Option<usize>,
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "yes")]
    pub covariance: bool,
    #[serde(default)]
    pub nonlinear: bool,
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<String>,
    #[serde(default, with = "optional_matrix")]
    pub observable: Option<CMatrix>,
    /// Draw `B` (and `Â` when absent) from the run seed instead of `initial`.
    #[serde(default)]
    pub random_instance: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(with = "preq_core::matrix_json")]
    pub diffusion: CMatrix,
    /// Piecewise-constant drift; absent means zero drift (Brownian motion).
    #[serde(default)]
    pub drift: Vec<DriftSegmentConfig>,
    /// Comparison times; defaults to the grid end.
    #[serde(default)]
    pub record_times: Vec<f64>,
    #[serde(default)]
    pub export_paths: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dim: usize,
    pub generator: Option<GeneratorConfig>,
    pub schedule: Option<Vec<SegmentConfig>>,
    #[serde(default, with = "optional_matrix")]
    pub initial: Option<CMatrix>,
    pub grid: Option<GridConfig>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub propagate: Option<PropagateConfig>,
    pub verify: Option<VerifyConfig>,
    pub paths: Option<PathsConfig>,
}

fn yes() -> bool {
    true
}

mod optional_matrix {
    use preq_core::matrix_json::JsonMatrix;
    use preq_core::operator::CMatrix;
    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMatrix>, D::Error> {
        Ok(Option::<JsonMatrix>::deserialize(d)?.map(|m| m.0))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// A scenario converted to library types, with every dimension checked.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub dim: usize,
    pub generator: Option<Generator>,
    pub schedule: Option<Schedule<Generator>>,
    pub initial: Option<PositiveOperator>,
    pub grid: Option<TimeGrid>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub propagate: PropagateConfig,
    pub verify: Option<ResolvedVerify>,
    pub paths: Option<ResolvedPaths>,
}

#[derive(Clone, Debug)]
pub struct ResolvedVerify {
    pub checks: Vec<CheckName>,
    pub observable: Option<HermitianOperator>,
    pub random_instance: bool,
}

#[derive(Clone, Debug)]
pub struct ResolvedPaths {
    pub diffusion: PositiveOperator,
    pub drift: Schedule<CMatrix>,
    pub record_times: Vec<f64>,
    pub export_paths: bool,
}

impl ResolvedPaths {
    pub fn spec(&self, b0: &PositiveOperator) -> Result<SdeSpec, CliError> {
        SdeSpec::new(self.drift.clone(), self.diffusion.clone(), b0.clone())
            .map_err(|e| config_err("paths", e))
    }
}

fn config_err(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{what}: {e}"))
}

fn check_dim(what: &str, dim: usize, m: &CMatrix) -> Result<(), CliError> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(CliError::Config(format!(
            "{what}: expected {dim}x{dim} matrix, found {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn hermitian(what: &str, dim: usize, m: &CMatrix) -> Result<HermitianOperator, CliError> {
    check_dim(what, dim, m)?;
    HermitianOperator::new(m.clone()).map_err(|e| config_err(what, e))
}

impl GeneratorConfig {
    pub fn build(&self, dim: usize) -> Result<Generator, CliError> {
        let generator = match self {
            GeneratorConfig::Gksl { hamiltonian, jumps } => {
                let hamiltonian = hermitian("generator.hamiltonian", dim, hamiltonian)?;
                let jumps = jumps
                    .iter()
                    .map(|j| {
                        check_dim("generator.jumps.operator", dim, &j.operator)?;
                        Ok(JumpOperator {
                            operator: j.operator.clone(),
                            rate: j.rate,
                        })
                    })
                    .collect::<Result<_, CliError>>()?;
                build_gksl(&GkslSpec { hamiltonian, jumps })
                    .map_err(|e| config_err("generator", e))?
                    .into()
            }
            GeneratorConfig::Commutator { hamiltonian } => {
                build_commutator(&hermitian("generator.hamiltonian", dim, hamiltonian)?).into()
            }
            GeneratorConfig::Similarity { a } => {
                check_dim("generator.a", dim, a)?;
                build_similarity(a).map_err(|e| config_err("generator.a", e))?.into()
            }
            GeneratorConfig::Affine { linear, sigma } => {
                let linear = match linear.build(dim)? {
                    Generator::Linear(l) => l,
                    Generator::Affine(_) => {
                        return Err(CliError::Config(
                            "generator.linear: affine generators cannot be nested".into(),
                        ))
                    }
                };
                let sigma = hermitian("generator.sigma", dim, sigma)?;
                build_affine(linear, sigma).map_err(|e| config_err("generator", e))?.into()
            }
        };
        Ok(generator)
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<TimeGrid, CliError> {
        let grid = match (self.steps, self.dt) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("grid: give either steps or dt, not both".into()))
            }
            (Some(steps), None) => TimeGrid::new(self.t0, self.t1, steps),
            (None, dt) => TimeGrid::with_max_step(self.t0, self.t1, dt.unwrap_or(DEFAULT_DT)),
        };
        grid.map_err(|e| config_err("grid", e))
    }
}

impl ScenarioConfig {
    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let dim = self.dim;
        if dim == 0 {
            return Err(CliError::Config("dim: must be at least 1".into()));
        }
        if self.generator.is_some() && self.schedule.is_some() {
            return Err(CliError::Config("give either generator or schedule, not both".into()));
        }
        let generator = self.generator.as_ref().map(|g| g.build(dim)).transpose()?;
        let schedule = self
            .schedule
            .as_ref()
            .map(|segments| {
                let segments = segments
                    .iter()
                    .map(|s| Ok((s.duration, s.generator.build(dim)?)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                Schedule::new(segments).map_err(|e| config_err("schedule", e))
            })
            .transpose()?;
        let initial = self
            .initial
            .as_ref()
            .map(|m| {
                check_dim("initial", dim, m)?;
                PositiveOperator::new(m.clone()).map_err(|e| config_err("initial", e))
            })
            .transpose()?;
        let grid = self.grid.as_ref().map(GridConfig::build).transpose()?;
        if self.samples == Some(0) {
            return Err(CliError::Config("samples: must be at least 1".into()));
        }

        let verify = self
            .verify
            .as_ref()
            .map(|v| {
                if v.checks.is_empty() {
                    return Err(CliError::Config("verify.checks: name at least one check".into()));
                }
                let mut seen = BTreeSet::new();
                let mut checks = Vec::new();
                for name in &v.checks {
                    let check = name.parse::<CheckName>()?;
                    if seen.insert(check) {
                        checks.push(check);
                    }
                }
                let observable = v
                    .observable
                    .as_ref()
                    .map(|m| hermitian("verify.observable", dim, m))
                    .transpose()?;
                Ok(ResolvedVerify {
                    checks,
                    observable,
                    random_instance: v.random_instance,
                })
            })
            .transpose()?;

        let paths = self
            .paths
            .as_ref()
            .map(|p| {
                check_dim("paths.diffusion", dim, &p.diffusion)?;
                let diffusion = PositiveOperator::new(p.diffusion.clone())
                    .map_err(|e| config_err("paths.diffusion", e))?;
                let drift = if p.drift.is_empty() {
                    Schedule::constant(CMatrix::zeros(dim, dim))
                } else {
                    for s in &p.drift {
                        check_dim("paths.drift.a", dim, &s.a)?;
                    }
                    Schedule::new(p.drift.iter().map(|s| (s.duration, s.a.clone())).collect())
                        .map_err(|e| config_err("paths.drift", e))?
                };
                Ok::<_, CliError>(ResolvedPaths {
                    diffusion,
                    drift,
                    record_times: p.record_times.clone(),
                    export_paths: p.export_paths,
                })
            })
            .transpose()?;

        Ok(Scenario {
            dim,
            generator,
            schedule,
            initial,
            grid,
            samples: self.samples,
            seed: self.seed,
            format: self.format,
            propagate: self.propagate.clone().unwrap_or_else(|| PropagateConfig {
                covariance: true,
                ..Default::default()
            }),
            verify,
            paths,
        })
    }
}

impl Scenario {
    pub fn require_generator(&self) -> Result<&Generator, CliError> {
        self.generator
            .as_ref()
            .ok_or_else(|| CliError::Config("generator: required for this command".into()))
    }

    pub fn require_initial(&self) -> Result<&PositiveOperator, CliError> {
        self.initial
            .as_ref()
            .ok_or_else(|| CliError::Config("initial: required for this command".into()))
    }

    pub fn require_grid(&self) -> Result<&TimeGrid, CliError> {
        self.grid
            .as_ref()
            .ok_or_else(|| CliError::Config("grid: required for this command".into()))
    }

    pub fn require_samples(&self) -> Result<usize, CliError> {
        self.samples
            .ok_or_else(|| CliError::Config("samples: required for this command".into()))
    }

    /// The generator as a schedule, whether given constant or piecewise.
    pub fn generator_schedule(&self) -> Result<Schedule<Generator>, CliError> {
        match (&self.generator, &self.schedule) {
            (Some(g), _) => Ok(Schedule::constant(g.clone())),
            (None, Some(s)) => Ok(s.clone()),
            (None, None) => Err(CliError::Config(
                "generator or schedule: required for this command".into(),
            )),
        }
    }
}
