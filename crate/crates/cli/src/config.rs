//! Strict JSON run configuration.
//!
//! Physics inputs (variances, times, mollification scales) have no
//! defaults. Numerical resolution does: `dt = 1e-3 · min t`, `h = √dt`,
//! and on unbounded domains `x_max` is chosen from the growth of the
//! potential so the confining weight falls below `1e-6`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mvsao_core::jumps::BoundaryWeights;
use mvsao_core::{Discretization, Domain, ExperimentSpec, FieldKind, Model, Potential};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Trace,
    Moment,
    Covariance,
    Oracle,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Trace => "trace",
            Kind::Moment => "moment",
            Kind::Covariance => "covariance",
            Kind::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Real,
    Complex,
    Quaternion,
}

impl From<Field> for FieldKind {
    fn from(f: Field) -> Self {
        match f {
            Field::Real => FieldKind::Real,
            Field::Complex => FieldKind::Complex,
            Field::Quaternion => FieldKind::Quaternion,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Line,
    HalfLine,
    Interval { theta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Linear { kappa: f64, nu: f64 },
    Sao,
    Tabulated { x0: f64, dx: f64, values: Vec<Vec<f64>> },
}

/// Boundary weights; `null` in a Robin list is a Dirichlet end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    Neumann,
    Dirichlet,
    Robin {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub domain: DomainConfig,
    pub colors: usize,
    pub field: Field,
    pub potential: PotentialConfig,
    pub boundary: BoundaryConfig,
    pub sigma2: f64,
    pub upsilon2: f64,
}

/// The multivariate stochastic Airy operator over a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaoConfig {
    pub field: Field,
    pub colors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scales {
    One(f64),
    Each(Vec<f64>),
}

impl Scales {
    fn expand(&self, n: usize, key: &str) -> Result<Vec<f64>> {
        match self {
            Scales::One(v) => Ok(vec![*v; n]),
            Scales::Each(v) if v.len() == n => Ok(v.clone()),
            Scales::Each(v) => Err(CliError::Config(format!(
                "`{key}` lists {} scales for {n} times",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    White,
    Smooth { eps: Scales, zeta: Scales },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscConfig {
    pub dt: Option<f64>,
    pub h: Option<f64>,
    pub x_max: Option<f64>,
    pub boundary_window: Option<f64>,
    pub quadrature_points: Option<usize>,
    pub n_max: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceConfig {
    #[default]
    Coupled,
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid nodes, endpoints included.
    pub grid: usize,
    pub draws: usize,
}

/// The configuration file as written by the user.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub id: Option<String>,
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub model: Option<ModelConfig>,
    pub sao: Option<SaoConfig>,
    pub t: Option<Vec<f64>>,
    pub noise: Option<NoiseConfig>,
    pub paths: Option<usize>,
    pub discretization: Option<DiscConfig>,
    pub covariance: Option<CovarianceConfig>,
    pub oracle: Option<OracleConfig>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub t: Option<Vec<f64>>,
    pub paths: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub sao: Option<SaoConfig>,
}

/// Everything that determines the numbers of a run. Its canonical JSON is
/// what `config_hash` digests; output location, format and worker count
/// are left out because they do not change any estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub id: Option<String>,
    pub kind: Kind,
    pub seed: u64,
    pub model: ModelConfig,
    pub t: Vec<f64>,
    pub noise: NoiseConfig,
    pub paths: Option<usize>,
    pub discretization: DiscConfig,
    pub covariance: Option<CovarianceConfig>,
    pub oracle: Option<OracleConfig>,
}

/// A resolved configuration plus the execution settings.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: Resolved,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
}

fn sao_model(s: &SaoConfig) -> ModelConfig {
    let m = Model::sao(s.field.into(), s.colors);
    ModelConfig {
        domain: DomainConfig::HalfLine,
        colors: s.colors,
        field: s.field,
        potential: PotentialConfig::Sao,
        boundary: BoundaryConfig::Dirichlet,
        sigma2: m.sigma2,
        upsilon2: m.upsilon2,
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

pub fn resolve(file: RunConfig, kind: Kind, over: Overrides) -> Result<Run> {
    if let Some(k) = file.kind {
        if k != kind {
            return Err(CliError::Config(format!(
                "config is for `{}` but the `{}` subcommand was used",
                k.name(),
                kind.name()
            )));
        }
    }
    let seed = over.seed.or(file.seed).ok_or_else(|| missing("seed"))?;
    let sao = over.sao.or(file.sao);
    let model = match (file.model, sao) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either `model` or `sao`, not both".into())),
        (Some(m), None) => m,
        (None, Some(s)) => sao_model(&s),
        (None, None) => return Err(missing("model")),
    };
    let t = over.t.or(file.t).ok_or_else(|| missing("t"))?;
    if t.is_empty() || t.len() > mvsao_core::MAX_TRACE_FACTORS {
        return Err(CliError::Config(format!(
            "`t` needs between 1 and {} times, got {}",
            mvsao_core::MAX_TRACE_FACTORS,
            t.len()
        )));
    }
    let noise = match (file.noise, &model.potential) {
        (Some(n), _) => n,
        // the preset operator is driven by white noise
        (None, PotentialConfig::Sao) => NoiseConfig::White,
        (None, _) => return Err(missing("noise")),
    };
    let paths = over.paths.or(file.paths);
    if kind != Kind::Oracle && paths.is_none() {
        return Err(missing("paths"));
    }
    if kind == Kind::Oracle && file.oracle.is_none() {
        return Err(missing("oracle"));
    }
    let covariance = match kind {
        Kind::Covariance => Some(file.covariance.unwrap_or_default()),
        _ if file.covariance.is_some() => {
            return Err(CliError::Config("`covariance` only applies to the covariance subcommand".into()))
        }
        _ => None,
    };
    let workers = over.workers.or(file.workers).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Config("`workers` must be at least 1".into()));
    }
    Ok(Run {
        config: Resolved {
            id: file.id,
            kind,
            seed,
            model,
            t,
            noise,
            paths,
            discretization: file.discretization.unwrap_or_default(),
            covariance,
            oracle: if kind == Kind::Oracle { file.oracle } else { None },
        },
        workers,
        out: over.out.or(file.out),
        format: over.format.or(file.format).unwrap_or_default(),
    })
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        let r = self.colors;
        let domain = match self.domain {
            DomainConfig::Line => Domain::Line,
            DomainConfig::HalfLine => Domain::HalfLine,
            DomainConfig::Interval { theta } => Domain::interval(theta)?,
        };
        let potential = match &self.potential {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Linear { kappa, nu } => Potential::Linear { kappa: *kappa, nu: *nu },
            PotentialConfig::Sao => Potential::Sao,
            PotentialConfig::Tabulated { x0, dx, values } => Potential::Tabulated {
                x0: *x0,
                dx: *dx,
                values: values.clone(),
            },
        };
        let boundary = match &self.boundary {
            BoundaryConfig::Neumann => BoundaryWeights::neumann(r),
            BoundaryConfig::Dirichlet => BoundaryWeights::dirichlet(r),
            BoundaryConfig::Robin { lower, upper } => {
                let conv = |v: &Vec<Option<f64>>| v.iter().map(|w| w.unwrap_or(f64::NEG_INFINITY)).collect();
                BoundaryWeights {
                    lower: conv(lower),
                    upper: conv(upper),
                }
            }
        };
        let model = Model {
            domain,
            colors: r,
            kind: self.field.into(),
            potential,
            boundary,
            sigma2: self.sigma2,
            upsilon2: self.upsilon2,
        };
        model.validate()?;
        Ok(model)
    }
}

impl Resolved {
    /// The experiment over the factors `which` (indices into `t`).
    pub fn spec(&self, which: &[usize]) -> Result<ExperimentSpec> {
        let model = self.model.build()?;
        let times = which.iter().map(|&k| self.t[k]).collect();
        let mut spec = ExperimentSpec::new(model, times, self.paths.unwrap_or(1));
        if let NoiseConfig::Smooth { eps, zeta } = &self.noise {
            let n = self.t.len();
            let (eps, zeta) = (eps.expand(n, "eps")?, zeta.expand(n, "zeta")?);
            spec.eps = which.iter().map(|&k| eps[k]).collect();
            spec.zeta = which.iter().map(|&k| zeta[k]).collect();
        }
        let d = &self.discretization;
        let defaults = Discretization::default();
        spec.disc = Discretization {
            dt: d.dt,
            h: d.h,
            x_max: d.x_max,
            boundary_window: d.boundary_window.unwrap_or(defaults.boundary_window),
            quadrature_points: d.quadrature_points,
            n_max: d.n_max.unwrap_or(defaults.n_max),
        };
        Ok(spec)
    }

    /// Canonical JSON: keys sorted, no whitespace.
    pub fn canonical(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }
}
