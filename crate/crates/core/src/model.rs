//! Operator and experiment descriptions shared by the estimators and the
//! matrix oracle.

use crate::algebra::FieldKind;
use crate::combinatorics::DEFAULT_N_MAX;
use crate::error::{invalid, Result};
use crate::jumps::BoundaryWeights;
use crate::paths::Domain;

/// The deterministic potential `V(i, x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// `κ |x| - ν`, the same for every color.
    Linear { kappa: f64, nu: f64 },
    /// `r x / 2` with `r` the number of colors.
    Sao,
    /// Per-color samples on `x0 + k dx`, linearly interpolated and held
    /// constant outside the table.
    Tabulated {
        x0: f64,
        dx: f64,
        values: Vec<Vec<f64>>,
    },
}

impl Potential {
    #[inline]
    pub fn value(&self, color: usize, r: usize, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Linear { kappa, nu } => kappa * x.abs() - nu,
            Potential::Sao => r as f64 * x / 2.0,
            Potential::Tabulated { x0, dx, values } => {
                let v = &values[color.min(values.len() - 1)];
                let s = ((x - x0) / dx).clamp(0.0, (v.len() - 1) as f64);
                let k = (s as usize).min(v.len().saturating_sub(2));
                if v.len() == 1 {
                    return v[0];
                }
                let f = s - k as f64;
                v[k] * (1.0 - f) + v[k + 1] * f
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    /// Whether `V(i, ·)` is the same function for all colors.
    pub fn color_blind(&self) -> bool {
        match self {
            Potential::Tabulated { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
            _ => true,
        }
    }

    /// Linear growth rate at infinity, if any.
    pub fn growth(&self, r: usize) -> Option<f64> {
        match self {
            Potential::Linear { kappa, .. } if *kappa > 0.0 => Some(*kappa),
            Potential::Sao => Some(r as f64 / 2.0),
            _ => None,
        }
    }
}

/// The random operator `-½Δ + V + ξ` on `r` colors.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub domain: Domain,
    pub colors: usize,
    pub kind: FieldKind,
    pub potential: Potential,
    pub boundary: BoundaryWeights,
    /// Variance of the diagonal noise.
    pub sigma2: f64,
    /// Variance of the off-diagonal noise.
    pub upsilon2: f64,
}

impl Model {
    /// The multivariate stochastic Airy operator over the given field:
    /// half line, `V(i, x) = r x / 2`, Dirichlet at 0.
    pub fn sao(kind: FieldKind, r: usize) -> Self {
        let sigma2 = match kind {
            FieldKind::Real => 1.0,
            FieldKind::Complex => 0.5,
            FieldKind::Quaternion => 0.25,
        };
        Model {
            domain: Domain::HalfLine,
            colors: r,
            kind,
            potential: Potential::Sao,
            boundary: BoundaryWeights::dirichlet(r),
            sigma2,
            upsilon2: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.colors == 0 {
            return Err(invalid("r", "need at least one color"));
        }
        if self.boundary.lower.len() != self.colors || self.boundary.upper.len() != self.colors {
            return Err(invalid("boundary", "one weight per color is required"));
        }
        if self
            .boundary
            .lower
            .iter()
            .chain(&self.boundary.upper)
            .any(|a| a.is_nan() || *a == f64::INFINITY)
        {
            return Err(invalid("boundary", "weights must lie in [-inf, inf)"));
        }
        if !(self.sigma2 >= 0.0 && self.upsilon2 >= 0.0) {
            return Err(invalid("variance", "variances must be nonnegative"));
        }
        if let Potential::Tabulated { dx, values, .. } = &self.potential {
            if !(*dx > 0.0) || values.is_empty() || values.iter().any(|v| v.is_empty()) {
                return Err(invalid("potential", "tabulated potential needs samples and dx > 0"));
            }
        }
        Ok(())
    }
}

/// Numerical resolution of the path estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    /// Time step; defaults to `1e-3 · min t_k`.
    pub dt: Option<f64>,
    /// Local-time bin width; defaults to `√dt`.
    pub h: Option<f64>,
    /// Truncation of the line and half line.
    pub x_max: Option<f64>,
    /// Boundary local-time window in units of `√dt`.
    pub boundary_window: f64,
    /// Midpoint-rule nodes per starting-point coordinate.
    pub quadrature_points: Option<usize>,
    pub n_max: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            dt: None,
            h: None,
            x_max: None,
            boundary_window: 1.0,
            quadrature_points: None,
            n_max: DEFAULT_N_MAX,
        }
    }
}

/// Largest supported number of trace factors.
pub const MAX_TRACE_FACTORS: usize = 4;

/// A trace-moment experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub model: Model,
    pub times: Vec<f64>,
    /// Diagonal mollification scale per factor (0 = white diagonal noise).
    pub eps: Vec<f64>,
    /// Off-diagonal mollification scale per factor.
    pub zeta: Vec<f64>,
    pub n_paths: usize,
    pub disc: Discretization,
}

impl ExperimentSpec {
    pub fn new(model: Model, times: Vec<f64>, n_paths: usize) -> Self {
        let n = times.len();
        ExperimentSpec {
            model,
            times,
            eps: vec![0.0; n],
            zeta: vec![0.0; n],
            n_paths,
            disc: Discretization::default(),
        }
    }

    /// Uses the same mollification scales for every factor.
    pub fn with_scales(mut self, eps: f64, zeta: f64) -> Self {
        self.eps = vec![eps; self.times.len()];
        self.zeta = vec![zeta; self.times.len()];
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.times.is_empty() || self.times.len() > MAX_TRACE_FACTORS {
            return Err(invalid(
                "t",
                format!("between 1 and {MAX_TRACE_FACTORS} times are supported, got {}", self.times.len()),
            ));
        }
        if self.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(invalid("t", "times must be positive"));
        }
        if self.eps.len() != self.times.len() || self.zeta.len() != self.times.len() {
            return Err(invalid("eps", "one scale per time is required"));
        }
        if self.eps.iter().chain(&self.zeta).any(|&e| !(e >= 0.0)) {
            return Err(invalid("eps", "scales must be nonnegative"));
        }
        if self.n_paths == 0 {
            return Err(invalid("paths", "need at least one path"));
        }
        if let Some(dt) = self.disc.dt {
            if !(dt > 0.0) || dt > self.min_time() {
                return Err(invalid("dt", format!("need 0 < dt <= min t, got {dt}")));
            }
        }
        if let Some(h) = self.disc.h {
            if !(h > 0.0) {
                return Err(invalid("h", "bin width must be positive"));
            }
        }
        if !(self.disc.boundary_window > 0.0) {
            return Err(invalid("boundary_window", "must be positive"));
        }
        self.x_range().map(|_| ())
    }

    pub fn min_time(&self) -> f64 {
        self.times.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total_time(&self) -> f64 {
        self.times.iter().sum()
    }

    pub fn dt(&self) -> f64 {
        self.disc.dt.unwrap_or(1e-3 * self.min_time())
    }

    pub fn h(&self) -> f64 {
        self.disc.h.unwrap_or_else(|| self.dt().sqrt())
    }

    /// Starting-point range: the interval itself, or the truncated line.
    pub fn x_range(&self) -> Result<(f64, f64)> {
        match self.model.domain {
            Domain::Interval { theta } => Ok((0.0, theta)),
            d => {
                let x_max = match (self.disc.x_max, self.model.potential.growth(self.model.colors)) {
                    (Some(x), _) => x,
                    (None, Some(k)) => 6.0 * std::f64::consts::LN_10 / (k * self.min_time()),
                    (None, None) => {
                        return Err(invalid(
                            "x_max",
                            "required on unbounded domains without a confining potential",
                        ))
                    }
                };
                if !(x_max > 0.0) {
                    return Err(invalid("x_max", "must be positive"));
                }
                Ok(if d == Domain::Line {
                    (-x_max, x_max)
                } else {
                    (0.0, x_max)
                })
            }
        }
    }

    pub fn quadrature_points(&self) -> usize {
        self.disc
            .quadrature_points
            .unwrap_or(match self.times.len() {
                1 => 128,
                2 => 32,
                3 => 12,
                _ => 8,
            })
    }
}
