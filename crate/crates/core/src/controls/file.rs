//! TOML problem files.
//!
//! ```toml
//! name = "HEAT"
//! horizon = 0.1
//! theta = 0.2                  # acuteness angle (radians)
//! superapprox_constant = 1.0   # K
//! sobolev_control = 1          # optional index of α̂
//!
//! [domain]
//! lower = [0.0, 0.0]
//! upper = [1.0, 1.0]
//!
//! [mesh]
//! pattern = "acute"            # or "criss-cross", or file = "mesh.txt"
//!
//! [controls]
//! symbols = ["alpha"]
//! points = [[0.0], [1.0]]
//!
//! [coefficients]
//! a = { value = "alpha", split = "implicit" }
//! b = ["0", "0"]
//! c = "0"
//! f = "1"
//! final = "sin(pi*x1)*sin(pi*x2)"
//!
//! [time_step]
//! policy = "auto"
//! ```
//!
//! A split coefficient is either a plain expression (treated implicitly),
//! `{ value, split = "explicit" | "implicit" }`, `{ value, explicit }`
//! (the implicit part is the remainder), `{ value, implicit }`, or
//! `{ explicit, implicit }`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::expr::{CoefficientExpr, ParseError, Symbols};
use super::{ControlProblem, MeshSource, ProblemError, SplitCoefficient};
use crate::mesh::{BoxDomain, Pattern};
use crate::stepping::{TimeStepMode, TimeStepPolicy};

/// Parses one coefficient expression over `x1..xd` and the given control symbols.
pub fn parse_coefficient(text: &str, symbols: &Symbols) -> Result<CoefficientExpr, ParseError> {
    CoefficientExpr::parse(text, symbols)
}

fn default_theta() -> f64 {
    0.2
}
fn default_k() -> f64 {
    1.0
}
fn default_quadrature() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn default_safety() -> f64 {
    0.9
}
fn default_implicit_factor() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub horizon: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_k")]
    pub superapprox_constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev_control: Option<usize>,
    #[serde(default = "default_quadrature")]
    pub quadrature_order: usize,
    #[serde(default = "one")]
    pub linf_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction_bound: Option<f64>,
    pub domain: BoxDomain,
    #[serde(default)]
    pub mesh: MeshSpec,
    pub controls: ControlsSpec,
    pub coefficients: CoefficientsSpec,
    #[serde(default)]
    pub time_step: TimeStepSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            pattern: Some(Pattern::Acute),
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symbols: Vec<String>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implicit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitEntry {
    Plain(String),
    Detailed(SplitSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSpec {
    pub a: SplitEntry,
    pub b: Vec<SplitEntry>,
    pub c: SplitEntry,
    pub f: String,
    #[serde(rename = "final")]
    pub final_data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStepSpec {
    #[serde(default)]
    pub policy: TimeStepMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_implicit_factor")]
    pub implicit_factor: f64,
}

impl Default for TimeStepSpec {
    fn default() -> Self {
        Self {
            policy: TimeStepMode::Auto,
            h: None,
            safety: default_safety(),
            implicit_factor: default_implicit_factor(),
        }
    }
}

impl ProblemSpec {
    pub fn from_toml(text: &str) -> Result<Self, ProblemError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ProblemError> {
        Ok(toml::to_string(self)?)
    }

    /// Resolves expressions and checks structural consistency. Relative
    /// mesh file paths are resolved against `base_dir`.
    pub fn compile(&self, base_dir: Option<&Path>) -> Result<ControlProblem, ProblemError> {
        let invalid = |m: String| Err(ProblemError::Invalid(m));
        let dim = self.domain.dim();
        if self.domain.upper.len() != dim || dim < 2 {
            return invalid(format!(
                "domain bounds must have equal length >= 2 (got {} and {})",
                self.domain.lower.len(),
                self.domain.upper.len()
            ));
        }
        if let Err(e) = self.domain.validate() {
            return invalid(e.to_string());
        }
        if !(self.horizon > 0.0) {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return invalid(format!("theta must lie in (0, pi/2), got {}", self.theta));
        }
        if !(self.superapprox_constant >= 0.0) {
            return invalid("superapprox_constant must be non-negative".into());
        }
        if !(self.linf_margin >= 1.0) {
            return invalid("linf_margin must be at least 1".into());
        }
        let points = &self.controls.points;
        if points.is_empty() {
            return invalid("at least one control point is required".into());
        }
        let cdim = points[0].len();
        if points.iter().any(|p| p.len() != cdim) {
            return invalid("all control points must have the same length".into());
        }
        let names: Vec<String> = if self.controls.symbols.is_empty() {
            match cdim {
                0 => Vec::new(),
                1 => vec!["alpha".to_string()],
                _ => (1..=cdim).map(|j| format!("alpha{j}")).collect(),
            }
        } else {
            self.controls.symbols.clone()
        };
        if names.len() != cdim {
            return invalid(format!("{} control symbols for {}-component controls", names.len(), cdim));
        }
        if let Some(s) = self.sobolev_control {
            if s >= points.len() {
                return invalid(format!("sobolev_control {s} out of range"));
            }
        }
        let coeffs = &self.coefficients;
        if coeffs.b.len() != dim {
            return invalid(format!("b has {} components, domain dimension is {dim}", coeffs.b.len()));
        }

        let symbols = Symbols::new(dim, &names);
        let spatial = Symbols::new(dim, &[]);
        let expr = |field: &str, text: &str, sym: &Symbols| {
            CoefficientExpr::parse(text, sym).map_err(|source| ProblemError::Expr {
                field: field.to_string(),
                source,
            })
        };
        let split = |field: &str, entry: &SplitEntry| -> Result<SplitCoefficient, ProblemError> {
            let spec = match entry {
                SplitEntry::Plain(v) => SplitSpec {
                    value: Some(v.clone()),
                    ..Default::default()
                },
                SplitEntry::Detailed(s) => s.clone(),
            };
            let value = spec.value.as_deref().map(|v| expr(field, v, &symbols)).transpose()?;
            let explicit = spec
                .explicit
                .as_deref()
                .map(|v| expr(&format!("{field}.explicit"), v, &symbols))
                .transpose()?;
            let implicit = spec
                .implicit
                .as_deref()
                .map(|v| expr(&format!("{field}.implicit"), v, &symbols))
                .transpose()?;
            let zero = CoefficientExpr::constant(0.0, &symbols);
            let bad = |m: &str| ProblemError::Invalid(format!("coefficient `{field}`: {m}"));
            if spec.split.is_some() && (explicit.is_some() || implicit.is_some()) {
                return Err(bad("`split` cannot be combined with explicit/implicit parts"));
            }
            Ok(match (value, explicit, implicit) {
                (Some(full), None, None) => match spec.split.unwrap_or(SplitMode::Implicit) {
                    SplitMode::Implicit => SplitCoefficient {
                        explicit: zero,
                        implicit: full.clone(),
                        full,
                    },
                    SplitMode::Explicit => SplitCoefficient {
                        explicit: full.clone(),
                        implicit: zero,
                        full,
                    },
                },
                (Some(full), Some(explicit), None) => SplitCoefficient {
                    implicit: full.minus(&explicit),
                    explicit,
                    full,
                },
                (Some(full), None, Some(implicit)) => SplitCoefficient {
                    explicit: full.minus(&implicit),
                    implicit,
                    full,
                },
                (Some(full), Some(explicit), Some(implicit)) => SplitCoefficient {
                    full,
                    explicit,
                    implicit,
                },
                (None, Some(explicit), Some(implicit)) => SplitCoefficient {
                    full: explicit.plus(&implicit),
                    explicit,
                    implicit,
                },
                _ => return Err(bad("needs `value`, or both `explicit` and `implicit`")),
            })
        };

        let diffusion = split("a", &coeffs.a)?;
        let advection = coeffs
            .b
            .iter()
            .enumerate()
            .map(|(i, b)| split(&format!("b[{i}]"), b))
            .collect::<Result<Vec<_>, _>>()?;
        let reaction = split("c", &coeffs.c)?;
        let source = expr("f", &coeffs.f, &symbols)?;
        let final_data = expr("final", &coeffs.final_data, &spatial)?;
        let exact = coeffs
            .exact
            .as_deref()
            .map(|e| expr("exact", e, &spatial.clone().with_time()))
            .transpose()?;
        let weight = coeffs.weight.as_deref().map(|w| expr("weight", w, &spatial)).transpose()?;

        let mesh = match (&self.mesh.pattern, &self.mesh.file) {
            (_, Some(file)) => {
                let path = match base_dir {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file.clone(),
                };
                MeshSource::File(path)
            }
            (Some(p), None) => MeshSource::Structured(*p),
            (None, None) => MeshSource::Structured(Pattern::Acute),
        };

        let ts = &self.time_step;
        let mode = match (ts.policy, ts.h) {
            (TimeStepMode::Fixed, Some(h)) if h > 0.0 => TimeStepMode::Fixed,
            (TimeStepMode::Fixed, _) => return invalid("fixed time step policy needs a positive `h`".into()),
            (m, _) => m,
        };
        if !(ts.safety > 0.0 && ts.safety <= 1.0) {
            return invalid(format!("time step safety must lie in (0, 1], got {}", ts.safety));
        }
        if !(ts.implicit_factor > 0.0) {
            return invalid("implicit_factor must be positive".into());
        }
        let time_step = TimeStepPolicy {
            mode,
            fixed_h: ts.h,
            safety: ts.safety,
            implicit_factor: ts.implicit_factor,
        };
        if !(1..=5).contains(&self.quadrature_order) {
            return invalid(format!(
                "quadrature order {} unsupported (1 to 5)",
                self.quadrature_order
            ));
        }

        Ok(ControlProblem {
            name: self.name.clone(),
            domain: self.domain.clone(),
            horizon: self.horizon,
            controls: points.clone(),
            diffusion,
            advection,
            reaction,
            source,
            final_data,
            exact,
            weight,
            sobolev_control: self.sobolev_control,
            superapprox_constant: self.superapprox_constant,
            theta: self.theta,
            reaction_bound: self.reaction_bound,
            quadrature_order: self.quadrature_order,
            linf_margin: self.linf_margin,
            mesh,
            time_step,
            spec: self.clone(),
        })
    }
}

impl ControlProblem {
    pub fn from_toml(text: &str) -> Result<Self, ProblemError> {
        ProblemSpec::from_toml(text)?.compile(None)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProblemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        ProblemSpec::from_toml(&text)?.compile(path.parent())
    }
}
