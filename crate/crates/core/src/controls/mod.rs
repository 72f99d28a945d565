//! Control problems: the finite control sample, coefficient families and
//! their explicit/implicit splitting.

pub mod expr;
mod file;
mod validate;

use std::path::PathBuf;

use thiserror::Error;

use crate::mesh::{BoxDomain, Pattern};
use crate::stepping::TimeStepPolicy;

pub use expr::{CoefficientExpr, EvalError, ParseError, Symbols};
pub use file::{
    parse_coefficient, CoefficientsSpec, ControlsSpec, MeshSpec, ProblemSpec, SplitEntry, SplitMode,
    SplitSpec, TimeStepSpec,
};
pub use validate::{validate_problem, ProblemViolation, ValidationReport, ViolationKind};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("problem file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("problem file could not be serialised: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("expression `{field}`: {source}")]
    Expr {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("evaluating {what}: {source}")]
    Eval {
        what: String,
        #[source]
        source: EvalError,
    },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("reading problem file: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown built-in problem `{0}`")]
    UnknownBuiltin(String),
}

/// Which half of the splitting `L^α ≈ E^α + I^α` a term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Explicit,
    Implicit,
}

/// A coefficient `g = g̃ + g̃̃` with its explicit and implicit parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCoefficient {
    pub full: CoefficientExpr,
    pub explicit: CoefficientExpr,
    pub implicit: CoefficientExpr,
}

impl SplitCoefficient {
    pub fn part(&self, part: Part) -> &CoefficientExpr {
        match part {
            Part::Explicit => &self.explicit,
            Part::Implicit => &self.implicit,
        }
    }
}

/// Where the meshes for a problem come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Structured(Pattern),
    File(PathBuf),
}

/// An HJB problem with a finite control sample. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub name: String,
    pub domain: BoxDomain,
    pub horizon: f64,
    pub controls: Vec<Vec<f64>>,
    pub diffusion: SplitCoefficient,
    pub advection: Vec<SplitCoefficient>,
    pub reaction: SplitCoefficient,
    pub source: CoefficientExpr,
    pub final_data: CoefficientExpr,
    /// Exact solution `v(t, x)`, if known.
    pub exact: Option<CoefficientExpr>,
    /// User-supplied weight `γ` for weighted norms when no Sobolev control is set.
    pub weight: Option<CoefficientExpr>,
    /// Index into `controls` of `α̂`.
    pub sobolev_control: Option<usize>,
    /// Super-approximation constant `K`.
    pub superapprox_constant: f64,
    /// Acuteness angle used for the artificial diffusion bounds.
    pub theta: f64,
    pub reaction_bound: Option<f64>,
    pub quadrature_order: usize,
    /// Multiplier applied to the sampled sup-norms in the artificial diffusion bound.
    pub linf_margin: f64,
    pub mesh: MeshSource,
    pub time_step: TimeStepPolicy,
    spec: ProblemSpec,
}

impl ControlProblem {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn control(&self, alpha: usize) -> &[f64] {
        &self.controls[alpha]
    }

    /// The parsed problem file this problem was compiled from.
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn diffusion(&self, part: Part, alpha: usize, x: &[f64]) -> Result<f64, EvalError> {
        self.diffusion.part(part).eval(x, self.control(alpha))
    }

    pub fn advection(&self, part: Part, alpha: usize, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.advection
            .iter()
            .map(|b| b.part(part).eval(x, self.control(alpha)))
            .collect()
    }

    pub fn reaction(&self, part: Part, alpha: usize, x: &[f64]) -> Result<f64, EvalError> {
        self.reaction.part(part).eval(x, self.control(alpha))
    }

    pub fn source(&self, alpha: usize, x: &[f64]) -> Result<f64, EvalError> {
        self.source.eval(x, self.control(alpha))
    }

    pub fn final_value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.final_data.eval(x, &self.controls[0])
    }

    /// True when every advection component of `part` is the literal zero.
    pub fn advection_is_zero(&self, part: Part) -> bool {
        self.advection.iter().all(|b| b.part(part).is_zero())
    }

    /// True when `part` has no terms at all (all coefficients literally zero).
    pub fn part_is_zero(&self, part: Part) -> bool {
        self.diffusion.part(part).is_zero() && self.reaction.part(part).is_zero() && self.advection_is_zero(part)
    }
}
