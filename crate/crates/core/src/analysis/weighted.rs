//! Weights, weighted H¹ seminorms and reference solutions.

use super::AnalysisError;
use crate::assembly::{simplex_rule, SampleGrid};
use crate::controls::{CoefficientExpr, ControlProblem, Part};
use crate::mesh::{HatData, Mesh, PointLocator};
use crate::stepping::SpaceTimeSolution;

/// Tolerance below zero accepted for sampled weights.
const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightOrigin {
    /// `γ ≡ const`.
    Constant,
    /// Expression from the problem file.
    User,
    /// `γ = ã̃^α̂ − ã^α̂`.
    Sobolev,
    /// `γ_i = γ + μ_i/2`.
    Level,
}

#[derive(Debug, Clone, PartialEq)]
enum WeightBase {
    Constant(f64),
    Expr(CoefficientExpr),
    Gap {
        implicit: CoefficientExpr,
        explicit: CoefficientExpr,
        control: Vec<f64>,
    },
}

/// A non-negative weight `γ` on the domain, plus a constant shift.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub origin: WeightOrigin,
    base: WeightBase,
    pub shift: f64,
}

impl WeightSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            origin: WeightOrigin::Constant,
            base: WeightBase::Constant(value),
            shift: 0.0,
        }
    }

    pub fn from_expr(expr: CoefficientExpr) -> Self {
        Self {
            origin: WeightOrigin::User,
            base: WeightBase::Expr(expr),
            shift: 0.0,
        }
    }

    /// `γ = ã̃^α − ã^α` from the splitting.
    pub fn sobolev(p: &ControlProblem, alpha: usize) -> Self {
        Self {
            origin: WeightOrigin::Sobolev,
            base: WeightBase::Gap {
                implicit: p.diffusion.part(Part::Implicit).clone(),
                explicit: p.diffusion.part(Part::Explicit).clone(),
                control: p.control(alpha).to_vec(),
            },
            shift: 0.0,
        }
    }

    /// Sobolev weight when `α̂` is designated, else the user weight, else 1.
    pub fn for_problem(p: &ControlProblem) -> Self {
        match (p.sobolev_control, &p.weight) {
            (Some(a), _) => Self::sobolev(p, a),
            (None, Some(w)) => Self::from_expr(w.clone()),
            (None, None) => Self::constant(1.0),
        }
    }

    /// `γ_i = γ + μ/2`.
    pub fn level(&self, mu: f64) -> Self {
        Self {
            origin: WeightOrigin::Level,
            base: self.base.clone(),
            shift: self.shift + 0.5 * mu,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, AnalysisError> {
        let err = |source| AnalysisError::Eval {
            what: format!("weight at {x:?}"),
            source,
        };
        let base = match &self.base {
            WeightBase::Constant(c) => *c,
            WeightBase::Expr(e) => e.eval(x, &[]).map_err(err)?,
            WeightBase::Gap {
                implicit,
                explicit,
                control,
            } => implicit.eval(x, control).map_err(err)? - explicit.eval(x, control).map_err(err)?,
        };
        Ok(base + self.shift)
    }

    /// Sampled `sup |γ|` on a grid of spacing `dx/4`.
    pub fn sup(&self, p: &ControlProblem, dx: f64) -> Result<f64, AnalysisError> {
        let grid = SampleGrid::for_mesh_size(&p.domain, dx);
        let v = grid.values(|x| self.eval(x))?;
        Ok(v.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
    }
}

/// `∫_K γ` per cell with a degree-2 rule; fails on negative samples.
pub fn cell_weight_integrals(mesh: &Mesh, weight: &WeightSpec) -> Result<Vec<f64>, AnalysisError> {
    if let WeightBase::Constant(c) = weight.base {
        let g = c + weight.shift;
        if g < -WEIGHT_TOL {
            return Err(AnalysisError::NegativeWeight {
                x: Vec::new(),
                value: g,
            });
        }
        return Ok((0..mesh.num_cells()).map(|k| g * mesh.cell_volume(k)).collect());
    }
    let rule = simplex_rule(mesh.dim(), 2).expect("degree-2 rules exist in 2D and 3D");
    crate::par::try_map_range(mesh.num_cells(), |k| {
        let mut total = 0.0;
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.map_barycentric(k, lam);
            let g = weight.eval(&x)?;
            if g < -WEIGHT_TOL {
                return Err(AnalysisError::NegativeWeight { x, value: g });
            }
            total += w * g;
        }
        Ok(total * mesh.cell_volume(k))
    })
}

fn grad_sq(mesh: &Mesh, hd: &HatData, k: usize, v: &[f64]) -> f64 {
    hd.function_gradient(mesh, k, v).iter().map(|g| g * g).sum()
}

/// `|v|²_{H¹}` of a P1 function.
pub fn h1_seminorm_sq(mesh: &Mesh, hd: &HatData, v: &[f64]) -> f64 {
    (0..mesh.num_cells())
        .map(|k| grad_sq(mesh, hd, k, v) * mesh.cell_volume(k))
        .sum()
}

/// `‖v‖²_{L²}` of a P1 function, exact per cell.
pub fn l2_norm_sq(mesh: &Mesh, v: &[f64]) -> f64 {
    let d = mesh.dim() as f64;
    (0..mesh.num_cells())
        .map(|k| {
            let vals: Vec<f64> = mesh.cell(k).iter().map(|&n| v[n]).collect();
            let sq: f64 = vals.iter().map(|x| x * x).sum();
            let s: f64 = vals.iter().sum();
            mesh.cell_volume(k) / ((d + 1.0) * (d + 2.0)) * (sq + s * s)
        })
        .sum()
}

/// `(Σ_k ω_k h ∫ γ |∇w(s_k)|²)^{1/2}` with trapezium weights `ω_k`.
pub fn weighted_h1_seminorm(
    mesh: &Mesh,
    hd: &HatData,
    w: &SpaceTimeSolution,
    weight: &WeightSpec,
) -> Result<f64, AnalysisError> {
    let cw = cell_weight_integrals(mesh, weight)?;
    Ok(weighted_h1_seminorm_with(mesh, hd, w, &cw))
}

/// As [`weighted_h1_seminorm`] with precomputed `∫_K γ`.
pub fn weighted_h1_seminorm_with(mesh: &Mesh, hd: &HatData, w: &SpaceTimeSolution, cell_weights: &[f64]) -> f64 {
    let g = &w.grid;
    let per_step = crate::par::map_range(g.steps + 1, |k| {
        let v = &w.values[k];
        (0..mesh.num_cells())
            .map(|c| grad_sq(mesh, hd, c, v) * cell_weights[c])
            .sum::<f64>()
    });
    per_step
        .iter()
        .enumerate()
        .map(|(k, s)| g.trapezium_weight(k) * g.h * s)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// A function of `(t, x)` that errors are measured against.
pub trait ReferenceSolution: Sync {
    fn value(&self, t: f64, x: &[f64]) -> Result<f64, AnalysisError>;
}

impl<F> ReferenceSolution for F
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    fn value(&self, t: f64, x: &[f64]) -> Result<f64, AnalysisError> {
        Ok(self(t, x))
    }
}

/// Exact solution expression over `x1..xd` and `t`.
pub struct ExactReference<'a>(pub &'a CoefficientExpr);

impl ReferenceSolution for ExactReference<'_> {
    fn value(&self, t: f64, x: &[f64]) -> Result<f64, AnalysisError> {
        self.0.eval_at_time(t, x, &[]).map_err(|source| AnalysisError::Eval {
            what: format!("exact solution at t = {t}, x = {x:?}"),
            source,
        })
    }
}

/// Numerical solution on a finer mesh, P1 in space and affine in time.
pub struct FineGridReference {
    pub mesh: Mesh,
    pub hat: HatData,
    pub solution: SpaceTimeSolution,
    locator: PointLocator,
}

impl FineGridReference {
    pub fn new(mesh: Mesh, hat: HatData, solution: SpaceTimeSolution) -> Self {
        let locator = PointLocator::new(&mesh);
        Self {
            mesh,
            hat,
            solution,
            locator,
        }
    }
}

impl ReferenceSolution for FineGridReference {
    fn value(&self, t: f64, x: &[f64]) -> Result<f64, AnalysisError> {
        let (cell, bary) = self
            .locator
            .locate(&self.mesh, &self.hat, x)
            .ok_or_else(|| AnalysisError::ReferenceUnavailable(format!("point {x:?} outside the reference mesh")))?;
        let g = &self.solution.grid;
        let s = (t / g.h).clamp(0.0, g.steps as f64);
        let k = (s.floor() as usize).min(g.steps.saturating_sub(1));
        let lambda = s - k as f64;
        let (a, b) = (&self.solution.values[k], &self.solution.values[(k + 1).min(g.steps)]);
        Ok(self
            .mesh
            .cell(cell)
            .iter()
            .zip(&bary)
            .map(|(&n, l)| l * ((1.0 - lambda) * a[n] + lambda * b[n]))
            .sum())
    }
}
