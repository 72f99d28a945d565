//! Pointwise checks of the sign and splitting hypotheses on a problem.

use std::fmt;

use super::{ControlProblem, Part};
use crate::mesh::Mesh;

const SPLIT_TOL: f64 = 1e-10;
/// Absolute tolerance for `v_T = 0` at boundary nodes.
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NegativeDiffusion,
    NegativeSource,
    InconsistentSplit(&'static str),
    NegativeExplicitReaction,
    NegativeImplicitReaction,
    ReactionBoundExceeded,
    NegativeFinalData,
    NonzeroBoundaryData,
    EvaluationFailed,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegativeDiffusion => f.write_str("diffusion negative"),
            Self::NegativeSource => f.write_str("source negative"),
            Self::InconsistentSplit(c) => write!(f, "splitting of {c} inconsistent"),
            Self::NegativeExplicitReaction => f.write_str("explicit reaction negative"),
            Self::NegativeImplicitReaction => f.write_str("implicit reaction negative"),
            Self::ReactionBoundExceeded => f.write_str("reaction bound exceeded"),
            Self::NegativeFinalData => f.write_str("final data negative"),
            Self::NonzeroBoundaryData => f.write_str("final data nonzero on boundary"),
            Self::EvaluationFailed => f.write_str("evaluation failed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemViolation {
    pub kind: ViolationKind,
    /// `None` for control-independent checks.
    pub control: Option<usize>,
    /// Node index, when the sample point is a mesh node.
    pub node: Option<usize>,
    pub cell: Option<usize>,
    pub point: Vec<f64>,
    pub value: f64,
}

impl fmt::Display for ProblemViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (value {:e}) at {:?}", self.kind, self.value, self.point)?;
        if let Some(a) = self.control {
            write!(f, ", control {a}")?;
        }
        if let Some(n) = self.node {
            write!(f, ", node {n}")?;
        }
        if let Some(k) = self.cell {
            write!(f, ", cell {k}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub points_checked: usize,
    pub violations: Vec<ProblemViolation>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "validation: {} ({} points, {} violations)",
            if self.pass() { "pass" } else { "FAIL" },
            self.points_checked,
            self.violations.len()
        )?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Deterministic interior barycentric sample points, uniform-ish on the simplex.
pub(crate) fn interior_samples(dim: usize, count: usize) -> Vec<Vec<f64>> {
    // additive recurrence with the generalised golden ratio
    let phi = (1..200).fold(2.0_f64, |x, _| (1.0 + x).powf(1.0 / (dim as f64 + 1.0)));
    let alphas: Vec<f64> = (1..=dim).map(|j| phi.powi(-(j as i32)).fract()).collect();
    (0..count)
        .map(|s| {
            let mut u: Vec<f64> = alphas.iter().map(|a| (0.5 + a * (s + 1) as f64).fract()).collect();
            u.sort_by(f64::total_cmp);
            let mut lambda = Vec::with_capacity(dim + 1);
            let mut prev = 0.0;
            for &ui in &u {
                lambda.push(ui - prev);
                prev = ui;
            }
            lambda.push(1.0 - prev);
            let shrink = 0.9;
            lambda
                .iter()
                .map(|l| shrink * l + (1.0 - shrink) / (dim as f64 + 1.0))
                .collect()
        })
        .collect()
}

/// Checks non-negativity of `a`, `f`, the reaction parts and `v_T`, splitting
/// consistency, the declared reaction bound, and `v_T = 0` on boundary nodes,
/// at every node and `samples_per_cell` interior points of each cell, for
/// every control.
pub fn validate_problem(p: &ControlProblem, mesh: &Mesh, samples_per_cell: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let bary = interior_samples(mesh.dim(), samples_per_cell);

    let mut points: Vec<(Option<usize>, Option<usize>, Vec<f64>)> =
        (0..mesh.num_nodes()).map(|n| (Some(n), None, mesh.node(n).to_vec())).collect();
    for k in 0..mesh.num_cells() {
        for b in &bary {
            points.push((None, Some(k), mesh.map_barycentric(k, b)));
        }
    }

    for (node, cell, x) in &points {
        report.points_checked += 1;
        let mut push = |kind, control, value| {
            report.violations.push(ProblemViolation {
                kind,
                control,
                node: *node,
                cell: *cell,
                point: x.clone(),
                value,
            })
        };

        match p.final_value(x) {
            Ok(v) => {
                if v < 0.0 {
                    push(ViolationKind::NegativeFinalData, None, v);
                }
                if let Some(n) = node {
                    if !mesh.is_interior(*n) && v.abs() > BOUNDARY_TOL {
                        push(ViolationKind::NonzeroBoundaryData, None, v);
                    }
                }
            }
            Err(_) => push(ViolationKind::EvaluationFailed, None, f64::NAN),
        }

        for alpha in 0..p.num_controls() {
            let c = p.control(alpha);
            let mut eval = |e: &super::CoefficientExpr| match e.eval(x, c) {
                Ok(v) => Some(v),
                Err(_) => {
                    push(ViolationKind::EvaluationFailed, Some(alpha), f64::NAN);
                    None
                }
            };
            let a = eval(&p.diffusion.full);
            let f = eval(&p.source);
            let split_parts = |s: &super::SplitCoefficient| (s.full.clone(), s.explicit.clone(), s.implicit.clone());
            let mut splits = vec![("a", split_parts(&p.diffusion)), ("c", split_parts(&p.reaction))];
            const B_NAMES: [&str; 3] = ["b1", "b2", "b3"];
            for (i, b) in p.advection.iter().enumerate() {
                splits.push((B_NAMES[i.min(2)], split_parts(b)));
            }
            let mut split_values = Vec::new();
            for (name, (full, ex, im)) in &splits {
                if let (Some(g), Some(e), Some(i)) = (eval(full), eval(ex), eval(im)) {
                    split_values.push((*name, g, e, i));
                }
            }
            let cex = eval(p.reaction.part(Part::Explicit));
            let cim = eval(p.reaction.part(Part::Implicit));

            if let Some(a) = a.filter(|&a| a < 0.0) {
                push(ViolationKind::NegativeDiffusion, Some(alpha), a);
            }
            if let Some(f) = f.filter(|&f| f < 0.0) {
                push(ViolationKind::NegativeSource, Some(alpha), f);
            }
            for (name, g, e, i) in split_values {
                let gap = g - e - i;
                if !(gap.abs() <= SPLIT_TOL) {
                    push(ViolationKind::InconsistentSplit(name), Some(alpha), gap);
                }
            }
            for (value, kind) in [
                (cex, ViolationKind::NegativeExplicitReaction),
                (cim, ViolationKind::NegativeImplicitReaction),
            ] {
                let Some(v) = value else { continue };
                if v < 0.0 {
                    push(kind, Some(alpha), v);
                }
                if let Some(bound) = p.reaction_bound {
                    if v.abs() > bound {
                        push(ViolationKind::ReactionBoundExceeded, Some(alpha), v);
                    }
                }
            }
        }
    }
    report
}
