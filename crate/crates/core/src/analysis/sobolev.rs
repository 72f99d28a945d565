//! Pointwise audit of the structural conditions for weighted-norm convergence
//! at the Sobolev control:
//!
//! ```text
//!   c̃̃ − ½(∇·b̃̃ + Δã̃) ≥ 0,   c̃ − ½(∇·b̃ + Δã) ≥ 0,   γ = ã̃ − ã ≥ 0,
//!   ã ≤ Cγ,   ã̃ ≤ Cγ
//! ```
//!
//! Sampled at the interior points of a grid with spacing `Δx/4`, with
//! central differences of the same spacing.

use std::fmt;

use crate::assembly::SampleGrid;
use crate::controls::{CoefficientExpr, ControlProblem, Part};

/// Absolute tolerance for the sampled inequalities.
pub const SOBOLEV_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevCondition {
    pub name: &'static str,
    pub min_value: f64,
    pub at: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevAudit {
    pub control: usize,
    pub spacing: f64,
    pub tol: f64,
    pub conditions: Vec<SobolevCondition>,
    /// Smallest `C` with `ã ≤ Cγ` at the samples (`∞` if none exists).
    pub explicit_ratio: f64,
    /// Smallest `C` with `ã̃ ≤ Cγ` at the samples.
    pub implicit_ratio: f64,
    pub eval_failures: Vec<String>,
}

impl SobolevAudit {
    pub fn pass(&self) -> bool {
        self.eval_failures.is_empty()
            && self.conditions.iter().all(|c| c.pass)
            && self.explicit_ratio.is_finite()
            && self.implicit_ratio.is_finite()
    }

    /// `max(explicit_ratio, implicit_ratio)`.
    pub fn constant(&self) -> f64 {
        self.explicit_ratio.max(self.implicit_ratio)
    }
}

impl fmt::Display for SobolevAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "sobolev conditions at control {}: {}",
            self.control,
            if self.pass() { "pass" } else { "FAIL" }
        )?;
        writeln!(f, "grid spacing = {:.4e}, tol = {:e}", self.spacing, self.tol)?;
        for c in &self.conditions {
            writeln!(
                f,
                "  {}: min = {:.6e} at {:?} ({})",
                c.name,
                c.min_value,
                c.at,
                if c.pass { "pass" } else { "FAIL" }
            )?;
        }
        writeln!(f, "  a_explicit <= C gamma with C = {:.6e}", self.explicit_ratio)?;
        writeln!(f, "  a_implicit <= C gamma with C = {:.6e}", self.implicit_ratio)?;
        for e in &self.eval_failures {
            writeln!(f, "  evaluation failed: {e}")?;
        }
        Ok(())
    }
}

struct PartSamples {
    a: Vec<f64>,
    b: Vec<Vec<f64>>,
    c: Vec<f64>,
}

fn sample(
    grid: &SampleGrid,
    expr: &CoefficientExpr,
    control: &[f64],
    name: &str,
    failures: &mut Vec<String>,
) -> Vec<f64> {
    match grid.values(|x| expr.eval(x, control).map_err(|e| format!("{name} at {x:?}: {e}"))) {
        Ok(v) => v,
        Err(e) => {
            failures.push(e);
            vec![0.0; grid.len()]
        }
    }
}

fn part_samples(grid: &SampleGrid, p: &ControlProblem, alpha: usize, part: Part, failures: &mut Vec<String>) -> PartSamples {
    let control = p.control(alpha);
    PartSamples {
        a: sample(grid, p.diffusion.part(part), control, "diffusion", failures),
        b: p.advection
            .iter()
            .map(|b| sample(grid, b.part(part), control, "advection", failures))
            .collect(),
        c: sample(grid, p.reaction.part(part), control, "reaction", failures),
    }
}

/// `c − ½(∇·b + Δa)` at interior grid point `i`.
fn structure(grid: &SampleGrid, s: &PartSamples, i: usize) -> f64 {
    let div: f64 = s.b.iter().enumerate().map(|(j, bj)| grid.gradient(bj, i)[j]).sum();
    s.c[i] - 0.5 * (div + grid.laplacian(&s.a, i))
}

pub fn audit_sobolev_conditions(p: &ControlProblem, alpha: usize, dx: f64) -> SobolevAudit {
    let grid = SampleGrid::for_mesh_size(&p.domain, dx);
    let mut failures = Vec::new();
    let ex = part_samples(&grid, p, alpha, Part::Explicit, &mut failures);
    let im = part_samples(&grid, p, alpha, Part::Implicit, &mut failures);
    let tol = SOBOLEV_TOL;

    let mut conds = [
        ("implicit: c - (div b + lap a)/2 >= 0", f64::INFINITY, Vec::new()),
        ("explicit: c - (div b + lap a)/2 >= 0", f64::INFINITY, Vec::new()),
        ("gamma = a_implicit - a_explicit >= 0", f64::INFINITY, Vec::new()),
    ];
    let (mut r_ex, mut r_im) = (0.0_f64, 0.0_f64);
    for i in (0..grid.len()).filter(|&i| grid.is_interior(i)) {
        let gamma = im.a[i] - ex.a[i];
        let vals = [structure(&grid, &im, i), structure(&grid, &ex, i), gamma];
        for (c, v) in conds.iter_mut().zip(vals) {
            if v < c.1 {
                c.1 = v;
                c.2 = grid.point(i);
            }
        }
        for (ratio, a) in [(&mut r_ex, ex.a[i]), (&mut r_im, im.a[i])] {
            if gamma > tol {
                *ratio = ratio.max(a / gamma);
            } else if a > tol {
                *ratio = f64::INFINITY;
            }
        }
    }
    SobolevAudit {
        control: alpha,
        spacing: grid.spacing().iter().copied().fold(0.0, f64::max),
        tol,
        conditions: conds
            .into_iter()
            .map(|(name, min_value, at)| SobolevCondition {
                name,
                min_value,
                at,
                pass: min_value >= -tol,
            })
            .collect(),
        explicit_ratio: r_ex,
        implicit_ratio: r_im,
        eval_failures: failures,
    }
}
