//! Howard policy iteration for the per-step sup system.

use std::io::Write;

use super::linear::{Factorization, LinearSolver, SparseLu};
use super::{SolveError, SolverConfig, SpaceTimeSolution};
use crate::assembly::DiscreteOperatorSet;
use crate::controls::ControlProblem;
use crate::mesh::{nodal_interpolate, Mesh};
use crate::monotonicity::audit_all;
use crate::par;
use crate::sparse::CsrMatrix;

/// Extra solves with the accepted policy when rounding leaves the residual
/// just above tolerance.
const REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub iterations: usize,
    /// Residual after each policy iteration.
    pub residuals: Vec<f64>,
    /// Number of interior nodes using each control in the accepted policy.
    pub control_histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub tolerance: f64,
    pub unaudited: bool,
    pub factorizations: usize,
    /// In solve order, from the last step down to the first.
    pub steps: Vec<StepLog>,
}

impl RunLog {
    pub fn max_residual(&self) -> f64 {
        self.steps
            .iter()
            .filter_map(|s| s.residuals.last())
            .fold(0.0, |m: f64, &r| m.max(r))
    }

    pub fn max_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).max().unwrap_or(0)
    }

    /// True when every step's residuals are non-increasing up to `slack`
    /// (relative to the first residual of the step) plus the tolerance.
    pub fn residuals_monotone(&self, slack: f64) -> bool {
        self.steps.iter().all(|s| {
            let scale = s.residuals.first().copied().unwrap_or(0.0);
            s.residuals
                .windows(2)
                .all(|w| w[1] <= w[0] + slack * scale + self.tolerance)
        })
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# run log")?;
        if self.unaudited {
            writeln!(out, "# UNAUDITED: operator audits failed and were overridden")?;
        }
        writeln!(out, "tolerance = {:e}", self.tolerance)?;
        writeln!(out, "factorizations = {}", self.factorizations)?;
        writeln!(out, "max_residual = {:e}", self.max_residual())?;
        writeln!(out, "# step iterations final_residual controls residual_history")?;
        for s in &self.steps {
            let hist: Vec<String> = s.control_histogram.iter().map(|c| c.to_string()).collect();
            let res: Vec<String> = s.residuals.iter().map(|r| format!("{r:.3e}")).collect();
            writeln!(
                out,
                "{} {} {:.3e} [{}] [{}]",
                s.step,
                s.iterations,
                s.residuals.last().copied().unwrap_or(0.0),
                hist.join(" "),
                res.join(" ")
            )?;
        }
        Ok(())
    }
}

/// `v_N = I_h v_T` with boundary values zero.
fn final_values(p: &ControlProblem, mesh: &Mesh) -> Result<Vec<f64>, SolveError> {
    let mut v = nodal_interpolate(mesh, |x| p.final_value(x))?;
    for x in v.iter_mut().skip(mesh.interior_count()) {
        *x = 0.0;
    }
    Ok(v)
}

fn gate(ops: &DiscreteOperatorSet, config: &SolverConfig) -> Result<bool, SolveError> {
    let audit = audit_all(ops);
    if audit.pass() {
        return Ok(false);
    }
    if config.override_audits {
        log::warn!("UNAUDITED: monotonicity audits failed, solving anyway ({} violations)", audit.violations.len());
        Ok(true)
    } else {
        Err(SolveError::AuditsFailed(audit.to_string()))
    }
}

/// Matrix `Id + h I^{π_ℓ}` restricted to interior rows and columns.
fn policy_matrix(ops: &DiscreteOperatorSet, policy: &[usize]) -> CsrMatrix {
    let ni = ops.interior_count;
    let h = ops.h();
    let mut t = Vec::new();
    for (l, &a) in policy.iter().enumerate() {
        t.push((l, l, 1.0));
        for (c, v) in ops.control(a).implicit.row(l) {
            if c < ni {
                t.push((l, c, h * v));
            }
        }
    }
    CsrMatrix::from_triplets(ni, ni, t)
}

struct StepData {
    /// `(E^α v_{k+1})_ℓ − F^α_ℓ`.
    explicit: Vec<Vec<f64>>,
    /// `v_{k+1} − h (E^α v_{k+1} − F^α)`.
    rhs: Vec<Vec<f64>>,
}

fn step_data(ops: &DiscreteOperatorSet, next: &[f64]) -> StepData {
    let ni = ops.interior_count;
    let h = ops.h();
    let explicit: Vec<Vec<f64>> = par::map(&ops.controls, |c| {
        let ev = c.explicit.mul_vec(next);
        (0..ni).map(|l| ev[l] - c.source[l]).collect()
    });
    let rhs = explicit
        .iter()
        .map(|ex| (0..ni).map(|l| next[l] - h * ex[l]).collect())
        .collect();
    StepData { explicit, rhs }
}

/// Rowwise `max_α` of the step operator at `v` (full nodal vector): returns
/// the residual vector and the argmax policy (ties to the lowest index).
fn evaluate(ops: &DiscreteOperatorSet, data: &StepData, next: &[f64], v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let ni = ops.interior_count;
    let h = ops.h();
    let iv: Vec<Vec<f64>> = par::map(&ops.controls, |c| c.implicit.mul_vec(v));
    let mut residual = vec![0.0; ni];
    let mut policy = vec![0; ni];
    for l in 0..ni {
        let mut best = f64::NEG_INFINITY;
        for (a, ia) in iv.iter().enumerate() {
            let q = data.explicit[a][l] + ia[l];
            if q > best {
                best = q;
                policy[l] = a;
            }
        }
        residual[l] = (v[l] - next[l]) / h + best;
    }
    (residual, policy)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

struct FactorCache {
    policy: Vec<usize>,
    factor: Box<dyn Factorization>,
    matrix: CsrMatrix,
}

/// Solves the HJB scheme with the default sparse LU sub-solver.
pub fn solve(
    p: &ControlProblem,
    mesh: &Mesh,
    ops: &DiscreteOperatorSet,
    config: &SolverConfig,
) -> Result<(SpaceTimeSolution, RunLog), SolveError> {
    solve_with(p, mesh, ops, config, &SparseLu)
}

pub fn solve_with(
    p: &ControlProblem,
    mesh: &Mesh,
    ops: &DiscreteOperatorSet,
    config: &SolverConfig,
    solver: &dyn LinearSolver,
) -> Result<(SpaceTimeSolution, RunLog), SolveError> {
    let unaudited = gate(ops, config)?;
    let grid = ops.grid;
    let ni = ops.interior_count;
    let f_norm = ops.controls.iter().map(|c| sup_norm(&c.source)).fold(0.0, f64::max);
    let tolerance = config.tolerance * (f_norm + 1.0);
    let mut sol = SpaceTimeSolution::zeros(grid, mesh.num_nodes());
    sol.values[grid.steps] = final_values(p, mesh)?;
    let mut log = RunLog {
        tolerance,
        unaudited,
        ..Default::default()
    };
    let mut cache: Option<FactorCache> = None;
    let mut policy: Option<Vec<usize>> = None;

    for k in (0..grid.steps).rev() {
        let next = sol.values[k + 1].clone();
        let data = step_data(ops, &next);
        let mut pi = match policy.take() {
            Some(pi) => pi,
            None => evaluate(ops, &data, &next, &next).1,
        };
        let mut v = vec![0.0; mesh.num_nodes()];
        let mut residuals = Vec::new();
        let mut accepted = false;
        for _ in 0..config.max_policy_iterations {
            if cache.as_ref().is_none_or(|c| c.policy != pi) {
                let matrix = policy_matrix(ops, &pi);
                let factor = solver.factor(&matrix)?;
                log.factorizations += 1;
                cache = Some(FactorCache {
                    policy: pi.clone(),
                    factor,
                    matrix,
                });
            }
            let c = cache.as_ref().expect("factorization cached above");
            let rhs: Vec<f64> = (0..ni).map(|l| data.rhs[pi[l]][l]).collect();
            let mut x = rhs.clone();
            c.factor.solve_in_place(&mut x);
            v[..ni].copy_from_slice(&x);
            let (mut r, mut new_pi) = evaluate(ops, &data, &next, &v);
            let mut res = sup_norm(&r);
            if res > tolerance && new_pi == pi {
                for _ in 0..REFINEMENT_STEPS {
                    let ax = c.matrix.mul_vec(&v[..ni]);
                    let mut d: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    c.factor.solve_in_place(&mut d);
                    for (vi, di) in v.iter_mut().zip(&d) {
                        *vi += di;
                    }
                    (r, new_pi) = evaluate(ops, &data, &next, &v);
                    res = sup_norm(&r);
                    if res <= tolerance {
                        break;
                    }
                }
            }
            residuals.push(res);
            let stable = new_pi == pi;
            pi = new_pi;
            if res <= tolerance {
                accepted = true;
                break;
            }
            if stable {
                return Err(SolveError::Residual {
                    step: k,
                    residual: res,
                    tolerance,
                });
            }
        }
        if !accepted {
            return Err(SolveError::PolicyIteration {
                step: k,
                iterations: residuals.len(),
                residual: residuals.last().copied().unwrap_or(f64::NAN),
            });
        }
        let mut hist = vec![0; ops.num_controls()];
        for &a in &pi {
            hist[a] += 1;
        }
        log.steps.push(StepLog {
            step: k,
            iterations: residuals.len(),
            residuals,
            control_histogram: hist,
        });
        sol.values[k] = v;
        policy = Some(pi);
    }
    Ok((sol, log))
}

/// Linear scheme for a single control:
/// `(Id + h I^α) v_k = −(h E^α − Id) v_{k+1} + h F^α`.
pub fn solve_linear_control(
    p: &ControlProblem,
    mesh: &Mesh,
    ops: &DiscreteOperatorSet,
    alpha: usize,
) -> Result<SpaceTimeSolution, SolveError> {
    let grid = ops.grid;
    let ni = ops.interior_count;
    let mut sol = SpaceTimeSolution::zeros(grid, mesh.num_nodes());
    sol.values[grid.steps] = final_values(p, mesh)?;
    let pi = vec![alpha; ni];
    let factor = SparseLu.factor(&policy_matrix(ops, &pi))?;
    let h = ops.h();
    let c = ops.control(alpha);
    for k in (0..grid.steps).rev() {
        let next = &sol.values[k + 1];
        let ev = c.explicit.mul_vec(next);
        let mut x: Vec<f64> = (0..ni).map(|l| next[l] - h * (ev[l] - c.source[l])).collect();
        factor.solve_in_place(&mut x);
        sol.values[k][..ni].copy_from_slice(&x);
    }
    Ok(sol)
}
