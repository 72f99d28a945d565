//! Backward time stepping of the discrete HJB system.
//!
//! Each step solves, rowwise over interior nodes,
//!
//! ```text
//!   (v_k − v_{k+1})/h + max_α ( E^α v_{k+1} + I^α v_k − F^α ) = 0
//! ```
//!
//! by Howard policy iteration, starting from `v_N = I_h v_T`. Boundary
//! values are zero throughout, so only interior columns enter the solves.

mod boundary;
mod howard;
mod linear;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boundary::{boundary_control_diagnostic, BoundaryControlTable};
pub use howard::{solve, solve_linear_control, solve_with, RunLog, StepLog};
pub use linear::{DenseLu, Factorization, LinearSolver, SparseLu};

use crate::controls::EvalError;
use crate::mesh::Mesh;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("time step {h} does not divide the horizon {horizon} into an integer number of steps")]
    NonIntegerSteps { horizon: f64, h: f64 },
    #[error("invalid time step: {0}")]
    InvalidTimeStep(String),
    #[error("linear solve failed: {0}")]
    Linear(String),
    #[error("policy iteration did not converge at step {step} after {iterations} iterations (residual {residual:e})")]
    PolicyIteration { step: usize, iterations: usize, residual: f64 },
    #[error("step {step}: residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { step: usize, residual: f64, tolerance: f64 },
    #[error("monotonicity or acuteness audits failed; rerun with the override flag to solve anyway:\n{0}")]
    AuditsFailed(String),
    #[error("final data: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeStepMode {
    /// `h = safety·h_max`, or `implicit_factor·Δx` when `h_max = ∞`, then
    /// reduced so that `T/h` is an integer.
    #[default]
    Auto,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeStepPolicy {
    pub mode: TimeStepMode,
    pub fixed_h: Option<f64>,
    pub safety: f64,
    pub implicit_factor: f64,
}

impl Default for TimeStepPolicy {
    fn default() -> Self {
        Self::auto()
    }
}

impl TimeStepPolicy {
    pub fn auto() -> Self {
        Self {
            mode: TimeStepMode::Auto,
            fixed_h: None,
            safety: 0.9,
            implicit_factor: 0.5,
        }
    }

    pub fn fixed(h: f64) -> Self {
        Self {
            mode: TimeStepMode::Fixed,
            fixed_h: Some(h),
            ..Self::auto()
        }
    }

    /// Time grid on `[0, horizon]` for explicit bound `h_max` and mesh size `dx`.
    pub fn grid(&self, horizon: f64, h_max: f64, dx: f64) -> Result<TimeGrid, SolveError> {
        match self.mode {
            TimeStepMode::Fixed => {
                let h = self
                    .fixed_h
                    .ok_or_else(|| SolveError::InvalidTimeStep("fixed policy without h".into()))?;
                TimeGrid::new(horizon, h)
            }
            TimeStepMode::Auto => {
                let target = if h_max.is_finite() {
                    self.safety * h_max
                } else {
                    self.implicit_factor * dx
                };
                if !(target > 0.0) {
                    return Err(SolveError::InvalidTimeStep(format!("non-positive step {target}")));
                }
                let steps = (horizon / target).ceil().max(1.0) as usize;
                Ok(TimeGrid::from_steps(horizon, steps))
            }
        }
    }
}

/// Uniform grid `s_k = k h`, `k = 0..=steps`, with `steps·h = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub h: f64,
}

impl TimeGrid {
    /// Fails unless `horizon / h` is an integer up to relative `1e-9`.
    pub fn new(horizon: f64, h: f64) -> Result<Self, SolveError> {
        if !(horizon > 0.0) || !(h > 0.0) || !h.is_finite() {
            return Err(SolveError::InvalidTimeStep(format!("horizon {horizon}, h {h}")));
        }
        let n = (horizon / h).round();
        if n < 1.0 || ((n * h - horizon) / horizon).abs() > 1e-9 {
            return Err(SolveError::NonIntegerSteps { horizon, h });
        }
        Ok(Self::from_steps(horizon, n as usize))
    }

    pub fn from_steps(horizon: f64, steps: usize) -> Self {
        Self {
            horizon,
            steps,
            h: horizon / steps as f64,
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.h
        }
    }

    /// Trapezium weights (without the factor `h`).
    pub fn trapezium_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.steps {
            0.5
        } else {
            1.0
        }
    }
}

/// Nodal values at every time step, affine in time in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSolution {
    pub grid: TimeGrid,
    /// `values[k][node]` for `k = 0..=steps`, all nodes, boundary values zero.
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeSolution {
    pub fn zeros(grid: TimeGrid, num_nodes: usize) -> Self {
        Self {
            grid,
            values: vec![vec![0.0; num_nodes]; grid.steps + 1],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Nodal vector at time `t`, affine between grid times.
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        let g = &self.grid;
        let s = (t / g.h).clamp(0.0, g.steps as f64);
        let k = (s.floor() as usize).min(g.steps.saturating_sub(1));
        let lambda = s - k as f64;
        if g.steps == 0 {
            return self.values[0].clone();
        }
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |u − v|` over all nodes and steps; grids must match.
    pub fn max_abs_difference(&self, other: &SpaceTimeSolution) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// CSV with columns `step_index,node_index,x1..xd,value`.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step_index".to_string(), "node_index".to_string()];
        header.extend((1..=mesh.dim()).map(|i| format!("x{i}")));
        header.push("value".into());
        w.write_record(&header)?;
        for (k, vals) in self.values.iter().enumerate() {
            for (n, v) in vals.iter().enumerate() {
                let mut rec = vec![k.to_string(), n.to_string()];
                rec.extend(mesh.node(n).iter().map(|x| format!("{x:.17e}")));
                rec.push(format!("{v:.17e}"));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Residual tolerance relative to `‖F‖_∞ + 1`.
    pub tolerance: f64,
    pub max_policy_iterations: usize,
    /// Solve even when the operator audits fail.
    pub override_audits: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_policy_iterations: 50,
            override_audits: false,
        }
    }
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T = {}, steps = {}, h = {:.12e}", self.horizon, self.steps, self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_requires_integer_steps() {
        assert!(TimeGrid::new(1.0, 0.25).is_ok());
        assert!(matches!(TimeGrid::new(1.0, 0.3), Err(SolveError::NonIntegerSteps { .. })));
        assert!(TimeGrid::new(0.1, 0.1 / 3.0).is_ok());
        assert!(TimeGrid::new(1.0, -1.0).is_err());
    }

    #[test]
    fn auto_policy_rounds_down() {
        let p = TimeStepPolicy::auto();
        let g = p.grid(1.0, 0.3, 0.1).unwrap();
        assert_eq!(g.steps, 4);
        assert!(g.h <= 0.9 * 0.3);
        let g = p.grid(1.0, f64::INFINITY, 0.1).unwrap();
        assert_eq!(g.steps, 20);
        let g = TimeStepPolicy::fixed(0.125).grid(1.0, 1e-6, 0.1).unwrap();
        assert_eq!(g.steps, 8);
    }

    #[test]
    fn affine_interpolation_in_time() {
        let grid = TimeGrid::from_steps(1.0, 2);
        let sol = SpaceTimeSolution {
            grid,
            values: vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 7.0]],
        };
        assert_eq!(sol.at_time(0.25), vec![1.0, 2.0]);
        assert_eq!(sol.at_time(1.0), vec![4.0, 7.0]);
        let theta = 0.3;
        let t = theta * 0.5 + (1.0 - theta) * 1.0;
        let v = sol.at_time(t);
        assert!((v[1] - (theta * 3.0 + (1.0 - theta) * 7.0)).abs() < 1e-14);
        assert_eq!(sol.min_value(), 0.0);
    }
}
