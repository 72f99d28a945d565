//! Cut-off `max{w − δ, 0}` and the projection `Q_i`.

use super::{AnalysisError, ReferenceSolution};
use crate::mesh::Mesh;
use crate::stepping::SpaceTimeSolution;

pub fn cutoff(values: &[f64], delta: f64) -> Vec<f64> {
    values.iter().map(|v| (v - delta).max(0.0)).collect()
}

pub fn cutoff_solution(w: &SpaceTimeSolution, delta: f64) -> SpaceTimeSolution {
    SpaceTimeSolution {
        grid: w.grid,
        values: w.values.iter().map(|v| cutoff(v, delta)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Sampled `sup |v_ref − v_num|`.
    pub delta: f64,
    pub q: SpaceTimeSolution,
}

/// `δ` = sup of `|v_ref − v_num|` over nodes × steps and step midpoints;
/// `Q = I_h max{v_ref − δ, 0}` at every step.
pub fn project_q(
    v_ref: &dyn ReferenceSolution,
    v_num: &SpaceTimeSolution,
    mesh: &Mesh,
) -> Result<Projection, AnalysisError> {
    let g = v_num.grid;
    let nodes = mesh.num_nodes();
    let reference = crate::par::try_map_range(g.steps + 1, |k| {
        let t = g.time(k);
        (0..nodes).map(|n| v_ref.value(t, mesh.node(n))).collect::<Result<Vec<_>, _>>()
    })?;
    let mut delta = 0.0_f64;
    for (r, v) in reference.iter().zip(&v_num.values) {
        for (a, b) in r.iter().zip(v) {
            delta = delta.max((a - b).abs());
        }
    }
    for k in 0..g.steps {
        let t = (k as f64 + 0.5) * g.h;
        let v = v_num.at_time(t);
        for (n, vn) in v.iter().enumerate() {
            delta = delta.max((v_ref.value(t, mesh.node(n))? - vn).abs());
        }
    }
    let q = SpaceTimeSolution {
        grid: g,
        values: reference.iter().map(|r| cutoff(r, delta)).collect(),
    };
    Ok(Projection { delta, q })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCheck {
    pub min_value: f64,
    pub max_boundary_abs: f64,
    /// `max (Q − v_num)` over nodes and steps.
    pub max_excess: f64,
}

impl ProjectionCheck {
    pub fn pass(&self, tol: f64) -> bool {
        self.min_value >= 0.0 && self.max_boundary_abs == 0.0 && self.max_excess <= tol
    }
}

/// Exhaustive nodewise check of `Q ≥ 0`, `Q = 0` on the boundary and `Q ≤ v_num`.
pub fn check_projection(q: &SpaceTimeSolution, v_num: &SpaceTimeSolution, mesh: &Mesh) -> ProjectionCheck {
    let ni = mesh.interior_count();
    let mut c = ProjectionCheck {
        min_value: f64::INFINITY,
        max_boundary_abs: 0.0,
        max_excess: f64::NEG_INFINITY,
    };
    for (qk, vk) in q.values.iter().zip(&v_num.values) {
        for (n, (a, b)) in qk.iter().zip(vk).enumerate() {
            c.min_value = c.min_value.min(*a);
            c.max_excess = c.max_excess.max(a - b);
            if n >= ni {
                c.max_boundary_abs = c.max_boundary_abs.max(a.abs());
            }
        }
    }
    c
}
