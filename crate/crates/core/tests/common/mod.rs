//! Independent oracles shared by the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use hjb_core::assembly::DiscreteOperatorSet;
use hjb_core::controls::{ControlProblem, Part};
use hjb_core::mesh::Mesh;
use hjb_core::stepping::SpaceTimeSolution;

/// Three-point degree-2 rule on triangles (barycentric points, weights summing to 1).
const RULE: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// Area and hat gradients of a triangle from its vertex coordinates.
fn triangle_data(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let (x0, x1, x2) = (p[0], p[1], p[2]);
    let det = (x1[0] - x0[0]) * (x2[1] - x0[1]) - (x2[0] - x0[0]) * (x1[1] - x0[1]);
    let g1 = [(x2[1] - x0[1]) / det, -(x2[0] - x0[0]) / det];
    let g2 = [-(x1[1] - x0[1]) / det, (x1[0] - x0[0]) / det];
    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
    (0.5 * det.abs(), [g0, g1, g2])
}

pub struct DenseOperators {
    pub explicit: Vec<Vec<f64>>,
    pub implicit: Vec<Vec<f64>>,
    pub source: Vec<f64>,
}

/// Dense reassembly of `E^α`, `I^α`, `F^α` on a triangle mesh, taking only
/// the nodal diffusion floors and the implicit reaction shift from `ops`.
pub fn dense_assembly(p: &ControlProblem, mesh: &Mesh, ops: &DiscreteOperatorSet, alpha: usize) -> DenseOperators {
    assert_eq!(mesh.dim(), 2);
    let (ni, nn) = (mesh.interior_count(), mesh.num_nodes());
    let c_ops = ops.control(alpha);
    let mut mass = vec![0.0; nn];
    let mut cells = Vec::new();
    for k in 0..mesh.num_cells() {
        let v: Vec<usize> = mesh.cell(k).to_vec();
        let pts = [0, 1, 2].map(|i| [mesh.node(v[i])[0], mesh.node(v[i])[1]]);
        let (area, grads) = triangle_data(pts);
        for &n in &v {
            mass[n] += area / 3.0;
        }
        cells.push((v, pts, area, grads));
    }
    let mut out = DenseOperators {
        explicit: vec![vec![0.0; nn]; ni],
        implicit: vec![vec![0.0; nn]; ni],
        source: vec![0.0; ni],
    };
    for (v, pts, area, grads) in &cells {
        let xq: Vec<[f64; 2]> = RULE
            .iter()
            .map(|(l, _)| {
                [
                    l[0] * pts[0][0] + l[1] * pts[1][0] + l[2] * pts[2][0],
                    l[0] * pts[0][1] + l[1] * pts[1][1] + l[2] * pts[2][1],
                ]
            })
            .collect();
        for (part, shift) in [(Part::Explicit, 0.0), (Part::Implicit, c_ops.implicit_reaction_shift)] {
            let (target, diffusion) = match part {
                Part::Explicit => (&mut out.explicit, &c_ops.diffusion_explicit),
                Part::Implicit => (&mut out.implicit, &c_ops.diffusion_implicit),
            };
            for i in 0..3 {
                let l = v[i];
                if l >= ni {
                    continue;
                }
                for j in 0..3 {
                    let stiff = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    let mut lower = 0.0;
                    for (q, (lam, w)) in RULE.iter().enumerate() {
                        let b = p.advection(part, alpha, &xq[q]).unwrap();
                        let c = p.reaction(part, alpha, &xq[q]).unwrap() + shift;
                        lower += w * area * (b[0] * grads[j][0] + b[1] * grads[j][1] + c * lam[j]) * lam[i];
                    }
                    target[l][v[j]] += (diffusion[l] * stiff + lower) / mass[l];
                }
            }
        }
        for i in 0..3 {
            if v[i] < ni {
                for (q, (lam, w)) in RULE.iter().enumerate() {
                    out.source[v[i]] += w * area * p.source(alpha, &xq[q]).unwrap() * lam[i] / mass[v[i]];
                }
            }
        }
    }
    out
}

/// `max |A − B| / max |B|` over dense and sparse forms.
pub fn relative_difference(dense: &[Vec<f64>], sparse: &hjb_core::sparse::CsrMatrix) -> f64 {
    let s = sparse.to_dense();
    let mut diff = 0.0_f64;
    let mut scale = 0.0_f64;
    for (a, b) in dense.iter().zip(&s) {
        for (x, y) in a.iter().zip(b) {
            diff = diff.max((x - y).abs());
            scale = scale.max(x.abs());
        }
    }
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `max |a − b| / max |a|` for vectors.
pub fn relative_difference_vec(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Nodal interpolant of the final data with zero boundary values.
pub fn final_values(p: &ControlProblem, mesh: &Mesh) -> Vec<f64> {
    (0..mesh.num_nodes())
        .map(|n| if mesh.is_interior(n) { p.final_value(mesh.node(n)).unwrap() } else { 0.0 })
        .collect()
}

/// HJB step solution as the componentwise minimum over all policies of the
/// linear solutions `(Id + h I^π) v = v_{k+1} − h(E^π v_{k+1} − F^π)`.
pub fn enumerate_policies(p: &ControlProblem, mesh: &Mesh, ops: &DiscreteOperatorSet) -> SpaceTimeSolution {
    let (ni, na, h) = (ops.interior_count, ops.num_controls(), ops.h());
    let mut sol = SpaceTimeSolution::zeros(ops.grid, mesh.num_nodes());
    sol.values[ops.grid.steps] = final_values(p, mesh);
    let implicit: Vec<Vec<Vec<f64>>> = ops.controls.iter().map(|c| c.implicit.to_dense()).collect();
    for k in (0..ops.grid.steps).rev() {
        let next = sol.values[k + 1].clone();
        let rhs: Vec<Vec<f64>> = ops
            .controls
            .iter()
            .map(|c| {
                let ev = c.explicit.mul_vec(&next);
                (0..ni).map(|l| next[l] - h * (ev[l] - c.source[l])).collect()
            })
            .collect();
        let mut best = vec![f64::INFINITY; ni];
        for code in 0..na.pow(ni as u32) {
            let pi: Vec<usize> = (0..ni).map(|l| code / na.pow(l as u32) % na).collect();
            let a: Vec<Vec<f64>> = (0..ni)
                .map(|l| {
                    (0..ni)
                        .map(|c| h * implicit[pi[l]][l][c] + if c == l { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect();
            let b: Vec<f64> = (0..ni).map(|l| rhs[pi[l]][l]).collect();
            for (m, x) in best.iter_mut().zip(dense_solve(a, b)) {
                *m = m.min(x);
            }
        }
        sol.values[k][..ni].copy_from_slice(&best);
    }
    sol
}

/// Rowwise residual `(v_k − v_{k+1})/h + max_α((E v_{k+1})_ℓ − F_ℓ + (I v_k)_ℓ)`
/// at step `k`, in sup norm.
pub fn step_residual(ops: &DiscreteOperatorSet, sol: &SpaceTimeSolution, k: usize) -> f64 {
    let (vk, next) = (&sol.values[k], &sol.values[k + 1]);
    let h = ops.h();
    let parts: Vec<(Vec<f64>, Vec<f64>)> = ops
        .controls
        .iter()
        .map(|c| (c.explicit.mul_vec(next), c.implicit.mul_vec(vk)))
        .collect();
    (0..ops.interior_count)
        .map(|l| {
            let best = ops
                .controls
                .iter()
                .zip(&parts)
                .map(|(c, (e, i))| e[l] - c.source[l] + i[l])
                .fold(f64::NEG_INFINITY, f64::max);
            ((vk[l] - next[l]) / h + best).abs()
        })
        .max_by(f64::total_cmp)
        .unwrap_or(0.0)
}
