//! Sampled sup and `W^{1,∞}` norms of coefficient functions.
//!
//! Norms over the whole domain are estimated on a uniform box grid whose
//! spacing is a quarter of the mesh size. Gradients use central differences
//! at interior grid points and one-sided differences on the grid boundary.
//! `‖g‖_{W^{1,∞}}` is taken as `max(sup |g|, sup |∇g|)`.

use crate::mesh::{BoxDomain, Mesh};
use crate::par;

/// Uniform sample grid on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    lower: Vec<f64>,
    spacing: Vec<f64>,
    /// Number of grid points per axis.
    counts: Vec<usize>,
}

impl SampleGrid {
    /// Grid with spacing at most `dx / 4` on every axis.
    pub fn for_mesh_size(domain: &BoxDomain, dx: f64) -> Self {
        Self::with_spacing(domain, dx / 4.0)
    }

    pub fn with_spacing(domain: &BoxDomain, target: f64) -> Self {
        let lengths = domain.lengths();
        let intervals: Vec<usize> = lengths.iter().map(|l| ((l / target).ceil() as usize).max(1)).collect();
        Self {
            lower: domain.lower.clone(),
            spacing: lengths.iter().zip(&intervals).map(|(l, &n)| l / n as f64).collect(),
            counts: intervals.iter().map(|n| n + 1).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let i = flat % n;
                flat /= n;
                i
            })
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.counts[..axis].iter().product()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(j, &i)| self.lower[j] + i as f64 * self.spacing[j])
            .collect()
    }

    /// True when the point lies strictly inside the box.
    pub fn is_interior(&self, flat: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .zip(&self.counts)
            .all(|(&i, &n)| i > 0 && i + 1 < n)
    }

    /// `f` at every grid point, in flat index order.
    pub fn values<E, F>(&self, f: F) -> Result<Vec<f64>, E>
    where
        E: Send,
        F: Fn(&[f64]) -> Result<f64, E> + Sync + Send,
    {
        par::try_map_range(self.len(), |i| f(&self.point(i)))
    }

    /// Finite-difference gradient of sampled values at grid point `flat`.
    pub fn gradient(&self, values: &[f64], flat: usize) -> Vec<f64> {
        let idx = self.multi_index(flat);
        (0..self.dim())
            .map(|j| {
                let s = self.stride(j);
                let n = self.counts[j];
                let i = idx[j];
                let hj = self.spacing[j];
                if n < 2 {
                    0.0
                } else if i == 0 {
                    (values[flat + s] - values[flat]) / hj
                } else if i + 1 == n {
                    (values[flat] - values[flat - s]) / hj
                } else {
                    (values[flat + s] - values[flat - s]) / (2.0 * hj)
                }
            })
            .collect()
    }

    /// Central second difference along `axis` at an interior grid point.
    pub fn second_difference(&self, values: &[f64], flat: usize, axis: usize) -> f64 {
        let s = self.stride(axis);
        let hj = self.spacing[axis];
        (values[flat + s] - 2.0 * values[flat] + values[flat - s]) / (hj * hj)
    }

    /// Five-point (seven-point in 3D) Laplacian at an interior grid point.
    pub fn laplacian(&self, values: &[f64], flat: usize) -> f64 {
        (0..self.dim()).map(|j| self.second_difference(values, flat, j)).sum()
    }

    /// `sup |g|` and `sup |∇g|` of sampled values.
    pub fn w1inf(&self, values: &[f64]) -> W1Inf {
        let sup = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let grad_sup = (0..self.len())
            .map(|i| norm(&self.gradient(values, i)))
            .fold(0.0_f64, f64::max);
        W1Inf { sup, grad_sup }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct W1Inf {
    pub sup: f64,
    pub grad_sup: f64,
}

impl W1Inf {
    pub fn norm(&self) -> f64 {
        self.sup.max(self.grad_sup)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Vertices plus edge midpoints of cell `k`.
pub fn cell_sample_points(mesh: &Mesh, k: usize) -> Vec<Vec<f64>> {
    let cell = mesh.cell(k);
    let mut pts: Vec<Vec<f64>> = cell.iter().map(|&n| mesh.node(n).to_vec()).collect();
    for i in 0..cell.len() {
        for j in (i + 1)..cell.len() {
            let (a, b) = (mesh.node(cell[i]), mesh.node(cell[j]));
            pts.push(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect());
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_box() {
        let g = SampleGrid::with_spacing(&BoxDomain::unit(2), 0.1);
        assert_eq!(g.len(), 121);
        assert_eq!(g.point(0), vec![0.0, 0.0]);
        assert!((g.point(120)[0] - 1.0).abs() < 1e-15);
        assert!(!g.is_interior(0));
        assert!(g.is_interior(12));
    }

    #[test]
    fn w1inf_of_affine_is_exact() {
        let g = SampleGrid::for_mesh_size(&BoxDomain::unit(2), 0.25);
        let v = g.values(|x| Ok::<_, ()>(3.0 * x[0] - 4.0 * x[1])).unwrap();
        let n = g.w1inf(&v);
        assert!((n.sup - 4.0).abs() < 1e-12);
        assert!((n.grad_sup - 5.0).abs() < 1e-12);
        assert_eq!(n.norm(), 5.0_f64.max(n.grad_sup));
    }

    #[test]
    fn w1inf_of_quadratic_is_close() {
        let g = SampleGrid::with_spacing(&BoxDomain::unit(2), 1.0 / 64.0);
        let v = g.values(|x| Ok::<_, ()>(x[0] * x[0])).unwrap();
        let n = g.w1inf(&v);
        assert!((n.sup - 1.0).abs() < 1e-12);
        // one-sided difference at x = 1 gives 2 - h
        assert!((n.grad_sup - 2.0).abs() < 1.0 / 32.0);
    }
}
