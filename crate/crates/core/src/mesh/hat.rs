//! Hat-function data: per-cell gradients, L1 norms, supports.

use super::Mesh;

/// Geometry of the nodal basis `φ_ℓ` of a mesh.
#[derive(Debug, Clone)]
pub struct HatData {
    dim: usize,
    /// `[cell][local vertex][component]`
    gradients: Vec<f64>,
    l1_norms: Vec<f64>,
    support_ptr: Vec<usize>,
    support: Vec<usize>,
}

/// Computes exact gradients of the affine hat functions on every cell and
/// `‖φ_ℓ‖_{L1} = Σ_{K ∋ ℓ} vol(K) / (d + 1)`.
pub fn compute_hat_data(mesh: &Mesh) -> HatData {
    let d = mesh.dim();
    let nloc = d + 1;
    let mut gradients = Vec::with_capacity(mesh.num_cells() * nloc * d);
    let mut l1_norms = vec![0.0; mesh.num_nodes()];
    let mut counts = vec![0usize; mesh.num_nodes()];
    for k in 0..mesh.num_cells() {
        // rows of J^{-1} are the gradients of λ_1..λ_d; λ_0 = 1 - Σ λ_i
        let inv = mesh
            .jacobian(k)
            .try_inverse()
            .expect("non-degenerate cells have invertible Jacobians");
        let mut g0 = vec![0.0; d];
        let mut rest = Vec::with_capacity(d * d);
        for i in 0..d {
            for c in 0..d {
                let gi = inv[(i, c)];
                g0[c] -= gi;
                rest.push(gi);
            }
        }
        gradients.extend_from_slice(&g0);
        gradients.extend_from_slice(&rest);
        let share = mesh.cell_volume(k) / nloc as f64;
        for &v in mesh.cell(k) {
            l1_norms[v] += share;
            counts[v] += 1;
        }
    }
    let mut support_ptr = vec![0; mesh.num_nodes() + 1];
    for (i, c) in counts.iter().enumerate() {
        support_ptr[i + 1] = support_ptr[i] + c;
    }
    let mut fill = support_ptr.clone();
    let mut support = vec![0; support_ptr[mesh.num_nodes()]];
    for k in 0..mesh.num_cells() {
        for &v in mesh.cell(k) {
            support[fill[v]] = k;
            fill[v] += 1;
        }
    }
    HatData {
        dim: d,
        gradients,
        l1_norms,
        support_ptr,
        support,
    }
}

impl HatData {
    /// `∇φ_ℓ|_K` for the `local`-th vertex of cell `cell`.
    pub fn gradient(&self, cell: usize, local: usize) -> &[f64] {
        let d = self.dim;
        let start = (cell * (d + 1) + local) * d;
        &self.gradients[start..start + d]
    }

    /// `‖φ_ℓ‖_{L1(Ω)}`.
    pub fn l1_norm(&self, node: usize) -> f64 {
        self.l1_norms[node]
    }

    pub fn l1_norms(&self) -> &[f64] {
        &self.l1_norms
    }

    /// Cells containing `node`, in increasing order.
    pub fn support(&self, node: usize) -> &[usize] {
        &self.support[self.support_ptr[node]..self.support_ptr[node + 1]]
    }

    /// Barycentric coordinates of `x` with respect to cell `cell`.
    pub fn barycentric(&self, mesh: &Mesh, cell: usize, x: &[f64]) -> Vec<f64> {
        let verts = mesh.cell(cell);
        (0..verts.len())
            .map(|i| {
                let vi = mesh.node(verts[i]);
                1.0 + self
                    .gradient(cell, i)
                    .iter()
                    .zip(x.iter().zip(vi))
                    .map(|(g, (xc, vc))| g * (xc - vc))
                    .sum::<f64>()
            })
            .collect()
    }

    /// Constant gradient of the P1 function with nodal values `values` on `cell`.
    pub fn function_gradient(&self, mesh: &Mesh, cell: usize, values: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (i, &v) in mesh.cell(cell).iter().enumerate() {
            for (gc, hc) in g.iter_mut().zip(self.gradient(cell, i)) {
                *gc += values[v] * hc;
            }
        }
        g
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_mesh, BoxDomain, Pattern};

    #[test]
    fn origin_hat_on_reference_triangle() {
        let mesh = Mesh::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0, 1, 2], &[true; 3]).unwrap();
        let hat = compute_hat_data(&mesh);
        // solve the 3x3 affine interpolation system a + b x + c y for each hat
        // by hand: φ_0 = 1 - x - y, φ_1 = x, φ_2 = y
        assert_eq!(hat.gradient(0, 0), &[-1.0, -1.0]);
        assert_eq!(hat.gradient(0, 1), &[1.0, 0.0]);
        assert_eq!(hat.gradient(0, 2), &[0.0, 1.0]);
        assert!((hat.l1_norm(0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_sum_to_zero_and_partition_of_unity() {
        for pattern in [Pattern::CrissCross, Pattern::Acute] {
            let mesh = generate_structured_mesh(&BoxDomain::unit(2), 2, pattern).unwrap();
            let hat = compute_hat_data(&mesh);
            for k in 0..mesh.num_cells() {
                let mut sum = [0.0; 2];
                for i in 0..3 {
                    sum[0] += hat.gradient(k, i)[0];
                    sum[1] += hat.gradient(k, i)[1];
                }
                assert!(sum[0].abs() < 1e-10 && sum[1].abs() < 1e-10);
                let x = mesh.map_barycentric(k, &[0.2, 0.3, 0.5]);
                let lam = hat.barycentric(&mesh, k, &x);
                assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!((lam[0] - 0.2).abs() < 1e-12 && (lam[2] - 0.5).abs() < 1e-12);
            }
            assert!(hat.l1_norms().iter().all(|&n| n > 0.0));
        }
    }

    #[test]
    fn criss_cross_level_one_l1_norms() {
        let mesh = generate_structured_mesh(&BoxDomain::unit(2), 1, Pattern::CrissCross).unwrap();
        let hat = compute_hat_data(&mesh);
        // every cell has area 1/16; summation formula count * vol / 3
        for node in 0..mesh.num_nodes() {
            let adjacent = (0..mesh.num_cells()).filter(|&k| mesh.cell(k).contains(&node)).count();
            assert_eq!(hat.support(node).len(), adjacent);
            let expected = adjacent as f64 * (1.0 / 16.0) / 3.0;
            assert!((hat.l1_norm(node) - expected).abs() < 1e-15);
        }
        // square centres touch 4 cells, the middle grid node 8
        let centre = (0..mesh.interior_count()).find(|&i| mesh.node(i) == [0.5, 0.5]).unwrap();
        assert!((hat.l1_norm(centre) - 8.0 / 48.0).abs() < 1e-15);
    }
}
