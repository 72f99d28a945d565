//! Conforming P1 simplicial meshes.
//!
//! Nodes are always stored interior-first: indices `0..interior_count()` lie
//! in the open domain, the remaining ones on its boundary. Every constructor
//! reorders its input accordingly and keeps the map back to the original
//! numbering.

mod acute;
mod generate;
mod hat;
mod io;
mod locate;

use std::collections::HashMap;

use nalgebra::DMatrix;
use thiserror::Error;

pub use acute::{check_strict_acuteness, AcutenessReport, AcutenessViolation};
pub use generate::{generate_structured_mesh, refine_mesh, BoxDomain, Pattern};
pub use hat::{compute_hat_data, HatData};
pub use io::{read_mesh, read_mesh_file, write_mesh};
pub use locate::PointLocator;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unsupported mesh pattern `{0}` (expected `criss-cross` or `acute`)")]
    UnsupportedPattern(String),
    #[error("degenerate domain: side {axis} has length {length}")]
    DegenerateDomain { axis: usize, length: f64 },
    #[error("structured generators only support d = 2, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("cell {cell} is degenerate (volume {volume:e})")]
    DegenerateCell { cell: usize, volume: f64 },
    #[error("cell {cell} references vertex {vertex}, but the mesh has {count} vertices")]
    VertexOutOfRange { cell: usize, vertex: usize, count: usize },
    #[error("mesh is not conforming: face {face:?} is shared by {count} cells")]
    NonConforming { face: Vec<usize>, count: usize },
    #[error("node {node} lies on a boundary face but is not declared as a boundary node")]
    UndeclaredBoundaryNode { node: usize },
    #[error("angle theta = {0} must lie in (0, pi/2)")]
    InvalidTheta(f64),
    #[error("mesh file, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Conforming simplicial mesh of a bounded domain in `R^d`.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    interior_count: usize,
    cell_volumes: Vec<f64>,
    cell_diameters: Vec<f64>,
    mesh_size: f64,
    original_index: Vec<usize>,
}

impl Mesh {
    /// Builds a mesh from flat coordinate and connectivity arrays.
    ///
    /// `boundary[i]` marks vertex `i` as a Dirichlet boundary node. Nodes
    /// are renumbered interior-first (stable within each group).
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        cells: Vec<usize>,
        boundary: &[bool],
    ) -> Result<Self, MeshError> {
        let nv = coords.len() / dim;
        assert_eq!(coords.len(), nv * dim, "coordinate array length");
        assert_eq!(boundary.len(), nv, "boundary flag length");
        let nloc = dim + 1;
        assert_eq!(cells.len() % nloc, 0, "connectivity length");
        for (k, cell) in cells.chunks(nloc).enumerate() {
            if let Some(&v) = cell.iter().find(|&&v| v >= nv) {
                return Err(MeshError::VertexOutOfRange {
                    cell: k,
                    vertex: v,
                    count: nv,
                });
            }
        }

        let mut original_index: Vec<usize> = (0..nv).filter(|&i| !boundary[i]).collect();
        let interior_count = original_index.len();
        original_index.extend((0..nv).filter(|&i| boundary[i]));
        let mut new_index = vec![0; nv];
        for (new, &old) in original_index.iter().enumerate() {
            new_index[old] = new;
        }
        let mut sorted_coords = vec![0.0; coords.len()];
        for (new, &old) in original_index.iter().enumerate() {
            sorted_coords[new * dim..(new + 1) * dim]
                .copy_from_slice(&coords[old * dim..(old + 1) * dim]);
        }
        let cells: Vec<usize> = cells.iter().map(|&v| new_index[v]).collect();

        let mut mesh = Mesh {
            dim,
            coords: sorted_coords,
            cells,
            interior_count,
            cell_volumes: Vec::new(),
            cell_diameters: Vec::new(),
            mesh_size: 0.0,
            original_index,
        };
        mesh.compute_geometry()?;
        mesh.check_conformity()?;
        Ok(mesh)
    }

    fn compute_geometry(&mut self) -> Result<(), MeshError> {
        let d = self.dim;
        let factorial: f64 = (1..=d).map(|k| k as f64).product();
        let mut volumes = Vec::with_capacity(self.num_cells());
        let mut diameters = Vec::with_capacity(self.num_cells());
        for k in 0..self.num_cells() {
            let cell = self.cell(k);
            let jac = self.jacobian(k);
            let volume = jac.determinant().abs() / factorial;
            let mut diam: f64 = 0.0;
            for i in 0..cell.len() {
                for j in i + 1..cell.len() {
                    diam = diam.max(dist(self.node(cell[i]), self.node(cell[j])));
                }
            }
            if !(volume > 1e-14 * diam.powi(d as i32)) {
                return Err(MeshError::DegenerateCell { cell: k, volume });
            }
            volumes.push(volume);
            diameters.push(diam);
        }
        self.mesh_size = diameters.iter().copied().fold(0.0, f64::max);
        self.cell_volumes = volumes;
        self.cell_diameters = diameters;
        Ok(())
    }

    fn check_conformity(&self) -> Result<(), MeshError> {
        let mut faces: HashMap<Vec<usize>, usize> = HashMap::new();
        for k in 0..self.num_cells() {
            let cell = self.cell(k);
            for skip in 0..cell.len() {
                let mut face: Vec<usize> = cell
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                face.sort_unstable();
                *faces.entry(face).or_insert(0) += 1;
            }
        }
        let mut exterior: Vec<&Vec<usize>> = Vec::new();
        for (face, &count) in &faces {
            if count > 2 {
                return Err(MeshError::NonConforming {
                    face: face.clone(),
                    count,
                });
            }
            if count == 1 {
                exterior.push(face);
            }
        }
        let mut offender = exterior
            .iter()
            .flat_map(|f| f.iter().copied())
            .filter(|&v| v < self.interior_count)
            .collect::<Vec<_>>();
        offender.sort_unstable();
        if let Some(&node) = offender.first() {
            return Err(MeshError::UndeclaredBoundaryNode {
                node: self.original_index[node],
            });
        }
        Ok(())
    }

    /// Columns are the edge vectors `v_i - v_0`, `i = 1..=d`.
    pub(crate) fn jacobian(&self, k: usize) -> DMatrix<f64> {
        let d = self.dim;
        let cell = self.cell(k);
        let v0 = self.node(cell[0]);
        DMatrix::from_fn(d, d, |r, c| self.node(cell[c + 1])[r] - v0[r])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    /// `N_i`, the number of interior nodes (the dimension of `V_i^0`).
    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    pub fn is_interior(&self, node: usize) -> bool {
        node < self.interior_count
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.cells[k * n..(k + 1) * n]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        self.cell_volumes[k]
    }

    /// `Δx_K`, the diameter of cell `k`.
    pub fn cell_diameter(&self, k: usize) -> f64 {
        self.cell_diameters[k]
    }

    /// `Δx_i = max_K Δx_K`.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    /// Index of node `i` in the numbering the mesh was constructed from.
    pub fn original_index(&self, i: usize) -> usize {
        self.original_index[i]
    }

    pub fn original_indices(&self) -> &[usize] {
        &self.original_index
    }

    /// Point on the segment/simplex given by barycentric weights.
    pub fn map_barycentric(&self, k: usize, lambda: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (&v, &l) in self.cell(k).iter().zip(lambda) {
            for (xi, yi) in x.iter_mut().zip(self.node(v)) {
                *xi += l * yi;
            }
        }
        x
    }

    /// Largest ratio of cell diameter to inscribed radius.
    pub fn shape_regularity(&self) -> f64 {
        let d = self.dim;
        let facet_factorial: f64 = (1..d).map(|k| k as f64).product();
        (0..self.num_cells())
            .map(|k| {
                let cell = self.cell(k);
                let mut surface = 0.0;
                for skip in 0..cell.len() {
                    let face: Vec<&[f64]> = cell
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &v)| self.node(v))
                        .collect();
                    let edges = DMatrix::from_fn(d, d - 1, |r, c| face[c + 1][r] - face[0][r]);
                    let gram = edges.transpose() * &edges;
                    surface += gram.determinant().max(0.0).sqrt() / facet_factorial;
                }
                let inradius = d as f64 * self.cell_volume(k) / surface;
                self.cell_diameter(k) / inradius
            })
            .fold(0.0, f64::max)
    }

    /// Interior nodes that share a cell with at least one boundary node.
    pub fn near_boundary_nodes(&self) -> Vec<usize> {
        let mut flag = vec![false; self.interior_count];
        for cell in self.cells() {
            if cell.iter().any(|&v| !self.is_interior(v)) {
                for &v in cell {
                    if self.is_interior(v) {
                        flag[v] = true;
                    }
                }
            }
        }
        (0..self.interior_count).filter(|&i| flag[i]).collect()
    }
}

/// Values of `f` at every node, in mesh order. Boundary entries are not
/// modified; callers impose boundary conditions explicitly.
pub fn nodal_interpolate<E, F>(mesh: &Mesh, mut f: F) -> Result<Vec<f64>, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    (0..mesh.num_nodes()).map(|i| f(mesh.node(i))).collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
