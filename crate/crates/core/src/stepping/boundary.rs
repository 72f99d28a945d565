//! Boundary-control proxy table.

use std::io::Write;

use super::SpaceTimeSolution;
use crate::mesh::Mesh;

/// For each interior node sharing a cell with the boundary:
/// `min_α max_k v^α(s_k, y_ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryControlTable {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl BoundaryControlTable {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with columns `node_index,x1..xd,value`.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["node_index".to_string()];
        header.extend((1..=mesh.dim()).map(|i| format!("x{i}")));
        header.push("value".into());
        w.write_record(&header)?;
        for (&n, v) in self.nodes.iter().zip(&self.values) {
            let mut rec = vec![n.to_string()];
            rec.extend(mesh.node(n).iter().map(|x| format!("{x:.17e}")));
            rec.push(format!("{v:.17e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `linear` holds the single-control solutions `v^α`, one per control.
pub fn boundary_control_diagnostic(mesh: &Mesh, linear: &[SpaceTimeSolution]) -> BoundaryControlTable {
    let nodes = mesh.near_boundary_nodes();
    let values = nodes
        .iter()
        .map(|&n| {
            linear
                .iter()
                .map(|sol| sol.values.iter().map(|v| v[n]).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .map(|v| if v.is_finite() { v } else { 0.0 })
        .collect();
    BoundaryControlTable { nodes, values }
}
