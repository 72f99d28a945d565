//! Structured triangulations of axis-aligned boxes.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Mesh, MeshError};

/// Absolute tolerance for classifying generated nodes as boundary nodes.
const BOUNDARY_TOL: f64 = 1e-12;

/// Offset of the shifted-row nodes in the acute block pattern. Chosen to
/// minimise the largest angle (about 75.5 degrees).
const ACUTE_OFFSET: f64 = 0.43;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        assert_eq!(self.lower.len(), self.upper.len());
        for (axis, length) in self.lengths().into_iter().enumerate() {
            if !(length > 0.0) {
                return Err(MeshError::DegenerateDomain { axis, length });
            }
        }
        Ok(())
    }

    pub fn on_boundary(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .any(|(&xi, (&lo, &hi))| (xi - lo).abs() <= BOUNDARY_TOL || (xi - hi).abs() <= BOUNDARY_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// Each grid square split by both diagonals into four right triangles.
    CrissCross,
    /// Strictly acute block pattern refined by midpoint subdivision.
    Acute,
}

impl FromStr for Pattern {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "criss-cross" | "crisscross" => Ok(Pattern::CrissCross),
            "acute" => Ok(Pattern::Acute),
            other => Err(MeshError::UnsupportedPattern(other.to_string())),
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pattern::CrissCross => "criss-cross",
            Pattern::Acute => "acute",
        })
    }
}

/// Generates a structured triangulation whose mesh size halves with every
/// refinement level.
pub fn generate_structured_mesh(
    domain: &BoxDomain,
    level: u32,
    pattern: Pattern,
) -> Result<Mesh, MeshError> {
    if domain.dim() != 2 {
        return Err(MeshError::UnsupportedDimension(domain.dim()));
    }
    domain.validate()?;
    let (coords, cells) = match pattern {
        Pattern::CrissCross => criss_cross(domain, level),
        Pattern::Acute => {
            let (mut coords, mut cells) = acute_blocks(domain);
            for _ in 0..level {
                (coords, cells) = refine_red(&coords, &cells);
            }
            (coords, cells)
        }
    };
    let boundary: Vec<bool> = coords.chunks(2).map(|x| domain.on_boundary(x)).collect();
    Mesh::new(2, coords, cells, &boundary)
}

fn criss_cross(domain: &BoxDomain, level: u32) -> (Vec<f64>, Vec<usize>) {
    let n = 1usize << level;
    let [lx, ly] = [domain.lengths()[0], domain.lengths()[1]];
    let (hx, hy) = (lx / n as f64, ly / n as f64);
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    let mut coords = Vec::with_capacity(2 * ((n + 1) * (n + 1) + n * n));
    for j in 0..=n {
        for i in 0..=n {
            coords.push(domain.lower[0] + i as f64 * hx);
            coords.push(domain.lower[1] + j as f64 * hy);
        }
    }
    let mut cells = Vec::with_capacity(12 * n * n);
    for j in 0..n {
        for i in 0..n {
            let center = coords.len() / 2;
            coords.push(domain.lower[0] + (i as f64 + 0.5) * hx);
            coords.push(domain.lower[1] + (j as f64 + 0.5) * hy);
            let (a, b, c, d) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
            cells.extend_from_slice(&[a, b, center, b, c, center, c, d, center, d, a, center]);
        }
    }
    (coords, cells)
}

/// Level-0 acute mesh: the box is covered by `nx × ny` blocks of roughly
/// unit aspect ratio, each triangulated by the same 16-triangle pattern.
fn acute_blocks(domain: &BoxDomain) -> (Vec<f64>, Vec<usize>) {
    let lengths = domain.lengths();
    let ratio = lengths[0] / lengths[1];
    let nx = ratio.round().max(1.0) as usize;
    let ny = (1.0 / ratio).round().max(1.0) as usize;
    let (bx, by) = (lengths[0] / nx as f64, lengths[1] / ny as f64);

    let mut coords = Vec::new();
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cells = Vec::new();
    for jb in 0..ny {
        for ib in 0..nx {
            let origin = [domain.lower[0] + ib as f64 * bx, domain.lower[1] + jb as f64 * by];
            // nodes on the block's outline sit on a half-block lattice and are shared
            let mut lattice = |i: usize, j: usize, coords: &mut Vec<f64>| -> usize {
                *shared.entry((2 * ib + i, 2 * jb + j)).or_insert_with(|| {
                    coords.push(origin[0] + 0.5 * i as f64 * bx);
                    coords.push(origin[1] + 0.5 * j as f64 * by);
                    coords.len() / 2 - 1
                })
            };
            let full: Vec<[usize; 3]> = (0..3)
                .map(|j| [0, 1, 2].map(|i| lattice(i, j, &mut coords)))
                .collect();
            let own = |x: f64, y: f64, coords: &mut Vec<f64>| -> usize {
                coords.push(origin[0] + x * bx);
                coords.push(origin[1] + y * by);
                coords.len() / 2 - 1
            };
            let shifted: Vec<[usize; 2]> = [0.25, 0.75]
                .iter()
                .map(|&y| [own(ACUTE_OFFSET, y, &mut coords), own(1.0 - ACUTE_OFFSET, y, &mut coords)])
                .collect();
            for strip in 0..2 {
                let (lo, hi, mid) = (full[strip], full[strip + 1], shifted[strip]);
                for row in [lo, hi] {
                    cells.extend_from_slice(&[row[0], row[1], mid[0]]);
                    cells.extend_from_slice(&[row[1], mid[1], mid[0]]);
                    cells.extend_from_slice(&[row[1], row[2], mid[1]]);
                }
                cells.extend_from_slice(&[lo[0], mid[0], hi[0]]);
                cells.extend_from_slice(&[lo[2], hi[2], mid[1]]);
            }
        }
    }
    (coords, cells)
}

/// One level of red refinement of an arbitrary 2D mesh. Midpoints of edges
/// that belong to a single triangle are boundary nodes.
pub fn refine_mesh(mesh: &Mesh) -> Result<Mesh, MeshError> {
    if mesh.dim() != 2 {
        return Err(MeshError::UnsupportedDimension(mesh.dim()));
    }
    let coords: Vec<f64> = (0..mesh.num_nodes()).flat_map(|i| mesh.node(i).to_vec()).collect();
    let cells: Vec<usize> = mesh.cells().flatten().copied().collect();
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in cells.chunks(3) {
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])] {
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let (new_coords, new_cells) = refine_red(&coords, &cells);
    let mut boundary: Vec<bool> = (0..mesh.num_nodes()).map(|i| !mesh.is_interior(i)).collect();
    boundary.resize(new_coords.len() / 2, false);
    // refine_red numbers midpoints in first-visit order; replay it
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut next = mesh.num_nodes();
    for tri in cells.chunks(3) {
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])] {
            let key = (a.min(b), a.max(b));
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(key) {
                e.insert(next);
                boundary[next] = edge_count[&key] == 1;
                next += 1;
            }
        }
    }
    Mesh::new(2, new_coords, new_cells, &boundary)
}

/// Uniform midpoint subdivision of every triangle into four similar ones.
fn refine_red(coords: &[f64], cells: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let mut coords = coords.to_vec();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, coords: &mut Vec<f64>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let m = [0.5 * (coords[2 * a] + coords[2 * b]), 0.5 * (coords[2 * a + 1] + coords[2 * b + 1])];
            coords.extend_from_slice(&m);
            coords.len() / 2 - 1
        })
    };
    let mut refined = Vec::with_capacity(4 * cells.len());
    for tri in cells.chunks(3) {
        let (v0, v1, v2) = (tri[0], tri[1], tri[2]);
        let m01 = midpoint(v0, v1, &mut coords);
        let m12 = midpoint(v1, v2, &mut coords);
        let m02 = midpoint(v0, v2, &mut coords);
        refined.extend_from_slice(&[v0, m01, m02, m01, v1, m12, m02, m12, v2, m01, m12, m02]);
    }
    (coords, refined)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refining_a_mesh_matches_the_generator() {
        let d = BoxDomain::unit(2);
        let coarse = generate_structured_mesh(&d, 1, Pattern::Acute).unwrap();
        let fine = generate_structured_mesh(&d, 2, Pattern::Acute).unwrap();
        let r = refine_mesh(&coarse).unwrap();
        assert_eq!(r.num_nodes(), fine.num_nodes());
        assert_eq!(r.interior_count(), fine.interior_count());
        assert!((r.mesh_size() - fine.mesh_size()).abs() < 1e-15);
        for i in r.interior_count()..r.num_nodes() {
            assert!(d.on_boundary(r.node(i)));
        }
    }

    #[test]
    fn criss_cross_level_zero() {
        let mesh = generate_structured_mesh(&BoxDomain::unit(2), 0, Pattern::CrissCross).unwrap();
        assert_eq!(mesh.num_nodes(), 5);
        assert_eq!(mesh.num_cells(), 4);
        assert_eq!(mesh.interior_count(), 1);
        assert_eq!(mesh.node(0), &[0.5, 0.5]);
        for k in 0..4 {
            assert!((mesh.cell_volume(k) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn mesh_size_halves_per_level() {
        for pattern in [Pattern::CrissCross, Pattern::Acute] {
            let sizes: Vec<f64> = (0..4)
                .map(|l| generate_structured_mesh(&BoxDomain::unit(2), l, pattern).unwrap().mesh_size())
                .collect();
            for w in sizes.windows(2) {
                assert!((w[0] / w[1] - 2.0).abs() < 1e-12, "{pattern}: {sizes:?}");
            }
        }
    }

    #[test]
    fn areas_cover_the_box() {
        let domain = BoxDomain {
            lower: vec![-1.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        for pattern in [Pattern::CrissCross, Pattern::Acute] {
            let mesh = generate_structured_mesh(&domain, 2, pattern).unwrap();
            let area: f64 = (0..mesh.num_cells()).map(|k| mesh.cell_volume(k)).sum();
            assert!((area - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_first_ordering_holds() {
        let domain = BoxDomain::unit(2);
        let mesh = generate_structured_mesh(&domain, 3, Pattern::Acute).unwrap();
        for i in 0..mesh.num_nodes() {
            assert_eq!(mesh.is_interior(i), !domain.on_boundary(mesh.node(i)));
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!("hex".parse::<Pattern>(), Err(MeshError::UnsupportedPattern(_))));
        let flat = BoxDomain {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 0.0],
        };
        assert!(matches!(
            generate_structured_mesh(&flat, 0, Pattern::Acute),
            Err(MeshError::DegenerateDomain { axis: 1, .. })
        ));
        assert!(matches!(
            generate_structured_mesh(&BoxDomain::unit(3), 0, Pattern::Acute),
            Err(MeshError::UnsupportedDimension(3))
        ));
    }
}
