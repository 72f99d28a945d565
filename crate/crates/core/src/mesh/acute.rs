//! Strict acuteness: `∇φ_ℓ·∇φ_l|_K ≤ -sin(θ) |∇φ_ℓ|_K |∇φ_l|_K` for all
//! distinct vertices `ℓ, l` of every cell `K`.

use std::f64::consts::FRAC_PI_2;

use super::hat::{compute_hat_data, dot, norm};
use super::{Mesh, MeshError};

#[derive(Debug, Clone, PartialEq)]
pub struct AcutenessViolation {
    pub cell: usize,
    pub node_a: usize,
    pub node_b: usize,
    pub inner_product: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct AcutenessReport {
    pub theta: f64,
    pub pass: bool,
    /// Largest `θ` the mesh satisfies; 0 if some pair is not strictly obtuse.
    pub max_admissible_theta: f64,
    pub violations: Vec<AcutenessViolation>,
}

pub fn check_strict_acuteness(mesh: &Mesh, theta: f64) -> Result<AcutenessReport, MeshError> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(MeshError::InvalidTheta(theta));
    }
    let hat = compute_hat_data(mesh);
    let sin_theta = theta.sin();
    let mut min_ratio = f64::INFINITY;
    let mut violations = Vec::new();
    for k in 0..mesh.num_cells() {
        let cell = mesh.cell(k);
        for i in 0..cell.len() {
            for j in i + 1..cell.len() {
                let (gi, gj) = (hat.gradient(k, i), hat.gradient(k, j));
                let scale = norm(gi) * norm(gj);
                let ip = dot(gi, gj);
                min_ratio = min_ratio.min(-ip / scale);
                let bound = -sin_theta * scale;
                if ip > bound {
                    let (a, b) = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                    violations.push(AcutenessViolation {
                        cell: k,
                        node_a: a,
                        node_b: b,
                        inner_product: ip,
                        bound,
                    });
                }
            }
        }
    }
    let max_admissible_theta = if min_ratio > 0.0 {
        min_ratio.min(1.0).asin()
    } else {
        0.0
    };
    Ok(AcutenessReport {
        theta,
        pass: violations.is_empty(),
        max_admissible_theta,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_mesh, BoxDomain, Pattern};
    use std::f64::consts::PI;

    fn triangle(coords: Vec<f64>) -> Mesh {
        Mesh::new(2, coords, vec![0, 1, 2], &[true; 3]).unwrap()
    }

    #[test]
    fn right_isosceles_triangle_fails() {
        // legs along the axes: ∇φ_1 = (1,0), ∇φ_2 = (0,1) are orthogonal
        let mesh = triangle(vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        for theta in [1e-6, 0.3] {
            let report = check_strict_acuteness(&mesh, theta).unwrap();
            assert!(!report.pass);
            assert_eq!(report.violations.len(), 1);
            assert_eq!((report.violations[0].node_a, report.violations[0].node_b), (1, 2));
            assert_eq!(report.violations[0].inner_product, 0.0);
            assert_eq!(report.max_admissible_theta, 0.0);
        }
        // beyond 45 degrees the hypotenuse pairs fail as well
        assert_eq!(check_strict_acuteness(&mesh, 1.2).unwrap().violations.len(), 3);
    }

    #[test]
    fn equilateral_triangle_passes() {
        let mesh = triangle(vec![0.0, 0.0, 1.0, 0.0, 0.5, 3f64.sqrt() / 2.0]);
        let report = check_strict_acuteness(&mesh, PI / 6.0 - 1e-9).unwrap();
        assert!(report.pass);
        assert!(!check_strict_acuteness(&mesh, PI / 6.0 + 1e-9).unwrap().pass);
        // the angle between two hat gradients is 120 degrees: -cos = sin(30°)
        assert!((report.max_admissible_theta - PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_theta() {
        let mesh = triangle(vec![0.0, 0.0, 1.0, 0.0, 0.5, 1.0]);
        assert!(check_strict_acuteness(&mesh, 0.0).is_err());
        assert!(check_strict_acuteness(&mesh, FRAC_PI_2).is_err());
    }

    #[test]
    fn structured_patterns() {
        for level in 0..4 {
            let acute = generate_structured_mesh(&BoxDomain::unit(2), level, Pattern::Acute).unwrap();
            let report = check_strict_acuteness(&acute, 0.2).unwrap();
            assert!(report.pass, "level {level}");
            assert!(report.max_admissible_theta > 0.25);
            let cc = generate_structured_mesh(&BoxDomain::unit(2), level, Pattern::CrissCross).unwrap();
            assert!(!check_strict_acuteness(&cc, 1e-9).unwrap().pass);
        }
    }
}
