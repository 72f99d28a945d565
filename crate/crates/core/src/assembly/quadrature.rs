//! Fixed-order quadrature on simplices, in barycentric coordinates.

use super::AssemblyError;

/// Points are barycentric coordinates; weights sum to one and are scaled by
/// the cell volume at the call site.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn perms3(a: f64, b: f64, w: f64, points: &mut Vec<Vec<f64>>, weights: &mut Vec<f64>) {
    // (a, b, b) and permutations
    for i in 0..3 {
        let mut p = vec![b; 3];
        p[i] = a;
        points.push(p);
        weights.push(w);
    }
}

/// Rule exact for polynomials of total degree `order` on a `dim`-simplex.
/// Supported: 2D orders 1 to 5 (3 uses the degree-4 rule), 3D orders 1 and 2.
pub fn simplex_rule(dim: usize, order: usize) -> Result<QuadratureRule, AssemblyError> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let degree = match (dim, order) {
        (2, 1) => {
            points.push(vec![1.0 / 3.0; 3]);
            weights.push(1.0);
            1
        }
        (2, 2) => {
            perms3(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
            2
        }
        (2, 3) | (2, 4) => {
            let a = 0.445_948_490_915_965;
            perms3(1.0 - 2.0 * a, a, 0.223_381_589_678_011, &mut points, &mut weights);
            let b = 0.091_576_213_509_771;
            perms3(1.0 - 2.0 * b, b, 0.109_951_743_655_322, &mut points, &mut weights);
            4
        }
        (2, 5) => {
            points.push(vec![1.0 / 3.0; 3]);
            weights.push(0.225);
            perms3(
                0.059_715_871_789_770,
                0.470_142_064_105_115,
                0.132_394_152_788_506,
                &mut points,
                &mut weights,
            );
            perms3(
                0.797_426_985_353_087,
                0.101_286_507_323_456,
                0.125_939_180_544_827,
                &mut points,
                &mut weights,
            );
            5
        }
        (3, 1) => {
            points.push(vec![0.25; 4]);
            weights.push(1.0);
            1
        }
        (3, 2) => {
            let a = 0.585_410_196_624_969;
            let b = 0.138_196_601_125_011;
            for i in 0..4 {
                let mut p = vec![b; 4];
                p[i] = a;
                points.push(p);
                weights.push(0.25);
            }
            2
        }
        _ => return Err(AssemblyError::UnsupportedQuadrature { dim, order }),
    };
    // renormalise away the rounding in the tabulated weights
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule {
        degree,
        points,
        weights,
    })
}
