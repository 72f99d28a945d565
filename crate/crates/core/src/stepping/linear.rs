//! Linear sub-solvers behind a common interface.

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, MatMut};

use super::SolveError;
use crate::sparse::CsrMatrix;

/// A factorised square matrix.
pub trait Factorization: Send + Sync {
    /// Overwrites `rhs` with the solution of `A x = rhs`.
    fn solve_in_place(&self, rhs: &mut [f64]);
}

pub trait LinearSolver: Send + Sync {
    fn factor(&self, a: &CsrMatrix) -> Result<Box<dyn Factorization>, SolveError>;
}

/// Sparse LU with partial pivoting (faer).
#[derive(Debug, Clone, Copy, Default)]
pub struct SparseLu;

struct FaerLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl Factorization for FaerLu {
    fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.n;
        self.lu
            .solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(rhs, n, 1));
    }
}

impl LinearSolver for SparseLu {
    fn factor(&self, a: &CsrMatrix) -> Result<Box<dyn Factorization>, SolveError> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(SolveError::Linear(format!("matrix is {}x{}", n, a.ncols())));
        }
        let triplets: Vec<Triplet<usize, usize, f64>> =
            a.triplets().map(|(row, col, val)| Triplet { row, col, val }).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| SolveError::Linear(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| SolveError::Linear(format!("{e:?}")))?;
        Ok(Box::new(FaerLu { n, lu }))
    }
}

/// Dense LU (nalgebra); for small systems and cross-checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseLu;

struct NalgebraLu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>);

impl Factorization for NalgebraLu {
    fn solve_in_place(&self, rhs: &mut [f64]) {
        let mut b = nalgebra::DVector::from_column_slice(rhs);
        self.0.solve_mut(&mut b);
        rhs.copy_from_slice(b.as_slice());
    }
}

impl LinearSolver for DenseLu {
    fn factor(&self, a: &CsrMatrix) -> Result<Box<dyn Factorization>, SolveError> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(SolveError::Linear(format!("matrix is {}x{}", n, a.ncols())));
        }
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (r, c, v) in a.triplets() {
            m[(r, c)] += v;
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(SolveError::Linear("singular matrix".into()));
        }
        Ok(Box::new(NalgebraLu(lu)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_and_dense_agree() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 4.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 4.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 4.0)],
        );
        let b = vec![1.0, 2.0, 3.0];
        for solver in [&SparseLu as &dyn LinearSolver, &DenseLu] {
            let f = solver.factor(&a).unwrap();
            let mut x = b.clone();
            f.solve_in_place(&mut x);
            let r = a.mul_vec(&x);
            for (ri, bi) in r.iter().zip(&b) {
                assert!((ri - bi).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_is_an_error() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(DenseLu.factor(&a).is_err());
    }
}
