use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::assembly::AssemblyError;
use crate::controls::ProblemError;
use crate::mesh::MeshError;
use crate::stepping::SolveError;

/// Crate-level error, one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("problem: {0}")]
    Problem(#[from] ProblemError),
    #[error("assembly: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("stepping: {0}")]
    Solve(#[from] SolveError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
