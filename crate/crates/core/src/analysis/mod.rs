//! Diagnostics: cut-off projection, weighted norms, the coercivity
//! inequality, the Sobolev-condition audit and error studies.

mod coercivity;
mod error_study;
mod projection;
mod sobolev;
mod weighted;

use thiserror::Error;

pub use coercivity::{
    check_coercivity, coercivity_constant, coercivity_property_run, random_nonnegative_w, CoercivityReport,
    CoercivityTrial,
};
pub use error_study::{
    error_study, level_errors, stability_report, ErrorMode, ErrorRow, ErrorStudyOptions, ErrorTable, ReferenceChoice,
    StabilityReport,
};
pub use projection::{check_projection, cutoff, cutoff_solution, project_q, Projection, ProjectionCheck};
pub use sobolev::{audit_sobolev_conditions, SobolevAudit, SobolevCondition, SOBOLEV_TOL};
pub use weighted::{
    cell_weight_integrals, h1_seminorm_sq, l2_norm_sq, weighted_h1_seminorm, weighted_h1_seminorm_with,
    ExactReference, FineGridReference, ReferenceSolution, WeightOrigin, WeightSpec,
};

use crate::controls::EvalError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("weight is negative ({value:e}) at {x:?}")]
    NegativeWeight { x: Vec<f64>, value: f64 },
    #[error("input must be non-negative; node {node} at step {step} has {value:e}")]
    NegativeInput { node: usize, step: usize, value: f64 },
    #[error("no Sobolev control is designated")]
    NoSobolevControl,
    #[error("evaluating {what}: {source}")]
    Eval {
        what: String,
        #[source]
        source: EvalError,
    },
    #[error("reference unavailable: {0}")]
    ReferenceUnavailable(String),
    #[error("an error study needs at least two levels in increasing order")]
    Levels,
}
