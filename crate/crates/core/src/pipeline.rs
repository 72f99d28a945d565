//! Per-level discretisation: mesh, audits, operators.

use crate::assembly::{assemble_operators, DiscreteOperatorSet};
use crate::controls::{validate_problem, ControlProblem, MeshSource, ValidationReport};
use crate::mesh::{
    check_strict_acuteness, compute_hat_data, generate_structured_mesh, read_mesh_file, refine_mesh,
    AcutenessReport, HatData, Mesh,
};
use crate::monotonicity::{audit_all, MonotonicityReport};
use crate::stepping::{self, RunLog, SolveError, SolverConfig, SpaceTimeSolution, TimeStepPolicy};
use crate::Result;

/// Interior sample points per cell used by [`validate_problem`] here.
pub const VALIDATION_SAMPLES: usize = 3;

/// Mesh of refinement `level` for the problem's mesh source. File meshes
/// are refined uniformly `level` times.
pub fn build_mesh(p: &ControlProblem, level: u32) -> Result<Mesh> {
    Ok(match &p.mesh {
        MeshSource::Structured(pattern) => generate_structured_mesh(&p.domain, level, *pattern)?,
        MeshSource::File(path) => {
            let mut mesh = read_mesh_file(path)?;
            for _ in 0..level {
                mesh = refine_mesh(&mesh)?;
            }
            mesh
        }
    })
}

/// Everything computed for one refinement level before time stepping.
#[derive(Debug, Clone)]
pub struct Level {
    pub level: u32,
    pub mesh: Mesh,
    pub hat: HatData,
    pub acuteness: AcutenessReport,
    pub validation: ValidationReport,
    pub ops: DiscreteOperatorSet,
    pub audit: MonotonicityReport,
}

impl Level {
    pub fn audits_pass(&self) -> bool {
        self.acuteness.pass && self.validation.pass() && self.audit.pass()
    }

    pub fn audit_summary(&self) -> String {
        format!(
            "level {}: acuteness {} (theta {:.4}, largest admissible {:.4}), validation {}, monotonicity {}",
            self.level,
            pass_str(self.acuteness.pass),
            self.acuteness.theta,
            self.acuteness.max_admissible_theta,
            pass_str(self.validation.pass()),
            pass_str(self.audit.pass())
        )
    }
}

fn pass_str(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn discretize(p: &ControlProblem, level: u32, policy: &TimeStepPolicy) -> Result<Level> {
    let mesh = build_mesh(p, level)?;
    discretize_mesh(p, level, mesh, policy)
}

pub fn discretize_mesh(p: &ControlProblem, level: u32, mesh: Mesh, policy: &TimeStepPolicy) -> Result<Level> {
    let hat = compute_hat_data(&mesh);
    let acuteness = check_strict_acuteness(&mesh, p.theta)?;
    let validation = validate_problem(p, &mesh, VALIDATION_SAMPLES);
    let ops = assemble_operators(p, &mesh, &hat, p.quadrature_order, policy)?;
    let audit = audit_all(&ops);
    log::debug!(
        "level {level}: {} nodes, {} cells, dx = {:.4e}, {}",
        mesh.num_nodes(),
        mesh.num_cells(),
        mesh.mesh_size(),
        ops.grid
    );
    Ok(Level {
        level,
        mesh,
        hat,
        acuteness,
        validation,
        ops,
        audit,
    })
}

/// Solves the HJB scheme on a discretised level, refusing when any audit
/// failed unless `config.override_audits` is set.
pub fn solve_level(
    p: &ControlProblem,
    level: &Level,
    config: &SolverConfig,
) -> Result<(SpaceTimeSolution, RunLog)> {
    if !level.audits_pass() {
        if !config.override_audits {
            return Err(SolveError::AuditsFailed(level.audit_summary()).into());
        }
        log::warn!("UNAUDITED: {}", level.audit_summary());
    }
    let (sol, mut log) = stepping::solve(p, &level.mesh, &level.ops, config)?;
    log.unaudited |= !level.audits_pass();
    Ok((sol, log))
}
