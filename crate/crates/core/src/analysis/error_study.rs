//! Error tables across refinement levels and the weighted stability bound.

use std::io::Write;

use super::{
    coercivity_constant, h1_seminorm_sq, l2_norm_sq, project_q, weighted_h1_seminorm, AnalysisError, ExactReference,
    FineGridReference, ReferenceSolution, WeightSpec,
};
use crate::assembly::simplex_rule;
use crate::controls::ControlProblem;
use crate::pipeline::{discretize, solve_level, Level};
use crate::stepping::{SolverConfig, SpaceTimeSolution, TimeStepPolicy};

/// What the numerical solution is compared with in the weighted H¹ error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    /// `v_i − I_i v_ref`.
    #[default]
    Interpolant,
    /// `v_i − Q_i v_ref`.
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceChoice {
    /// Exact solution when the problem has one, else the fine grid.
    #[default]
    Auto,
    Exact,
    /// Solution one level finer than the finest level studied.
    FineGrid,
}

#[derive(Debug, Clone, Default)]
pub struct ErrorStudyOptions {
    /// Time-step policy; the problem's own when `None`.
    pub policy: Option<TimeStepPolicy>,
    pub config: SolverConfig,
    pub mode: ErrorMode,
    pub reference: ReferenceChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub level: u32,
    pub dx: f64,
    pub h: f64,
    pub err_sup: f64,
    pub err_wh1: f64,
    pub rate_sup: Option<f64>,
    pub rate_wh1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub problem: String,
    /// `"exact"` or `"fine grid level n"`.
    pub reference: String,
    pub mode: ErrorMode,
    pub rows: Vec<ErrorRow>,
    /// Set when any level was solved with failing audits.
    pub unaudited: bool,
}

impl ErrorTable {
    /// Builds rows with `log2(e_i / e_{i+1})` rates.
    pub fn from_errors(problem: &str, reference: String, mode: ErrorMode, errors: Vec<(u32, f64, f64, f64, f64)>) -> Self {
        let rate = |a: f64, b: f64| (a / b).log2();
        let mut rows: Vec<ErrorRow> = Vec::with_capacity(errors.len());
        for (level, dx, h, err_sup, err_wh1) in errors {
            let (rate_sup, rate_wh1) = match rows.last() {
                Some(prev) => (Some(rate(prev.err_sup, err_sup)), Some(rate(prev.err_wh1, err_wh1))),
                None => (None, None),
            };
            rows.push(ErrorRow {
                level,
                dx,
                h,
                err_sup,
                err_wh1,
                rate_sup,
                rate_wh1,
            });
        }
        Self {
            problem: problem.to_string(),
            reference,
            mode,
            rows,
            unaudited: false,
        }
    }

    pub fn sup_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].err_sup < w[0].err_sup)
    }

    pub fn wh1_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].err_wh1 < w[0].err_wh1)
    }

    /// CSV with columns `level,dx,h,err_sup,err_wh1,rate_sup,rate_wh1`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "dx", "h", "err_sup", "err_wh1", "rate_sup", "rate_wh1"])?;
        let opt = |r: Option<f64>| r.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.level.to_string(),
                format!("{:.12e}", r.dx),
                format!("{:.12e}", r.h),
                format!("{:.12e}", r.err_sup),
                format!("{:.12e}", r.err_wh1),
                opt(r.rate_sup),
                opt(r.rate_wh1),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fractions of the horizon at which the affine-in-time solution is also sampled.
const MID_STEP_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];

/// `(L∞ error, weighted H¹ error)` of `v` on `level` against `reference`.
///
/// The L∞ error covers all nodes at all steps and at three mid-step
/// times; the weighted error uses [`WeightSpec::for_problem`].
pub fn level_errors(
    p: &ControlProblem,
    level: &Level,
    v: &SpaceTimeSolution,
    reference: &dyn ReferenceSolution,
    mode: ErrorMode,
) -> Result<(f64, f64), AnalysisError> {
    let mesh = &level.mesh;
    let g = v.grid;
    let nodes = mesh.num_nodes();
    let interp = crate::par::try_map_range(g.steps + 1, |k| {
        let t = g.time(k);
        (0..nodes)
            .map(|n| {
                if mesh.is_interior(n) {
                    reference.value(t, mesh.node(n))
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut sup = 0.0_f64;
    for (vk, ik) in v.values.iter().zip(&interp) {
        for (a, b) in vk.iter().zip(ik) {
            sup = sup.max((a - b).abs());
        }
    }
    if g.steps > 0 {
        for q in MID_STEP_FRACTIONS {
            let k = ((g.steps as f64 * q).floor() as usize).min(g.steps - 1);
            let t = (k as f64 + 0.5) * g.h;
            let vt = v.at_time(t);
            for (n, vn) in vt.iter().enumerate() {
                sup = sup.max((vn - reference.value(t, mesh.node(n))?).abs());
            }
        }
    }
    let target = match mode {
        ErrorMode::Interpolant => interp,
        ErrorMode::Projection => project_q(reference, v, mesh)?.q.values,
    };
    let diff = SpaceTimeSolution {
        grid: g,
        values: v
            .values
            .iter()
            .zip(&target)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect(),
    };
    let wh1 = weighted_h1_seminorm(mesh, &level.hat, &diff, &WeightSpec::for_problem(p))?;
    Ok((sup, wh1))
}

/// Solves `levels` (increasing, at least two) and tabulates errors.
pub fn error_study(p: &ControlProblem, levels: &[u32], opts: &ErrorStudyOptions) -> crate::Result<ErrorTable> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::Levels.into());
    }
    let policy = opts.policy.clone().unwrap_or_else(|| p.time_step.clone());
    let use_exact = match opts.reference {
        ReferenceChoice::Auto => p.exact.is_some(),
        ReferenceChoice::Exact => {
            if p.exact.is_none() {
                return Err(AnalysisError::ReferenceUnavailable(format!("problem {} has no exact solution", p.name)).into());
            }
            true
        }
        ReferenceChoice::FineGrid => false,
    };
    let fine_level = *levels.last().expect("checked non-empty") + 1;
    let mut all: Vec<u32> = levels.to_vec();
    if !use_exact {
        all.push(fine_level);
    }
    let solved = crate::par::map(&all, |&l| -> crate::Result<(Level, SpaceTimeSolution, bool)> {
        let level = discretize(p, l, &policy)?;
        let (sol, log) = solve_level(p, &level, &opts.config)?;
        Ok((level, sol, log.unaudited))
    });
    let mut solved = solved.into_iter().collect::<crate::Result<Vec<_>>>()?;
    let unaudited = solved.iter().any(|s| s.2);

    let (reference, label): (Box<dyn ReferenceSolution + '_>, String) = if use_exact {
        (
            Box::new(ExactReference(p.exact.as_ref().expect("checked above"))),
            "exact".to_string(),
        )
    } else {
        let (fine, sol, _) = solved.pop().expect("fine level solved");
        (
            Box::new(FineGridReference::new(fine.mesh, fine.hat, sol)),
            format!("fine grid level {fine_level}"),
        )
    };
    let errors = crate::par::map(&solved, |(level, sol, _)| {
        level_errors(p, level, sol, reference.as_ref(), opts.mode)
            .map(|(s, w)| (level.level, level.ops.dx, sol.grid.h, s, w))
    });
    let errors = errors.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut table = ErrorTable::from_errors(&p.name, label, opts.mode, errors);
    table.unaudited = unaudited;
    Ok(table)
}

/// Discrete stability bound `|v|²_{L²(H¹_i)} ≤ C ((T‖f‖_{L¹} + 1)‖v‖_∞ + C′‖v(T)‖²_{H¹})`,
/// with the constant `C = lhs / bound` reported.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub lhs: f64,
    pub source_l1: f64,
    pub sup: f64,
    pub c_prime: f64,
    pub final_h1_sq: f64,
    pub bound: f64,
    pub ratio: f64,
}

pub fn stability_report(p: &ControlProblem, level: &Level, v: &SpaceTimeSolution) -> Result<StabilityReport, AnalysisError> {
    let alpha = p.sobolev_control.ok_or(AnalysisError::NoSobolevControl)?;
    let s = level.ops.sobolev.as_ref().ok_or(AnalysisError::NoSobolevControl)?;
    let weight_i = WeightSpec::sobolev(p, alpha).level(s.mu);
    let lhs = weighted_h1_seminorm(&level.mesh, &level.hat, v, &weight_i)?.powi(2);
    let c_prime = coercivity_constant(p, &level.ops, &weight_i)?;
    let mesh = &level.mesh;
    let rule = simplex_rule(mesh.dim(), 2).expect("degree-2 rules exist in 2D and 3D");
    let mut source_l1 = 0.0_f64;
    for alpha in 0..p.num_controls() {
        let mut total = 0.0;
        for k in 0..mesh.num_cells() {
            let vol = mesh.cell_volume(k);
            for (lambda, w) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.map_barycentric(k, lambda);
                let f = p.source(alpha, &x).map_err(|source| AnalysisError::Eval {
                    what: format!("source at {x:?}"),
                    source,
                })?;
                total += vol * w * f.abs();
            }
        }
        source_l1 = source_l1.max(total);
    }
    let last = &v.values[v.grid.steps];
    let final_h1_sq = l2_norm_sq(mesh, last) + h1_seminorm_sq(mesh, &level.hat, last);
    let sup = v.max_abs();
    let bound = (p.horizon * source_l1 + 1.0) * sup + c_prime * final_h1_sq;
    Ok(StabilityReport {
        lhs,
        source_l1,
        sup,
        c_prime,
        final_h1_sq,
        bound,
        ratio: if bound > 0.0 { lhs / bound } else { 0.0 },
    })
}
