//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

mod common;

use std::time::Instant;

use hjb_core::analysis::{
    check_projection, coercivity_property_run, error_study, level_errors, project_q, ErrorMode, ErrorStudyOptions,
    ErrorTable, ExactReference, FineGridReference, ReferenceChoice, ReferenceSolution,
};
use hjb_core::builtin::{builtin, builtin_problems};
use hjb_core::controls::ControlProblem;
use hjb_core::monotonicity::{audit_all, audit_explicit, falsify_local_minimum};
use hjb_core::pipeline::{discretize, solve_level, Level};
use hjb_core::stepping::{SolverConfig, SpaceTimeSolution, TimeStepPolicy};

const LEVELS: [u32; 3] = [1, 2, 3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn level(p: &ControlProblem, l: u32) -> Level {
    discretize(p, l, &p.time_step).unwrap_or_else(|e| panic!("{} level {l}: {e}", p.name))
}

fn solved(p: &ControlProblem, l: u32) -> (Level, SpaceTimeSolution, f64) {
    let lv = level(p, l);
    let (sol, log) = solve_level(p, &lv, &SolverConfig::default()).unwrap_or_else(|e| panic!("{} level {l}: {e}", p.name));
    let tol = log.tolerance;
    (lv, sol, tol)
}

fn monotonicity() -> Outcome {
    let mut worst_off = f64::NEG_INFINITY;
    let mut worst_step = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for p in builtin_problems() {
        for l in LEVELS {
            let lv = level(&p, l);
            let mut report = audit_all(&lv.ops);
            if lv.ops.h_max.is_finite() {
                report = report.merge(audit_explicit(&lv.ops, 0.9 * lv.ops.h_max));
            }
            for c in &report.controls {
                if let Some(e) = &c.explicit {
                    worst_off = worst_off.max(e.max_offdiagonal);
                    worst_step = worst_step.max(e.max_step_entry);
                }
            }
            if !report.pass() || !lv.acuteness.pass || !falsify_local_minimum(&lv.ops, 500, u64::from(l)).pass() {
                failures.push(format!("{} L{l}", p.name));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("max off-diagonal of E = {worst_off:.2e}, max entry of hE - Id = {worst_step:.2e}, failures {failures:?}"),
    )
}

fn non_negativity_and_residuals() -> (Outcome, Outcome) {
    let mut min = f64::INFINITY;
    let mut worst_ratio = 0.0_f64;
    for p in builtin_problems() {
        for l in LEVELS {
            let (lv, sol, tol) = solved(&p, l);
            min = min.min(sol.min_value());
            for k in 0..sol.grid.steps {
                worst_ratio = worst_ratio.max(common::step_residual(&lv.ops, &sol, k) / tol);
            }
        }
    }
    let p = builtin("DEGEN2").unwrap();
    let lv = level(&p, 0);
    let (sol, _) = solve_level(&p, &lv, &SolverConfig::default()).unwrap();
    let oracle = common::enumerate_policies(&p, &lv.mesh, &lv.ops);
    let dev = sol.max_abs_difference(&oracle);
    let small = lv.mesh.num_nodes() <= 15 && lv.ops.num_controls() == 2;
    (
        outcome(min >= -1e-10, format!("min nodal value = {min:.3e}")),
        outcome(
            worst_ratio <= 1.0 && dev <= 1e-9 && small,
            format!(
                "max residual / tolerance = {worst_ratio:.3e}; enumeration on {} nodes, {} controls: deviation {dev:.3e}",
                lv.mesh.num_nodes(),
                lv.ops.num_controls()
            ),
        ),
    )
}

fn describe(t: &ErrorTable) -> String {
    t.rows
        .iter()
        .map(|r| {
            format!(
                "L{} sup {:.3e} wh1 {:.3e}{}",
                r.level,
                r.err_sup,
                r.err_wh1,
                r.rate_sup.map(|x| format!(" (rate {x:.2})")).unwrap_or_default()
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn heat_convergence() -> Outcome {
    let p = builtin("HEAT").unwrap();
    let opts = ErrorStudyOptions {
        reference: ReferenceChoice::Exact,
        ..Default::default()
    };
    let t = error_study(&p, &LEVELS, &opts).unwrap();
    let rate = t.rows.last().and_then(|r| r.rate_sup).unwrap_or(f64::NAN);
    outcome(t.sup_strictly_decreasing() && rate >= 0.5, describe(&t))
}

fn degen2_convergence(fine: &FineGridReference, runs: &[(Level, SpaceTimeSolution)]) -> Outcome {
    let p = builtin("DEGEN2").unwrap();
    let errors = runs
        .iter()
        .map(|(lv, sol)| {
            let (s, w) = level_errors(&p, lv, sol, fine, ErrorMode::Interpolant).unwrap();
            (lv.level, lv.ops.dx, sol.grid.h, s, w)
        })
        .collect();
    let t = ErrorTable::from_errors(&p.name, "fine grid level 4".into(), ErrorMode::Interpolant, errors);
    outcome(t.sup_strictly_decreasing() && t.wh1_strictly_decreasing(), describe(&t))
}

fn coercivity() -> Outcome {
    let p = builtin("DEGEN2").unwrap();
    let lv = level(&p, 2);
    let r = coercivity_property_run(&p, &lv, 100, 20_261_014, 1.0).unwrap();
    let worst = r.trials.iter().map(|t| t.lhs / t.rhs).fold(0.0, f64::max);
    outcome(
        r.pass() && r.trials.len() == 100,
        format!(
            "{}/{} trials, mu = {:.4e}, C' = {:.4e}, max lhs/rhs = {worst:.3}",
            r.pass_count(),
            r.trials.len(),
            r.mu,
            r.c_prime
        ),
    )
}

fn h_max_scaling() -> Outcome {
    // ratios between levels 0..=3; the criterion uses the 1..=3 window
    let ratios = |name: &str| -> Vec<f64> {
        let p = builtin(name).unwrap();
        let h: Vec<f64> = [0, 1, 2, 3]
            .iter()
            .map(|&l| discretize(&p, l, &TimeStepPolicy::auto()).unwrap().ops.h_max)
            .collect();
        h.windows(2).map(|w| w[0] / w[1]).collect()
    };
    let diffusion = ratios("HEAT_EXPLICIT");
    let advection = ratios("ADVECT");
    let within = |r: &[f64], target: f64| r[1..].iter().all(|x| (x / target - 1.0).abs() <= 0.2);
    let implicit: Vec<f64> = ["HEAT", "DEGEN2"]
        .iter()
        .map(|n| level(&builtin(n).unwrap(), 1).ops.h_max)
        .collect();
    outcome(
        within(&diffusion, 4.0) && within(&advection, 2.0) && implicit.iter().all(|h| *h == f64::INFINITY),
        format!(
            "levels 1-3: explicit diffusion ratios {:.4?}, advection ratios {:.4?} (level 0 to 1: {:.4}, {:.4}); \
             fully implicit h_max {implicit:?}",
            &diffusion[1..],
            &advection[1..],
            diffusion[0],
            advection[0]
        ),
    )
}

fn assembly_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for p in builtin_problems() {
        for l in 0..=2 {
            let lv = level(&p, l);
            if lv.mesh.num_nodes() > 200 {
                continue;
            }
            for a in 0..p.num_controls() {
                let d = common::dense_assembly(&p, &lv.mesh, &lv.ops, a);
                let c = lv.ops.control(a);
                worst = worst
                    .max(common::relative_difference(&d.explicit, &c.explicit))
                    .max(common::relative_difference(&d.implicit, &c.implicit))
                    .max(common::relative_difference_vec(&d.source, &c.source));
                checked += 1;
            }
        }
    }
    outcome(worst <= 1e-12, format!("{checked} operator sets, max relative difference {worst:.3e}"))
}

fn projection(fine: &FineGridReference, degen: &[(Level, SpaceTimeSolution)]) -> Outcome {
    let heat = builtin("HEAT").unwrap();
    let exact = ExactReference(heat.exact.as_ref().unwrap());
    let mut worst = (f64::INFINITY, 0.0_f64, f64::NEG_INFINITY);
    let mut all = true;
    let mut check = |r: &dyn ReferenceSolution, lv: &Level, sol: &SpaceTimeSolution| {
        let q = project_q(r, sol, &lv.mesh).unwrap();
        let c = check_projection(&q.q, sol, &lv.mesh);
        all &= c.pass(1e-12);
        worst = (worst.0.min(c.min_value), worst.1.max(c.max_boundary_abs), worst.2.max(c.max_excess));
    };
    for l in LEVELS {
        let (lv, sol, _) = solved(&heat, l);
        check(&exact, &lv, &sol);
    }
    for (lv, sol) in degen {
        check(fine, lv, sol);
    }
    outcome(
        all,
        format!("min Q = {:.3e}, max |Q| on boundary = {:.3e}, max Q - v = {:.3e}", worst.0, worst.1, worst.2),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed().as_secs_f64())
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64, f64)> = Vec::new();

    let (o, s) = timed(monotonicity);
    results.push((1, "monotonicity suite", o, s, 10.0));
    let ((c2, c3), s) = timed(non_negativity_and_residuals);
    results.push((2, "non-negativity", c2, s, 30.0));
    results.push((3, "scheme residual and enumeration oracle", c3, s, f64::INFINITY));
    let (o, s) = timed(heat_convergence);
    results.push((4, "HEAT convergence", o, s, 60.0));

    let ((fine, runs), setup) = timed(|| {
        let degen = builtin("DEGEN2").unwrap();
        let (fine_level, fine_sol, _) = solved(&degen, 4);
        let fine = FineGridReference::new(fine_level.mesh, fine_level.hat, fine_sol);
        let runs: Vec<(Level, SpaceTimeSolution)> = LEVELS
            .iter()
            .map(|&l| {
                let (lv, sol, _) = solved(&degen, l);
                (lv, sol)
            })
            .collect();
        (fine, runs)
    });
    let (o, s) = timed(|| degen2_convergence(&fine, &runs));
    results.push((5, "DEGEN2 convergence against level 4", o, s + setup, 120.0));
    let (o, s) = timed(coercivity);
    results.push((6, "coercivity property run", o, s, 60.0));
    let (o, s) = timed(h_max_scaling);
    results.push((7, "time-step scaling", o, s, f64::INFINITY));
    let (o, s) = timed(assembly_oracle);
    results.push((8, "sparse vs dense assembly", o, s, f64::INFINITY));
    let (o, s) = timed(|| projection(&fine, &runs));
    results.push((9, "projection properties", o, s, f64::INFINITY));

    let mut failed = 0;
    for (n, name, o, secs, limit) in &results {
        let ok = o.pass && secs < limit;
        if !ok {
            failed += 1;
        }
        let budget = if limit.is_finite() { format!(", limit {limit:.0} s") } else { String::new() };
        println!(
            "criterion {n} [{}] {name}: {} ({secs:.2} s{budget})",
            if ok { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all {} acceptance criteria passed", results.len());
}
