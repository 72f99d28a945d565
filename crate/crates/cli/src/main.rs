//! `hjb`: command-line driver for the monotone HJB finite element toolkit.
//!
//! Exit status: 0 when every audit passed, 1 when an audit failed, 2 on
//! errors (bad input, solver failure).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use hjb_core::analysis::{
    audit_sobolev_conditions, coercivity_property_run, error_study, ErrorMode, ErrorStudyOptions, ReferenceChoice,
};
use hjb_core::builtin::builtin;
use hjb_core::controls::ControlProblem;
use hjb_core::monotonicity::falsify_local_minimum;
use hjb_core::pipeline::{discretize, solve_level, Level};
use hjb_core::stepping::{
    boundary_control_diagnostic, solve_linear_control, SolverConfig, TimeStepMode, TimeStepPolicy,
};

const LOG_ENV: &str = "HJB_LOG";
const FALSIFICATION_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Discretise, audit and solve each level.
    Run,
    /// Error table across levels.
    Convergence,
    /// Operator sign audits only.
    AuditMonotone,
    /// Randomised coercivity run and Sobolev-condition audit.
    AuditCoercivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliErrorMode {
    Interpolant,
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliReference {
    Auto,
    Exact,
    Fine,
}

/// Monotone P1 finite elements for degenerate parabolic HJB equations.
#[derive(Debug, Parser)]
#[command(name = "hjb", version, after_help = "Log verbosity is read from HJB_LOG (e.g. HJB_LOG=debug).")]
struct Cli {
    /// Problem file, or `builtin:NAME` (HEAT, HEAT_EXPLICIT, ADVECT, DEGEN2).
    #[arg(long)]
    problem: String,
    /// Refinement levels, `a..b` (inclusive) or a single level.
    #[arg(long, default_value = "1..3", value_parser = parse_levels)]
    levels: Levels,
    #[arg(long, value_enum, default_value_t = Mode::Run)]
    mode: Mode,
    /// Time step: `auto` or a value dividing the horizon.
    #[arg(long, default_value = "auto", value_parser = parse_h)]
    h: StepChoice,
    /// Seed for randomised property runs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Solve even if acuteness, validation or monotonicity audits fail;
    /// every output is then stamped UNAUDITED.
    #[arg(long)]
    override_audits: bool,
    /// Trials in audit-coercivity mode.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Weighted-error comparison in convergence mode.
    #[arg(long, value_enum, default_value_t = CliErrorMode::Interpolant)]
    error_mode: CliErrorMode,
    /// Reference solution in convergence mode.
    #[arg(long, value_enum, default_value_t = CliReference::Auto)]
    reference: CliReference,
}

#[derive(Debug, Clone, PartialEq)]
struct Levels(Vec<u32>);

#[derive(Debug, Clone, Copy, PartialEq)]
enum StepChoice {
    Auto,
    Fixed(f64),
}

fn parse_levels(s: &str) -> Result<Levels, String> {
    let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("bad level `{t}`: {e}"));
    let levels: Vec<u32> = match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty level range {s}"));
            }
            (a..=b).collect()
        }
        None => vec![parse(s)?],
    };
    Ok(Levels(levels))
}

fn parse_h(s: &str) -> Result<StepChoice, String> {
    if s == "auto" {
        return Ok(StepChoice::Auto);
    }
    match s.parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(StepChoice::Fixed(h)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

fn load_problem(spec: &str) -> Result<ControlProblem> {
    match spec.strip_prefix("builtin:") {
        Some(name) => builtin(name).with_context(|| format!("loading built-in problem {name}")),
        None => ControlProblem::from_file(spec).with_context(|| format!("loading problem file {spec}")),
    }
}

/// Output directory; every file starts with `# UNAUDITED` when `stamp` is set.
struct Output {
    dir: PathBuf,
    stamp: bool,
}

impl Output {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let mut f = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        if self.stamp {
            writeln!(f, "# UNAUDITED")?;
        }
        Ok(f)
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        let mut f = self.create(name)?;
        f.write_all(body.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

fn level_report(p: &ControlProblem, lv: &Level) -> String {
    let mut s = String::new();
    let a = &lv.acuteness;
    s.push_str(&format!("problem {}, level {}\n", p.name, lv.level));
    s.push_str(&format!(
        "nodes = {}, interior = {}, cells = {}, dx = {:.6e}, shape regularity = {:.4}\n",
        lv.mesh.num_nodes(),
        lv.mesh.interior_count(),
        lv.mesh.num_cells(),
        lv.ops.dx,
        lv.mesh.shape_regularity()
    ));
    s.push_str(&format!(
        "acuteness: {} (theta = {}, largest admissible {:.6}, {} violations)\n",
        if a.pass { "pass" } else { "FAIL" },
        a.theta,
        a.max_admissible_theta,
        a.violations.len()
    ));
    for v in a.violations.iter().take(20) {
        s.push_str(&format!(
            "  cell {} nodes ({}, {}): {:.6e} > {:.6e}\n",
            v.cell, v.node_a, v.node_b, v.inner_product, v.bound
        ));
    }
    s.push_str(&lv.validation.to_string());
    s.push_str(&format!("h_max = {:e}, {}\n", lv.ops.h_max, lv.ops.grid));
    s.push_str(&lv.audit.to_string());
    if let Some(sob) = lv.ops.sobolev_summary() {
        s.push_str(&sob);
    }
    s
}

fn policy(p: &ControlProblem, h: StepChoice) -> TimeStepPolicy {
    match h {
        StepChoice::Auto => TimeStepPolicy {
            mode: TimeStepMode::Auto,
            fixed_h: None,
            ..p.time_step.clone()
        },
        StepChoice::Fixed(h) => TimeStepPolicy {
            mode: TimeStepMode::Fixed,
            fixed_h: Some(h),
            ..p.time_step.clone()
        },
    }
}

fn discretize_level(p: &ControlProblem, l: u32, pol: &TimeStepPolicy) -> Result<Level> {
    discretize(p, l, pol).with_context(|| format!("discretising {} at level {l}", p.name))
}

fn run_mode(cli: &Cli, p: &ControlProblem, out: &Output, pol: &TimeStepPolicy) -> Result<bool> {
    let config = SolverConfig {
        override_audits: cli.override_audits,
        ..Default::default()
    };
    let mut all_pass = true;
    for &l in &cli.levels.0 {
        let lv = discretize_level(p, l, pol)?;
        let pass = lv.audits_pass();
        all_pass &= pass;
        log::info!("{}", lv.audit_summary());
        out.text(&format!("audit_L{l}.txt"), &level_report(p, &lv))?;
        lv.audit.write_csv(out.create(&format!("violations_L{l}.csv"))?)?;
        lv.ops.write_nu_csv(out.create(&format!("nu_L{l}.csv"))?)?;
        lv.ops.write_diffusion_csv(out.create(&format!("diffusion_L{l}.csv"))?)?;
        if !pass && !cli.override_audits {
            log::error!("level {l}: audits failed, not solving (use --override-audits to force)");
            continue;
        }
        let (sol, runlog) = solve_level(p, &lv, &config).with_context(|| format!("solving level {l}"))?;
        sol.write_csv(&lv.mesh, out.create(&format!("solution_L{l}.csv"))?)?;
        runlog.write_text(out.create(&format!("runlog_L{l}.txt"))?)?;
        let linear = (0..p.num_controls())
            .map(|a| solve_linear_control(p, &lv.mesh, &lv.ops, a))
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("solving single-control problems at level {l}"))?;
        let table = boundary_control_diagnostic(&lv.mesh, &linear);
        table.write_csv(&lv.mesh, out.create(&format!("boundary_control_L{l}.csv"))?)?;
        let neg = sol.min_value();
        log::info!(
            "level {l}: {} steps, {} factorizations, max residual {:.3e}, min value {:.3e}, boundary proxy {:.3e}",
            sol.grid.steps,
            runlog.factorizations,
            runlog.max_residual(),
            neg,
            table.max()
        );
        if neg < -1e-10 {
            log::error!("level {l}: solution has negative value {neg:e}");
            all_pass = false;
        }
    }
    Ok(all_pass)
}

fn audit_monotone(cli: &Cli, p: &ControlProblem, out: &Output, pol: &TimeStepPolicy) -> Result<bool> {
    let mut all_pass = true;
    let mut summary = String::new();
    for &l in &cli.levels.0 {
        let lv = discretize_level(p, l, pol)?;
        let falsify = falsify_local_minimum(&lv.ops, FALSIFICATION_TRIALS, cli.seed);
        let pass = lv.audits_pass() && falsify.pass();
        all_pass &= pass;
        let mut report = level_report(p, &lv);
        report.push_str(&format!(
            "local-minimum falsification: {} ({} trials, {} failures, seed {})\n",
            if falsify.pass() { "pass" } else { "FAIL" },
            falsify.trials,
            falsify.failures.len(),
            cli.seed
        ));
        out.text(&format!("monotonicity_L{l}.txt"), &report)?;
        lv.audit.write_csv(out.create(&format!("violations_L{l}.csv"))?)?;
        summary.push_str(&format!("{}\n", lv.audit_summary()));
        println!("{}", lv.audit_summary());
    }
    out.text("summary.txt", &summary)?;
    Ok(all_pass)
}

fn audit_coercivity(cli: &Cli, p: &ControlProblem, out: &Output, pol: &TimeStepPolicy) -> Result<bool> {
    let Some(alpha) = p.sobolev_control else {
        bail!("problem {} designates no Sobolev control", p.name);
    };
    let mut all_pass = true;
    for &l in &cli.levels.0 {
        let lv = discretize_level(p, l, pol)?;
        let sob = audit_sobolev_conditions(p, alpha, lv.ops.dx);
        let r = coercivity_property_run(p, &lv, cli.trials, cli.seed, 1.0)
            .with_context(|| format!("coercivity run at level {l}"))?;
        all_pass &= lv.audits_pass() && sob.pass() && r.pass();
        out.text(
            &format!("coercivity_L{l}.txt"),
            &format!("{}{sob}{r}", level_report(p, &lv)),
        )?;
        println!(
            "level {l}: coercivity {}/{} trials, sobolev conditions {}",
            r.pass_count(),
            r.trials.len(),
            if sob.pass() { "pass" } else { "FAIL" }
        );
    }
    Ok(all_pass)
}

fn convergence(cli: &Cli, p: &ControlProblem, out: &Output, pol: &TimeStepPolicy) -> Result<bool> {
    let opts = ErrorStudyOptions {
        policy: Some(pol.clone()),
        config: SolverConfig {
            override_audits: cli.override_audits,
            ..Default::default()
        },
        mode: match cli.error_mode {
            CliErrorMode::Interpolant => ErrorMode::Interpolant,
            CliErrorMode::Projection => ErrorMode::Projection,
        },
        reference: match cli.reference {
            CliReference::Auto => ReferenceChoice::Auto,
            CliReference::Exact => ReferenceChoice::Exact,
            CliReference::Fine => ReferenceChoice::FineGrid,
        },
    };
    let table = error_study(p, &cli.levels.0, &opts).context("error study")?;
    table.write_csv(out.create("errors.csv")?)?;
    for r in &table.rows {
        println!(
            "level {}: dx {:.4e} h {:.4e} err_sup {:.4e} err_wh1 {:.4e}{}",
            r.level,
            r.dx,
            r.h,
            r.err_sup,
            r.err_wh1,
            r.rate_sup
                .map(|x| format!(" rates {x:.3} {:.3}", r.rate_wh1.unwrap_or(f64::NAN)))
                .unwrap_or_default()
        );
    }
    println!("reference: {}", table.reference);
    Ok(!table.unaudited)
}

fn run(cli: &Cli) -> Result<bool> {
    if cli.levels.0.is_empty() {
        bail!("no levels requested");
    }
    let p = load_problem(&cli.problem)?;
    let pol = policy(&p, cli.h);
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = Output {
        dir: cli.out.clone(),
        stamp: cli.override_audits,
    };
    write_problem(&out, &p)?;
    match cli.mode {
        Mode::Run => run_mode(cli, &p, &out, &pol),
        Mode::Convergence => convergence(cli, &p, &out, &pol),
        Mode::AuditMonotone => audit_monotone(cli, &p, &out, &pol),
        Mode::AuditCoercivity => audit_coercivity(cli, &p, &out, &pol),
    }
}

fn write_problem(out: &Output, p: &ControlProblem) -> Result<()> {
    let text = p.spec().to_toml().context("serialising the problem")?;
    out.text("problem.toml", &text)
}

/// Context layers and the root message, skipping causes whose text the
/// previous layer already includes.
fn error_chain(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if parts.last().is_some_and(|p| p.contains(&text)) {
            break;
        }
        parts.push(text);
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more audits failed; see {}", Path::new(&cli.out).display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(2)
        }
    }
}
