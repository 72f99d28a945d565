//! Per-control discrete operators `E^α`, `I^α`, `F^α`.
//!
//! Row `ℓ` (interior node) of `E^α` applied to a P1 function `w` is
//!
//! ```text
//!   ā^α(y_ℓ) ⟨∇w, ∇φ̂_ℓ⟩ + ⟨b̄^α·∇w + c̄^α w, φ̂_ℓ⟩,    φ̂_ℓ = φ_ℓ / ‖φ_ℓ‖_{L1}
//! ```
//!
//! with the diffusion sampled at the node; `I^α` has the same form with the
//! implicit coefficients and `F^α_ℓ = ⟨f^α, φ̂_ℓ⟩`. Rows cover interior nodes,
//! columns cover all nodes.
//!
//! Floors: `ā^α(y_ℓ) = ã^α(y_ℓ) + ν̄_ℓ^α` and `ā̄^α(y_ℓ) = ã̃^α(y_ℓ) + ν̄̄_ℓ^α`.
//! For the Sobolev control `α̂` both floors are constant shifts of the
//! splitting: `ā^α̂ = ã^α̂ + max_ℓ ν̄_ℓ^α̂` and `ā̄^α̂ = ã̃^α̂ + μ`, with `μ` the
//! fixed point of the Sobolev floor inequality and `c̄̄^α̂` raised by
//! `KΔx(‖√ā^α̂‖_{W^{1,∞}} + 1) + h‖c̃^α̂‖²_∞`.

mod norms;
mod quadrature;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use norms::{cell_sample_points, SampleGrid, W1Inf};
pub use quadrature::{simplex_rule, QuadratureRule};

use crate::controls::{ControlProblem, EvalError, Part};
use crate::mesh::{check_strict_acuteness, HatData, Mesh, MeshError};
use crate::monotonicity::h_max_of;
use crate::par;
use crate::sparse::CsrMatrix;
use crate::stepping::{SolveError, TimeGrid, TimeStepPolicy};

const MU_MAX_ITERATIONS: usize = 100;
const MU_SLACK: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("no {order}-order quadrature rule in dimension {dim}")]
    UnsupportedQuadrature { dim: usize, order: usize },
    #[error("evaluating {what}: {source}")]
    Eval {
        what: String,
        #[source]
        source: EvalError,
    },
    #[error("mesh is not strictly acute at theta = {theta} (largest admissible {max_admissible}); refusing to add artificial diffusion")]
    NotAcute { theta: f64, max_admissible: f64 },
    #[error("diffusion floor mu did not converge after {iterations} iterations (mu = {mu}, required {required})")]
    MuNotConverged { iterations: usize, mu: f64, required: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    TimeStep(#[from] SolveError),
}

fn eval_err(what: &str, alpha: usize, x: &[f64], source: EvalError) -> AssemblyError {
    AssemblyError::Eval {
        what: format!("{what} for control {alpha} at {x:?}"),
        source,
    }
}

/// Operators and floor data for one control.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOperators {
    pub explicit: CsrMatrix,
    pub implicit: CsrMatrix,
    pub source: Vec<f64>,
    /// `ν̄_ℓ`, per interior node.
    pub nu_explicit: Vec<f64>,
    /// `ν̄̄_ℓ`, per interior node.
    pub nu_implicit: Vec<f64>,
    /// `ā(y_ℓ)`, per interior node.
    pub diffusion_explicit: Vec<f64>,
    /// `ā̄(y_ℓ)`, per interior node.
    pub diffusion_implicit: Vec<f64>,
    /// `c̄̄ − c̃̃`, a constant; zero except for the Sobolev control.
    pub implicit_reaction_shift: f64,
}

impl ControlOperators {
    pub fn operator(&self, part: Part) -> &CsrMatrix {
        match part {
            Part::Explicit => &self.explicit,
            Part::Implicit => &self.implicit,
        }
    }
}

/// Quantities entering the Sobolev-control floors.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevFloor {
    pub control: usize,
    /// Constant added to `ã^α̂`: `max_ℓ ν̄_ℓ^α̂`.
    pub explicit_shift: f64,
    pub mu: f64,
    /// Right-hand side of the floor inequality evaluated at `mu`.
    pub mu_required: f64,
    pub mu_iterations: usize,
    pub reaction_shift: f64,
    /// `‖√ā^α̂‖_{W^{1,∞}}`.
    pub sqrt_explicit_w1inf: f64,
    /// `‖√ā̄^α̂‖_{W^{1,∞}}` at `mu`.
    pub sqrt_implicit_w1inf: f64,
    /// `‖∇ã^α̂ + b̃^α̂‖_∞`.
    pub grad_diffusion_plus_advection: f64,
    /// `‖c̃^α̂‖_∞`.
    pub explicit_reaction_sup: f64,
    /// `‖ā^α̂‖_∞`.
    pub explicit_diffusion_sup: f64,
    pub nu_implicit_max: f64,
    pub superapprox_constant: f64,
}

/// All operators of one refinement level. Immutable once built.
#[derive(Debug, Clone)]
pub struct DiscreteOperatorSet {
    pub controls: Vec<ControlOperators>,
    /// Lumped pairing weights `‖φ_ℓ‖_{L1}` for all nodes.
    pub weights: Vec<f64>,
    pub interior_count: usize,
    pub num_nodes: usize,
    pub dx: f64,
    pub h_max: f64,
    pub grid: TimeGrid,
    pub sobolev: Option<SobolevFloor>,
    pub quadrature_order: usize,
    pub theta: f64,
}

impl DiscreteOperatorSet {
    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn control(&self, alpha: usize) -> &ControlOperators {
        &self.controls[alpha]
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    /// `⟪u, v⟫ = Σ_ℓ u_ℓ v_ℓ ‖φ_ℓ‖_{L1}` over interior nodes.
    pub fn pairing(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.interior_count).map(|l| u[l] * v[l] * self.weights[l]).sum()
    }

    /// CSV with columns `node_index,control_index,nu_explicit,nu_implicit`.
    pub fn write_nu_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_index", "control_index", "nu_explicit", "nu_implicit"])?;
        for (a, c) in self.controls.iter().enumerate() {
            for l in 0..self.interior_count {
                w.write_record(&[
                    l.to_string(),
                    a.to_string(),
                    format!("{:.17e}", c.nu_explicit[l]),
                    format!("{:.17e}", c.nu_implicit[l]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `node_index,control_index,a_explicit,a_implicit`.
    pub fn write_diffusion_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_index", "control_index", "a_explicit", "a_implicit"])?;
        for (a, c) in self.controls.iter().enumerate() {
            for l in 0..self.interior_count {
                w.write_record(&[
                    l.to_string(),
                    a.to_string(),
                    format!("{:.17e}", c.diffusion_explicit[l]),
                    format!("{:.17e}", c.diffusion_implicit[l]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `E_<α>.txt`, `I_<α>.txt` (triplets) and `F_<α>.txt` into `dir`.
    pub fn write_operators(&self, dir: &Path, header: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (a, c) in self.controls.iter().enumerate() {
            for (name, m) in [("E", &c.explicit), ("I", &c.implicit)] {
                let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{name}_{a}.txt")))?);
                f.write_all(header.as_bytes())?;
                m.write_triplets(&mut f)?;
            }
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("F_{a}.txt")))?);
            f.write_all(header.as_bytes())?;
            for v in &c.source {
                writeln!(f, "{v:.17e}")?;
            }
        }
        Ok(())
    }

    /// Human-readable summary of the Sobolev floor, if any.
    pub fn sobolev_summary(&self) -> Option<String> {
        self.sobolev.as_ref().map(|s| {
            format!(
                "sobolev control {}: mu = {:.6e} (required {:.6e}, {} iterations), explicit shift = {:.6e}, \
                 implicit reaction shift = {:.6e}, |sqrt(a_bar)|_W1inf = {:.6e}, |sqrt(a_bbar)|_W1inf = {:.6e}, \
                 |grad a + b|_inf = {:.6e}, |c|_inf = {:.6e}, K = {}\n\
                 W1inf norms sampled on a grid of spacing dx/4 with finite-difference gradients\n",
                s.control,
                s.mu,
                s.mu_required,
                s.mu_iterations,
                s.explicit_shift,
                s.reaction_shift,
                s.sqrt_explicit_w1inf,
                s.sqrt_implicit_w1inf,
                s.grad_diffusion_plus_advection,
                s.explicit_reaction_sup,
                s.superapprox_constant
            )
        })
    }
}

/// `vol(K) ∇φ_i·∇φ_j` for each cell, row-major `(d+1)²` blocks.
fn local_stiffness(mesh: &Mesh, hd: &HatData) -> Vec<Vec<f64>> {
    let n = mesh.dim() + 1;
    par::map_range(mesh.num_cells(), |k| {
        let vol = mesh.cell_volume(k);
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let gi = hd.gradient(k, i);
                let gj = hd.gradient(k, j);
                s[i * n + j] = vol * gi.iter().zip(gj).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        s
    })
}

/// `margin (|b|_K + Δx_K ‖c + shift‖_{L∞(K)})` per cell, with sup norms
/// sampled at vertices and edge midpoints.
fn cell_numerators(
    p: &ControlProblem,
    mesh: &Mesh,
    alpha: usize,
    part: Part,
    reaction_shift: f64,
) -> Result<Vec<f64>, AssemblyError> {
    let has_b = !p.advection_is_zero(part);
    let c_expr = p.reaction.part(part);
    let has_c = !c_expr.is_zero() || reaction_shift != 0.0;
    if !has_b && !has_c {
        return Ok(vec![0.0; mesh.num_cells()]);
    }
    let control = p.control(alpha);
    par::try_map_range(mesh.num_cells(), |k| {
        let mut b_sup = vec![0.0_f64; mesh.dim()];
        let mut c_sup = 0.0_f64;
        for x in cell_sample_points(mesh, k) {
            if has_b {
                for (j, b) in p.advection.iter().enumerate() {
                    let v = b.part(part).eval(&x, control).map_err(|e| eval_err("advection", alpha, &x, e))?;
                    b_sup[j] = b_sup[j].max(v.abs());
                }
            }
            if has_c {
                let v = c_expr.eval(&x, control).map_err(|e| eval_err("reaction", alpha, &x, e))? + reaction_shift;
                c_sup = c_sup.max(v.abs());
            }
        }
        let b_norm = b_sup.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(p.linf_margin * (b_norm + mesh.cell_diameter(k) * c_sup))
    })
}

/// Smallest `ν_ℓ` with `numer_K ≤ ν_ℓ sin(θ) |∇φ̂_ℓ|_K vol(K)` for all `K ∋ y_ℓ`.
fn nu_from_numerators(mesh: &Mesh, hd: &HatData, theta: f64, numer: &[f64]) -> Vec<f64> {
    let s = theta.sin();
    par::map_range(mesh.interior_count(), |l| {
        hd.support(l)
            .iter()
            .map(|&k| {
                if numer[k] == 0.0 {
                    return 0.0;
                }
                let local = mesh.cell(k).iter().position(|&n| n == l).expect("support lists cells containing the node");
                let g = hd.gradient(k, local);
                let g_hat = g.iter().map(|v| v * v).sum::<f64>().sqrt() / hd.l1_norm(l);
                numer[k] / (s * g_hat * mesh.cell_volume(k))
            })
            .fold(0.0, f64::max)
    })
}

fn ensure_acute(mesh: &Mesh, theta: f64, numerators: &[&Vec<f64>]) -> Result<(), AssemblyError> {
    if numerators.iter().all(|n| n.iter().all(|&v| v == 0.0)) {
        return Ok(());
    }
    let report = check_strict_acuteness(mesh, theta)?;
    if !report.pass {
        return Err(AssemblyError::NotAcute {
            theta,
            max_admissible: report.max_admissible_theta,
        });
    }
    Ok(())
}

/// Artificial diffusion `ν̄`, `ν̄̄` per control and interior node, computed
/// from the splitting coefficients (no Sobolev reaction shift).
#[derive(Debug, Clone, PartialEq)]
pub struct ArtificialDiffusion {
    pub explicit: Vec<Vec<f64>>,
    pub implicit: Vec<Vec<f64>>,
}

/// Fails with [`AssemblyError::NotAcute`] if any artificial diffusion is
/// needed and the mesh is not strictly acute at `theta`.
pub fn compute_artificial_diffusion(
    p: &ControlProblem,
    mesh: &Mesh,
    hd: &HatData,
    theta: f64,
) -> Result<ArtificialDiffusion, AssemblyError> {
    let ex = par::try_map_range(p.num_controls(), |a| cell_numerators(p, mesh, a, Part::Explicit, 0.0))?;
    let im = par::try_map_range(p.num_controls(), |a| cell_numerators(p, mesh, a, Part::Implicit, 0.0))?;
    ensure_acute(mesh, theta, &ex.iter().chain(&im).collect::<Vec<_>>())?;
    Ok(ArtificialDiffusion {
        explicit: ex.iter().map(|n| nu_from_numerators(mesh, hd, theta, n)).collect(),
        implicit: im.iter().map(|n| nu_from_numerators(mesh, hd, theta, n)).collect(),
    })
}

fn nodal_part(p: &ControlProblem, mesh: &Mesh, alpha: usize, part: Part) -> Result<Vec<f64>, AssemblyError> {
    (0..mesh.interior_count())
        .map(|l| {
            let x = mesh.node(l);
            p.diffusion(part, alpha, x).map_err(|e| eval_err("diffusion", alpha, x, e))
        })
        .collect()
}

/// Assembles one operator row block for control `alpha`.
#[allow(clippy::too_many_arguments)]
fn assemble_part(
    p: &ControlProblem,
    mesh: &Mesh,
    hd: &HatData,
    rule: &QuadratureRule,
    stiffness: &[Vec<f64>],
    alpha: usize,
    part: Part,
    nodal_diffusion: &[f64],
    reaction_shift: f64,
) -> Result<CsrMatrix, AssemblyError> {
    let n = mesh.dim() + 1;
    let ni = mesh.interior_count();
    let has_b = !p.advection_is_zero(part);
    let c_expr = p.reaction.part(part);
    let has_c = !c_expr.is_zero() || reaction_shift != 0.0;
    let control = p.control(alpha);
    let blocks = par::try_map_range(mesh.num_cells(), |k| -> Result<Vec<(usize, usize, f64)>, AssemblyError> {
        let cell = mesh.cell(k);
        if cell.iter().all(|&v| v >= ni) {
            return Ok(Vec::new());
        }
        let vol = mesh.cell_volume(k);
        let mut lower = vec![0.0; n * n];
        if has_b || has_c {
            let mut b = vec![0.0; mesh.dim()];
            for (lam, wq) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.map_barycentric(k, lam);
                if has_b {
                    for (j, bj) in p.advection.iter().enumerate() {
                        b[j] = bj.part(part).eval(&x, control).map_err(|e| eval_err("advection", alpha, &x, e))?;
                    }
                }
                let c = if has_c {
                    c_expr.eval(&x, control).map_err(|e| eval_err("reaction", alpha, &x, e))? + reaction_shift
                } else {
                    0.0
                };
                for j in 0..n {
                    let bg: f64 = b.iter().zip(hd.gradient(k, j)).map(|(u, v)| u * v).sum();
                    let col = bg + c * lam[j];
                    for i in 0..n {
                        lower[i * n + j] += wq * vol * col * lam[i];
                    }
                }
            }
        }
        let mut out = Vec::new();
        for i in 0..n {
            let l = cell[i];
            if l >= ni {
                continue;
            }
            let wl = hd.l1_norm(l);
            let d = nodal_diffusion[l];
            for j in 0..n {
                let v = (d * stiffness[k][i * n + j] + lower[i * n + j]) / wl;
                if v != 0.0 {
                    out.push((l, cell[j], v));
                }
            }
        }
        Ok(out)
    })?;
    Ok(CsrMatrix::from_triplets(ni, mesh.num_nodes(), blocks.into_iter().flatten().collect()))
}

fn assemble_source(
    p: &ControlProblem,
    mesh: &Mesh,
    hd: &HatData,
    rule: &QuadratureRule,
    alpha: usize,
) -> Result<Vec<f64>, AssemblyError> {
    let ni = mesh.interior_count();
    let mut f = vec![0.0; ni];
    if p.source.is_zero() {
        return Ok(f);
    }
    let control = p.control(alpha);
    let blocks = par::try_map_range(mesh.num_cells(), |k| -> Result<Vec<f64>, AssemblyError> {
        let vol = mesh.cell_volume(k);
        let mut local = vec![0.0; mesh.dim() + 1];
        for (lam, wq) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.map_barycentric(k, lam);
            let v = p.source.eval(&x, control).map_err(|e| eval_err("source", alpha, &x, e))?;
            for (i, li) in local.iter_mut().enumerate() {
                *li += wq * vol * v * lam[i];
            }
        }
        Ok(local)
    })?;
    for (k, local) in blocks.iter().enumerate() {
        for (i, &node) in mesh.cell(k).iter().enumerate() {
            if node < ni {
                f[node] += local[i];
            }
        }
    }
    for (l, v) in f.iter_mut().enumerate() {
        *v /= hd.l1_norm(l);
    }
    Ok(f)
}

struct SobolevInputs {
    sqrt_explicit: f64,
    explicit_sup: f64,
    grad_plus_b: f64,
    c_sup: f64,
    implicit_values: Vec<f64>,
    grid: SampleGrid,
}

fn sobolev_inputs(
    p: &ControlProblem,
    mesh: &Mesh,
    alpha: usize,
    explicit_shift: f64,
) -> Result<SobolevInputs, AssemblyError> {
    let grid = SampleGrid::for_mesh_size(&p.domain, mesh.mesh_size());
    let a_ex = grid.values(|x| p.diffusion(Part::Explicit, alpha, x).map_err(|e| eval_err("diffusion", alpha, x, e)))?;
    let sqrt_ex: Vec<f64> = a_ex.iter().map(|v| (v + explicit_shift).max(0.0).sqrt()).collect();
    let explicit_sup = a_ex.iter().fold(0.0_f64, |m, v| m.max((v + explicit_shift).abs()));
    let b_ex = par::try_map_range(grid.len(), |i| {
        let x = grid.point(i);
        p.advection(Part::Explicit, alpha, &x).map_err(|e| eval_err("advection", alpha, &x, e))
    })?;
    let grad_plus_b = (0..grid.len())
        .map(|i| {
            let g = grid.gradient(&a_ex, i);
            g.iter().zip(&b_ex[i]).map(|(u, v)| (u + v) * (u + v)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    let c_ex = grid.values(|x| p.reaction(Part::Explicit, alpha, x).map_err(|e| eval_err("reaction", alpha, x, e)))?;
    let implicit_values = grid.values(|x| p.diffusion(Part::Implicit, alpha, x).map_err(|e| eval_err("diffusion", alpha, x, e)))?;
    Ok(SobolevInputs {
        sqrt_explicit: grid.w1inf(&sqrt_ex).norm(),
        explicit_sup,
        grad_plus_b,
        c_sup: c_ex.iter().fold(0.0, |m, v| m.max(v.abs())),
        implicit_values,
        grid,
    })
}

/// `‖√(ã̃ + μ)‖_{W^{1,∞}}` on the sample grid.
fn sqrt_implicit_norm(inputs: &SobolevInputs, mu: f64) -> f64 {
    let v: Vec<f64> = inputs.implicit_values.iter().map(|a| (a + mu).max(0.0).sqrt()).collect();
    inputs.grid.w1inf(&v).norm()
}

/// Smallest `μ` found by fixed-point iteration with
/// `μ ≥ max{ν_max, 2KΔx(s_ex + ‖√(ã̃ + μ)‖_{W^{1,∞}} + 2) + h g²}`.
/// Returns `(μ, required, iterations)`.
fn solve_mu(
    nu_max: f64,
    k: f64,
    dx: f64,
    h: f64,
    inputs: &SobolevInputs,
) -> Result<(f64, f64, usize), AssemblyError> {
    let required = |mu: f64| {
        nu_max.max(
            2.0 * k * dx * (inputs.sqrt_explicit + sqrt_implicit_norm(inputs, mu) + 2.0)
                + h * inputs.grad_plus_b * inputs.grad_plus_b,
        )
    };
    let mut mu = nu_max;
    for it in 0..MU_MAX_ITERATIONS {
        let r = required(mu);
        if mu >= r {
            return Ok((mu, r, it));
        }
        mu = r * (1.0 + MU_SLACK);
    }
    let r = required(mu);
    if mu >= r {
        return Ok((mu, r, MU_MAX_ITERATIONS));
    }
    Err(AssemblyError::MuNotConverged {
        iterations: MU_MAX_ITERATIONS,
        mu,
        required: r,
    })
}

/// Assembles every operator of one level. The time step is chosen from the
/// explicit operators by `policy` before the implicit floors, which depend
/// on it, are built.
pub fn assemble_operators(
    p: &ControlProblem,
    mesh: &Mesh,
    hd: &HatData,
    quadrature_order: usize,
    policy: &TimeStepPolicy,
) -> Result<DiscreteOperatorSet, AssemblyError> {
    let rule = simplex_rule(mesh.dim(), quadrature_order)?;
    let nalpha = p.num_controls();
    let dx = mesh.mesh_size();
    let theta = p.theta;
    let stiffness = local_stiffness(mesh, hd);
    let hat = p.sobolev_control;

    // explicit half
    let numer_ex = par::try_map_range(nalpha, |a| cell_numerators(p, mesh, a, Part::Explicit, 0.0))?;
    ensure_acute(mesh, theta, &numer_ex.iter().collect::<Vec<_>>())?;
    let nu_ex: Vec<Vec<f64>> = numer_ex.iter().map(|n| nu_from_numerators(mesh, hd, theta, n)).collect();
    let mut explicit_shift = 0.0;
    let a_ex: Vec<Vec<f64>> = (0..nalpha)
        .map(|a| {
            let base = nodal_part(p, mesh, a, Part::Explicit)?;
            if Some(a) == hat {
                explicit_shift = nu_ex[a].iter().copied().fold(0.0, f64::max);
                Ok(base.iter().map(|v| v + explicit_shift).collect())
            } else {
                Ok(base.iter().zip(&nu_ex[a]).map(|(v, n)| v + n).collect())
            }
        })
        .collect::<Result<_, AssemblyError>>()?;
    let explicit = par::try_map_range(nalpha, |a| {
        assemble_part(p, mesh, hd, &rule, &stiffness, a, Part::Explicit, &a_ex[a], 0.0)
    })?;
    let sources = par::try_map_range(nalpha, |a| assemble_source(p, mesh, hd, &rule, a))?;

    let h_max = h_max_of(explicit.iter());
    let grid = policy.grid(p.horizon, h_max, dx)?;
    let h = grid.h;

    // Sobolev control data
    let k_const = p.superapprox_constant;
    let inputs = hat.map(|a| sobolev_inputs(p, mesh, a, explicit_shift)).transpose()?;
    let reaction_shift = inputs
        .as_ref()
        .map(|s| k_const * dx * (s.sqrt_explicit + 1.0) + h * s.c_sup * s.c_sup)
        .unwrap_or(0.0);

    // implicit half
    let numer_im = par::try_map_range(nalpha, |a| {
        let shift = if Some(a) == hat { reaction_shift } else { 0.0 };
        cell_numerators(p, mesh, a, Part::Implicit, shift)
    })?;
    ensure_acute(mesh, theta, &numer_im.iter().collect::<Vec<_>>())?;
    let nu_im: Vec<Vec<f64>> = numer_im.iter().map(|n| nu_from_numerators(mesh, hd, theta, n)).collect();

    let mut sobolev = None;
    let a_im: Vec<Vec<f64>> = (0..nalpha)
        .map(|a| {
            let base = nodal_part(p, mesh, a, Part::Implicit)?;
            if Some(a) == hat {
                let inputs = inputs.as_ref().expect("inputs exist for the Sobolev control");
                let nu_max = nu_im[a].iter().copied().fold(0.0, f64::max);
                let (mu, required, iterations) = solve_mu(nu_max, k_const, dx, h, inputs)?;
                sobolev = Some(SobolevFloor {
                    control: a,
                    explicit_shift,
                    mu,
                    mu_required: required,
                    mu_iterations: iterations,
                    reaction_shift,
                    sqrt_explicit_w1inf: inputs.sqrt_explicit,
                    sqrt_implicit_w1inf: sqrt_implicit_norm(inputs, mu),
                    grad_diffusion_plus_advection: inputs.grad_plus_b,
                    explicit_reaction_sup: inputs.c_sup,
                    explicit_diffusion_sup: inputs.explicit_sup.max(a_ex[a].iter().copied().fold(0.0, f64::max)),
                    nu_implicit_max: nu_max,
                    superapprox_constant: k_const,
                });
                Ok(base.iter().map(|v| v + mu).collect())
            } else {
                Ok(base.iter().zip(&nu_im[a]).map(|(v, n)| v + n).collect())
            }
        })
        .collect::<Result<_, AssemblyError>>()?;
    let implicit = par::try_map_range(nalpha, |a| {
        let shift = if Some(a) == hat { reaction_shift } else { 0.0 };
        assemble_part(p, mesh, hd, &rule, &stiffness, a, Part::Implicit, &a_im[a], shift)
    })?;

    let controls = explicit
        .into_iter()
        .zip(implicit)
        .zip(sources)
        .enumerate()
        .map(|(a, ((explicit, implicit), source))| ControlOperators {
            explicit,
            implicit,
            source,
            nu_explicit: nu_ex[a].clone(),
            nu_implicit: nu_im[a].clone(),
            diffusion_explicit: a_ex[a].clone(),
            diffusion_implicit: a_im[a].clone(),
            implicit_reaction_shift: if Some(a) == hat { reaction_shift } else { 0.0 },
        })
        .collect();

    Ok(DiscreteOperatorSet {
        controls,
        weights: hd.l1_norms().to_vec(),
        interior_count: mesh.interior_count(),
        num_nodes: mesh.num_nodes(),
        dx,
        h_max,
        grid,
        sobolev,
        quadrature_order,
        theta,
    })
}

#[cfg(test)]
mod tests;
