//! The discrete coercivity inequality for the Sobolev control, in telescoped form:
//!
//! ```text
//!   |w|²_{L²(H¹_{γ_i})} ≤ Σ_k ( h⟪E w_{k+1} + I w_k, w_k⟫ + ½⟪w_{k+1} − w_k, w_{k+1} − w_k⟫ )
//!                         + ½⟪w_0, w_0⟫ + C′ ‖w_N‖²_{H¹}
//! ```
//!
//! The final-time term uses the spatial H¹ norm.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{h1_seminorm_sq, l2_norm_sq, weighted_h1_seminorm_with, cell_weight_integrals, AnalysisError, WeightSpec};
use crate::assembly::DiscreteOperatorSet;
use crate::controls::ControlProblem;
use crate::mesh::{HatData, Mesh};
use crate::pipeline::Level;
use crate::stepping::{SpaceTimeSolution, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityTrial {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    pub control: usize,
    pub mu: f64,
    pub c_prime: f64,
    pub margin: f64,
    pub seed: u64,
    pub trials: Vec<CoercivityTrial>,
}

impl CoercivityReport {
    pub fn pass_count(&self) -> usize {
        self.trials.iter().filter(|t| t.pass).count()
    }

    pub fn pass(&self) -> bool {
        self.pass_count() == self.trials.len()
    }
}

impl fmt::Display for CoercivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "coercivity: {} ({}/{} trials)",
            if self.pass() { "pass" } else { "FAIL" },
            self.pass_count(),
            self.trials.len()
        )?;
        writeln!(
            f,
            "control = {}, mu = {:.6e}, C' = {:.6e}, margin = {}, seed = {}",
            self.control, self.mu, self.c_prime, self.margin, self.seed
        )?;
        writeln!(f, "# trial lhs rhs pass")?;
        for (i, t) in self.trials.iter().enumerate() {
            writeln!(f, "{i} {:.12e} {:.12e} {}", t.lhs, t.rhs, t.pass)?;
        }
        Ok(())
    }
}

/// `C′ = ½‖ā‖_∞ + ½KΔx(‖√ā‖_{W^{1,∞}} + 1) + h‖γ_i‖²_∞ + (h/2)(‖∇ã + b̃‖²_∞ + ‖c̃‖²_∞)`,
/// all at the Sobolev control.
pub fn coercivity_constant(
    p: &ControlProblem,
    ops: &DiscreteOperatorSet,
    weight_i: &WeightSpec,
) -> Result<f64, AnalysisError> {
    let s = ops.sobolev.as_ref().ok_or(AnalysisError::NoSobolevControl)?;
    let h = ops.h();
    let gamma_sup = weight_i.sup(p, ops.dx)?;
    Ok(0.5 * s.explicit_diffusion_sup
        + 0.5 * s.superapprox_constant * ops.dx * (s.sqrt_explicit_w1inf + 1.0)
        + h * gamma_sup * gamma_sup
        + 0.5 * h * (s.grad_diffusion_plus_advection.powi(2) + s.explicit_reaction_sup.powi(2)))
}

/// Evaluates both sides for one non-negative `w`.
#[allow(clippy::too_many_arguments)]
pub fn check_coercivity(
    mesh: &Mesh,
    hd: &HatData,
    ops: &DiscreteOperatorSet,
    w: &SpaceTimeSolution,
    cell_weights_i: &[f64],
    c_prime: f64,
    margin: f64,
) -> Result<CoercivityTrial, AnalysisError> {
    let alpha = ops.sobolev.as_ref().ok_or(AnalysisError::NoSobolevControl)?.control;
    for (k, v) in w.values.iter().enumerate() {
        if let Some((n, &value)) = v.iter().enumerate().find(|(_, &x)| x < 0.0) {
            return Err(AnalysisError::NegativeInput { node: n, step: k, value });
        }
    }
    let lhs = weighted_h1_seminorm_with(mesh, hd, w, cell_weights_i).powi(2);
    let c = ops.control(alpha);
    let h = w.grid.h;
    let n = w.grid.steps;
    let mut rhs = 0.0;
    for k in 0..n {
        let (wk, wk1) = (&w.values[k], &w.values[k + 1]);
        let ew = c.explicit.mul_vec(wk1);
        let iw = c.implicit.mul_vec(wk);
        let op: Vec<f64> = ew.iter().zip(&iw).map(|(a, b)| a + b).collect();
        let diff: Vec<f64> = wk1.iter().zip(wk).map(|(a, b)| a - b).collect();
        rhs += h * ops.pairing(&op, wk) + 0.5 * ops.pairing(&diff, &diff);
    }
    rhs += 0.5 * ops.pairing(&w.values[0], &w.values[0]);
    let last = &w.values[n];
    rhs += c_prime * (l2_norm_sq(mesh, last) + h1_seminorm_sq(mesh, hd, last));
    Ok(CoercivityTrial {
        lhs,
        rhs,
        pass: lhs <= margin * rhs,
    })
}

/// Random element of `W_i`: values in `[0, 1)` at interior nodes, zero on
/// the boundary, independently at every time step.
pub fn random_nonnegative_w(mesh: &Mesh, grid: TimeGrid, rng: &mut impl Rng) -> SpaceTimeSolution {
    let mut w = SpaceTimeSolution::zeros(grid, mesh.num_nodes());
    for v in &mut w.values {
        for x in v.iter_mut().take(mesh.interior_count()) {
            *x = rng.gen::<f64>();
        }
    }
    w
}

/// `trials` seeded random trials with `γ_i = γ + μ/2`.
pub fn coercivity_property_run(
    p: &ControlProblem,
    level: &Level,
    trials: usize,
    seed: u64,
    margin: f64,
) -> Result<CoercivityReport, AnalysisError> {
    let alpha = p.sobolev_control.ok_or(AnalysisError::NoSobolevControl)?;
    let ops = &level.ops;
    let s = ops.sobolev.as_ref().ok_or(AnalysisError::NoSobolevControl)?;
    let weight_i = WeightSpec::sobolev(p, alpha).level(s.mu);
    let c_prime = coercivity_constant(p, ops, &weight_i)?;
    let cw = cell_weight_integrals(&level.mesh, &weight_i)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<SpaceTimeSolution> = (0..trials)
        .map(|_| random_nonnegative_w(&level.mesh, ops.grid, &mut rng))
        .collect();
    let results = crate::par::map(&samples, |w| check_coercivity(&level.mesh, &level.hat, ops, w, &cw, c_prime, margin));
    Ok(CoercivityReport {
        control: alpha,
        mu: s.mu,
        c_prime,
        margin,
        seed,
        trials: results.into_iter().collect::<Result<_, _>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::builtin;
    use crate::mesh::nodal_interpolate;
    use crate::pipeline::discretize;

    fn degen2(level: u32) -> (ControlProblem, Level) {
        let p = builtin("DEGEN2").unwrap();
        let lv = discretize(&p, level, &p.time_step).unwrap();
        (p, lv)
    }

    #[test]
    fn zero_passes_with_both_sides_zero() {
        let (p, lv) = degen2(1);
        let w = SpaceTimeSolution::zeros(lv.ops.grid, lv.mesh.num_nodes());
        let wi = WeightSpec::sobolev(&p, 1).level(lv.ops.sobolev.as_ref().unwrap().mu);
        let cw = cell_weight_integrals(&lv.mesh, &wi).unwrap();
        let c = coercivity_constant(&p, &lv.ops, &wi).unwrap();
        let t = check_coercivity(&lv.mesh, &lv.hat, &lv.ops, &w, &cw, c, 1.0).unwrap();
        assert_eq!((t.lhs, t.rhs, t.pass), (0.0, 0.0, true));
    }

    #[test]
    fn time_constant_bump_passes() {
        let (p, lv) = degen2(1);
        let bump = nodal_interpolate(&lv.mesh, |x| Ok::<_, ()>(x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]))).unwrap();
        let mut w = SpaceTimeSolution::zeros(lv.ops.grid, lv.mesh.num_nodes());
        for v in &mut w.values {
            v.copy_from_slice(&bump);
        }
        let wi = WeightSpec::sobolev(&p, 1).level(lv.ops.sobolev.as_ref().unwrap().mu);
        let cw = cell_weight_integrals(&lv.mesh, &wi).unwrap();
        let c = coercivity_constant(&p, &lv.ops, &wi).unwrap();
        assert!(c > 0.0);
        let t = check_coercivity(&lv.mesh, &lv.hat, &lv.ops, &w, &cw, c, 1.0).unwrap();
        assert!(t.lhs > 0.0 && t.pass, "{t:?}");
    }

    #[test]
    fn negative_input_is_rejected() {
        let (p, lv) = degen2(0);
        let mut w = SpaceTimeSolution::zeros(lv.ops.grid, lv.mesh.num_nodes());
        w.values[0][0] = -1.0;
        let wi = WeightSpec::sobolev(&p, 1);
        let cw = cell_weight_integrals(&lv.mesh, &wi).unwrap();
        let err = check_coercivity(&lv.mesh, &lv.hat, &lv.ops, &w, &cw, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, AnalysisError::NegativeInput { node: 0, step: 0, .. }));
    }

    #[test]
    fn property_run_is_seeded() {
        let (p, lv) = degen2(1);
        let a = coercivity_property_run(&p, &lv, 10, 3, 1.0).unwrap();
        let b = coercivity_property_run(&p, &lv, 10, 3, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.pass(), "{a}");
        assert!(a.to_string().contains("# trial lhs rhs pass"));
    }

    #[test]
    fn no_sobolev_control_is_an_error() {
        let p = builtin("HEAT").unwrap();
        let lv = discretize(&p, 0, &p.time_step).unwrap();
        assert!(matches!(
            coercivity_property_run(&p, &lv, 1, 0, 1.0),
            Err(AnalysisError::NoSobolevControl)
        ));
    }
}
