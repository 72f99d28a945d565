//! Sign audits of assembled operators and the largest admissible explicit
//! time step.
//!
//! Explicit part: off-diagonal entries of `E` are `≤ tol` and every entry of
//! `hE − Id` is `≤ tol`. Implicit part: off-diagonal entries of `I` are
//! `≤ tol` and every full row sum is `≥ −tol`.
//!
//! The implicit test is sufficient for the local-minimum condition: if `v`
//! (zero on the boundary) has a non-positive local minimum at `y_ℓ`, every
//! neighbour satisfies `v_l ≥ v_ℓ`, so with `I_ℓl ≤ 0` for `l ≠ ℓ`,
//! `(Iv)_ℓ ≤ (Σ_l I_ℓl) v_ℓ ≤ 0`.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::DiscreteOperatorSet;
use crate::sparse::CsrMatrix;
use crate::{par, SIGN_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    /// Positive off-diagonal entry of `E`.
    ExplicitOffDiagonal,
    /// Positive entry of `hE − Id`.
    StepMatrix,
    /// Positive off-diagonal entry of `I`.
    ImplicitOffDiagonal,
    /// Negative row sum of `I`.
    ImplicitRowSum,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExplicitOffDiagonal => "explicit-offdiagonal",
            Self::StepMatrix => "step-matrix",
            Self::ImplicitOffDiagonal => "implicit-offdiagonal",
            Self::ImplicitRowSum => "implicit-rowsum",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryViolation {
    pub kind: CheckKind,
    pub control: usize,
    pub row: usize,
    /// Column, or `None` for row sums.
    pub col: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplicitAudit {
    pub max_offdiagonal: f64,
    pub max_step_entry: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImplicitAudit {
    pub max_offdiagonal: f64,
    pub min_row_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlAudit {
    pub control: usize,
    pub explicit: Option<ExplicitAudit>,
    pub implicit: Option<ImplicitAudit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub tol: f64,
    /// Time step the explicit audit used, if it ran.
    pub h: Option<f64>,
    pub h_max: f64,
    pub controls: Vec<ControlAudit>,
    /// Sorted by kind, control, row, column.
    pub violations: Vec<EntryViolation>,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn explicit_pass(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v.kind, CheckKind::ExplicitOffDiagonal | CheckKind::StepMatrix))
    }

    pub fn implicit_pass(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v.kind, CheckKind::ImplicitOffDiagonal | CheckKind::ImplicitRowSum))
    }

    /// Combines an explicit and an implicit fragment for the same operators.
    pub fn merge(mut self, other: MonotonicityReport) -> Self {
        self.h = self.h.or(other.h);
        for (c, o) in self.controls.iter_mut().zip(other.controls) {
            c.explicit = c.explicit.take().or(o.explicit);
            c.implicit = c.implicit.take().or(o.implicit);
        }
        self.violations.extend(other.violations);
        sort_violations(&mut self.violations);
        self
    }

    /// Violations as CSV with columns `kind,control,row,col,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "control", "row", "col", "value"])?;
        for v in &self.violations {
            w.write_record(&[
                v.kind.to_string(),
                v.control.to_string(),
                v.row.to_string(),
                v.col.map(|c| c.to_string()).unwrap_or_default(),
                format!("{:.17e}", v.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for MonotonicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "monotonicity: {}", if self.pass() { "pass" } else { "FAIL" })?;
        writeln!(f, "tol = {:e}", self.tol)?;
        if let Some(h) = self.h {
            writeln!(f, "h = {h:.12e}")?;
        }
        writeln!(f, "h_max = {:.12e}", self.h_max)?;
        for c in &self.controls {
            write!(f, "control {}:", c.control)?;
            if let Some(e) = &c.explicit {
                write!(
                    f,
                    " max offdiag(E) = {:.6e}, max entry(hE - Id) = {:.6e};",
                    e.max_offdiagonal, e.max_step_entry
                )?;
            }
            if let Some(i) = &c.implicit {
                write!(
                    f,
                    " max offdiag(I) = {:.6e}, min rowsum(I) = {:.6e}",
                    i.max_offdiagonal, i.min_row_sum
                )?;
            }
            writeln!(f)?;
        }
        for v in &self.violations {
            match v.col {
                Some(c) => writeln!(f, "  {} control {} ({}, {}) = {:.6e}", v.kind, v.control, v.row, c, v.value)?,
                None => writeln!(f, "  {} control {} row {} = {:.6e}", v.kind, v.control, v.row, v.value)?,
            }
        }
        Ok(())
    }
}

fn sort_violations(v: &mut [EntryViolation]) {
    v.sort_by_key(|a| (a.kind, a.control, a.row, a.col));
}

/// `min 1/e` over positive diagonal entries `e`, or `+∞` if there are none.
/// Off-diagonal entries of `hE − Id` scale with `h` and do not constrain it.
pub fn h_max_of<'a>(explicit: impl IntoIterator<Item = &'a CsrMatrix>) -> f64 {
    explicit
        .into_iter()
        .flat_map(|m| m.diagonal())
        .filter(|&e| e > 0.0)
        .map(|e| 1.0 / e)
        .fold(f64::INFINITY, f64::min)
}

pub fn compute_h_max(ops: &DiscreteOperatorSet) -> f64 {
    h_max_of(ops.controls.iter().map(|c| &c.explicit))
}

/// Off-diagonal and `hE − Id` checks; boundary columns are included.
pub fn audit_explicit(ops: &DiscreteOperatorSet, h: f64) -> MonotonicityReport {
    audit_explicit_with_tol(ops, h, SIGN_TOL)
}

pub fn audit_explicit_with_tol(ops: &DiscreteOperatorSet, h: f64, tol: f64) -> MonotonicityReport {
    let per_control = par::map(&ops.controls, |c| {
        let e = &c.explicit;
        let mut audit = ExplicitAudit {
            max_offdiagonal: f64::NEG_INFINITY,
            max_step_entry: f64::NEG_INFINITY,
        };
        let mut bad = Vec::new();
        for r in 0..e.nrows() {
            let mut saw_diag = false;
            for (col, v) in e.row(r) {
                let step = if col == r {
                    saw_diag = true;
                    h * v - 1.0
                } else {
                    audit.max_offdiagonal = audit.max_offdiagonal.max(v);
                    if v > tol {
                        bad.push((CheckKind::ExplicitOffDiagonal, r, Some(col), v));
                    }
                    h * v
                };
                audit.max_step_entry = audit.max_step_entry.max(step);
                if step > tol {
                    bad.push((CheckKind::StepMatrix, r, Some(col), step));
                }
            }
            if !saw_diag {
                audit.max_step_entry = audit.max_step_entry.max(-1.0);
            }
        }
        if audit.max_offdiagonal == f64::NEG_INFINITY {
            audit.max_offdiagonal = 0.0;
        }
        if audit.max_step_entry == f64::NEG_INFINITY {
            audit.max_step_entry = 0.0;
        }
        (audit, bad)
    });
    let mut report = MonotonicityReport {
        tol,
        h: Some(h),
        h_max: compute_h_max(ops),
        controls: Vec::new(),
        violations: Vec::new(),
    };
    for (a, (audit, bad)) in per_control.into_iter().enumerate() {
        report.controls.push(ControlAudit {
            control: a,
            explicit: Some(audit),
            implicit: None,
        });
        report
            .violations
            .extend(bad.into_iter().map(|(kind, row, col, value)| EntryViolation {
                kind,
                control: a,
                row,
                col,
                value,
            }));
    }
    sort_violations(&mut report.violations);
    report
}

/// Off-diagonal sign and row-sum checks on `I`.
pub fn audit_implicit(ops: &DiscreteOperatorSet) -> MonotonicityReport {
    audit_implicit_with_tol(ops, SIGN_TOL)
}

pub fn audit_implicit_with_tol(ops: &DiscreteOperatorSet, tol: f64) -> MonotonicityReport {
    let per_control = par::map(&ops.controls, |c| {
        let m = &c.implicit;
        let mut audit = ImplicitAudit {
            max_offdiagonal: 0.0,
            min_row_sum: f64::INFINITY,
        };
        let mut bad = Vec::new();
        let mut any_off = false;
        for r in 0..m.nrows() {
            let mut sum = 0.0;
            for (col, v) in m.row(r) {
                sum += v;
                if col != r {
                    audit.max_offdiagonal = if any_off { audit.max_offdiagonal.max(v) } else { v };
                    any_off = true;
                    if v > tol {
                        bad.push((CheckKind::ImplicitOffDiagonal, r, Some(col), v));
                    }
                }
            }
            audit.min_row_sum = audit.min_row_sum.min(sum);
            if sum < -tol {
                bad.push((CheckKind::ImplicitRowSum, r, None, sum));
            }
        }
        if audit.min_row_sum == f64::INFINITY {
            audit.min_row_sum = 0.0;
        }
        (audit, bad)
    });
    let mut report = MonotonicityReport {
        tol,
        h: None,
        h_max: compute_h_max(ops),
        controls: Vec::new(),
        violations: Vec::new(),
    };
    for (a, (audit, bad)) in per_control.into_iter().enumerate() {
        report.controls.push(ControlAudit {
            control: a,
            explicit: None,
            implicit: Some(audit),
        });
        report
            .violations
            .extend(bad.into_iter().map(|(kind, row, col, value)| EntryViolation {
                kind,
                control: a,
                row,
                col,
                value,
            }));
    }
    sort_violations(&mut report.violations);
    report
}

/// Both audits at the operator set's own time step.
pub fn audit_all(ops: &DiscreteOperatorSet) -> MonotonicityReport {
    audit_explicit(ops, ops.h()).merge(audit_implicit(ops))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalsificationReport {
    pub trials: usize,
    /// `(control, node, (Ev)_ℓ, (Iv)_ℓ)` for failed trials.
    pub failures: Vec<(usize, usize, f64, f64)>,
}

impl FalsificationReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Randomised check of the local-minimum property: builds nodal vectors with
/// a non-positive local minimum at a random interior node and verifies
/// `(Ev)_ℓ ≤ tol` and `(Iv)_ℓ ≤ tol`.
pub fn falsify_local_minimum(ops: &DiscreteOperatorSet, trials: usize, seed: u64) -> FalsificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ni = ops.interior_count;
    let mut failures = Vec::new();
    if ni == 0 {
        return FalsificationReport { trials, failures };
    }
    for _ in 0..trials {
        let alpha = rng.gen_range(0..ops.num_controls());
        let l = rng.gen_range(0..ni);
        let c = ops.control(alpha);
        let mut v = vec![0.0; ops.num_nodes];
        for x in v.iter_mut().take(ni) {
            *x = rng.gen_range(-1.0..1.0);
        }
        let vl = -rng.gen::<f64>();
        v[l] = vl;
        for m in [&c.explicit, &c.implicit] {
            for (col, _) in m.row(l) {
                if col != l && col < ni {
                    v[col] = vl + rng.gen::<f64>();
                }
            }
        }
        let row_apply = |m: &CsrMatrix| m.row(l).map(|(col, a)| a * v[col]).sum::<f64>();
        let (e, i) = (row_apply(&c.explicit), row_apply(&c.implicit));
        if e > SIGN_TOL || i > SIGN_TOL {
            failures.push((alpha, l, e, i));
        }
    }
    FalsificationReport { trials, failures }
}
