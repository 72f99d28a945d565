//! Built-in problem catalog.
//!
//! * `HEAT`: `a = 1`, implicit, exact solution `e^{−2π²(T−t)} sin(πx1) sin(πx2)`.
//! * `HEAT_EXPLICIT`: the same with explicit diffusion.
//! * `ADVECT`: `a = 0`, explicit constant advection `b = (1, 0.5)`.
//! * `DEGEN2`: controls `α ∈ {0, 1}`, `a^α = α`, fully implicit, Sobolev
//!   control `α = 1`.

use crate::controls::{ControlProblem, ProblemError};

pub const BUILTIN_NAMES: [&str; 4] = ["HEAT", "HEAT_EXPLICIT", "ADVECT", "DEGEN2"];

fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "HEAT" => include_str!("../problems/heat.toml"),
        "HEAT_EXPLICIT" => include_str!("../problems/heat_explicit.toml"),
        "ADVECT" => include_str!("../problems/advect.toml"),
        "DEGEN2" => include_str!("../problems/degen2.toml"),
        _ => return None,
    })
}

/// Problem file text of a built-in, by case-insensitive name.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    source(&name.to_ascii_uppercase())
}

/// Looks a built-in up by case-insensitive name.
pub fn builtin(name: &str) -> Result<ControlProblem, ProblemError> {
    let text = builtin_source(name).ok_or_else(|| ProblemError::UnknownBuiltin(name.to_string()))?;
    ControlProblem::from_toml(text)
}

pub fn builtin_problems() -> Vec<ControlProblem> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n).expect("built-in problems parse"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::audit_sobolev_conditions;
    use crate::controls::validate_problem;
    use crate::pipeline::build_mesh;

    #[test]
    fn catalog_has_the_required_entries() {
        let all = builtin_problems();
        assert!(all.len() >= 3);
        for (p, n) in all.iter().zip(BUILTIN_NAMES) {
            assert_eq!(p.name, n);
        }
        assert!(builtin("heat").is_ok());
        assert!(matches!(builtin("nope"), Err(ProblemError::UnknownBuiltin(_))));
    }

    #[test]
    fn every_builtin_validates() {
        for p in builtin_problems() {
            for level in 0..2 {
                let mesh = build_mesh(&p, level).unwrap();
                let r = validate_problem(&p, &mesh, 3);
                assert!(r.pass(), "{}: {r}", p.name);
            }
        }
    }

    #[test]
    fn degen2_satisfies_the_sobolev_conditions() {
        let p = builtin("DEGEN2").unwrap();
        let r = audit_sobolev_conditions(&p, 1, 0.25);
        assert!(r.pass(), "{r}");
        // γ = 1, ã = 0, ã̃ = 1; every structural term vanishes identically
        assert_eq!(r.explicit_ratio, 0.0);
        assert_eq!(r.implicit_ratio, 1.0);
        for c in &r.conditions[..2] {
            assert!(c.min_value.abs() < 1e-12);
        }
        assert!((r.conditions[2].min_value - 1.0).abs() < 1e-12);
    }
}
