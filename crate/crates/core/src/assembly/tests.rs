use super::*;
use crate::controls::ControlProblem;
use crate::mesh::{compute_hat_data, generate_structured_mesh, BoxDomain, Pattern};

fn problem(a: &str, b: &str, c: &str, f: &str, extra: &str) -> ControlProblem {
    ControlProblem::from_toml(&format!(
        r#"
name = "t"
horizon = 1.0
{extra}
[domain]
lower = [0.0, 0.0]
upper = [1.0, 1.0]
[controls]
points = [[0.0], [1.0]]
[coefficients]
a = {a}
b = {b}
c = {c}
f = "{f}"
final = "0"
"#
    ))
    .unwrap()
}

fn acute(level: u32) -> (Mesh, HatData) {
    let dom = BoxDomain::unit(2);
    let mesh = generate_structured_mesh(&dom, level, Pattern::Acute).unwrap();
    let hd = compute_hat_data(&mesh);
    (mesh, hd)
}

fn build(p: &ControlProblem, level: u32) -> (Mesh, HatData, DiscreteOperatorSet) {
    let (mesh, hd) = acute(level);
    let ops = assemble_operators(p, &mesh, &hd, 2, &TimeStepPolicy::auto()).unwrap();
    (mesh, hd, ops)
}

#[test]
fn constants_are_in_the_kernel_without_reaction() {
    let p = problem(
        r#"{ value = "1 + alpha*x1", split = "explicit" }"#,
        r#"[{ value = "x2", split = "explicit" }, "1"]"#,
        "\"0\"",
        "1",
        "",
    );
    let (mesh, _, ops) = build(&p, 1);
    let ones = vec![1.0; mesh.num_nodes()];
    for c in &ops.controls {
        for m in [&c.explicit, &c.implicit] {
            assert!(m.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        }
    }
}

#[test]
fn unit_reaction_gives_unit_row_sums() {
    let p = problem("\"1\"", "[\"0\", \"0\"]", "\"1\"", "0", "");
    let (_, _, ops) = build(&p, 1);
    for l in 0..ops.interior_count {
        assert!((ops.control(0).implicit.row_sum(l) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn no_transport_means_no_artificial_diffusion() {
    let p = problem("\"alpha\"", "[\"0\", \"0\"]", "\"0\"", "1", "");
    let (mesh, hd) = acute(1);
    let nu = compute_artificial_diffusion(&p, &mesh, &hd, p.theta).unwrap();
    assert!(nu.explicit.iter().chain(&nu.implicit).flatten().all(|&v| v == 0.0));
    let ops = assemble_operators(&p, &mesh, &hd, 2, &TimeStepPolicy::auto()).unwrap();
    // floors equal the splitting
    for (a, c) in ops.controls.iter().enumerate() {
        assert!(c.diffusion_implicit.iter().all(|&v| v == a as f64));
        assert!(c.diffusion_explicit.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn constant_advection_matches_the_closed_form() {
    let p = problem(
        "\"0\"",
        r#"[{ value = "3", split = "explicit" }, { value = "4", split = "explicit" }]"#,
        "\"0\"",
        "0",
        "",
    );
    let (mesh, hd) = acute(1);
    let nu = compute_artificial_diffusion(&p, &mesh, &hd, p.theta).unwrap();
    let s = p.theta.sin();
    for l in 0..mesh.interior_count() {
        let expected = hd
            .support(l)
            .iter()
            .map(|&k| {
                let local = mesh.cell(k).iter().position(|&n| n == l).unwrap();
                let g = hd.gradient(k, local);
                let g_hat = (g[0] * g[0] + g[1] * g[1]).sqrt() / hd.l1_norm(l);
                5.0 / (s * g_hat * mesh.cell_volume(k))
            })
            .fold(0.0, f64::max);
        assert!((nu.explicit[0][l] - expected).abs() <= 1e-12 * expected);
        assert!(nu.implicit[0][l] == 0.0);
    }
}

#[test]
fn doubling_advection_doubles_nu() {
    let one = problem("\"0\"", r#"[{ value = "1 + x1", split = "explicit" }, "0"]"#, "\"0\"", "0", "");
    let two = problem("\"0\"", r#"[{ value = "2 + 2*x1", split = "explicit" }, "0"]"#, "\"0\"", "0", "");
    let (mesh, hd) = acute(1);
    let a = compute_artificial_diffusion(&one, &mesh, &hd, one.theta).unwrap();
    let b = compute_artificial_diffusion(&two, &mesh, &hd, two.theta).unwrap();
    for (x, y) in a.explicit[0].iter().zip(&b.explicit[0]) {
        assert!(*x > 0.0);
        assert!((2.0 * x - y).abs() <= 1e-12 * y);
    }
}

#[test]
fn non_negative_source_gives_non_negative_load() {
    let p = problem("\"1\"", "[\"0\", \"0\"]", "\"0\"", "x1*(1 - x1)", "");
    let (_, _, ops) = build(&p, 2);
    assert!(ops.controls.iter().flat_map(|c| &c.source).all(|&v| v >= 0.0));
    // constant source: ⟨1, φ̂⟩ = 1
    let p = problem("\"1\"", "[\"0\", \"0\"]", "\"0\"", "1", "");
    let (_, _, ops) = build(&p, 1);
    assert!(ops.control(0).source.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn artificial_diffusion_on_a_non_acute_mesh_is_refused() {
    let p = problem("\"0\"", r#"[{ value = "1", split = "explicit" }, "0"]"#, "\"0\"", "0", "");
    let dom = BoxDomain::unit(2);
    let mesh = generate_structured_mesh(&dom, 1, Pattern::CrissCross).unwrap();
    let hd = compute_hat_data(&mesh);
    let err = assemble_operators(&p, &mesh, &hd, 2, &TimeStepPolicy::auto()).unwrap_err();
    assert!(matches!(err, AssemblyError::NotAcute { .. }), "{err}");
    // with nothing to stabilise the pattern is fine
    let q = problem("\"1\"", "[\"0\", \"0\"]", "\"0\"", "0", "");
    assert!(assemble_operators(&q, &mesh, &hd, 2, &TimeStepPolicy::auto()).is_ok());
}

#[test]
fn mu_is_nu_max_without_superapproximation_or_time_terms() {
    let (mesh, _) = acute(1);
    let p = problem("\"alpha\"", "[\"0\", \"0\"]", "\"0\"", "0", "");
    let inputs = sobolev_inputs(&p, &mesh, 1, 0.0).unwrap();
    let (mu, req, it) = solve_mu(0.3, 0.0, mesh.mesh_size(), 0.0, &inputs).unwrap();
    assert_eq!((mu, req, it), (0.3, 0.3, 0));
}

#[test]
fn mu_satisfies_its_inequality() {
    let p = problem(
        r#"{ explicit = "0.5*alpha*x1", implicit = "0.5*alpha + x2" }"#,
        r#"[{ value = "x1", split = "explicit" }, "0"]"#,
        "\"0\"",
        "1",
        "sobolev_control = 1",
    );
    let (mesh, _, ops) = build(&p, 1);
    let s = ops.sobolev.as_ref().unwrap();
    assert_eq!(s.control, 1);
    assert!(s.mu >= s.mu_required);
    assert!(s.mu >= s.nu_implicit_max);
    let inputs = sobolev_inputs(&p, &mesh, 1, s.explicit_shift).unwrap();
    let rhs = 2.0 * s.superapprox_constant * ops.dx * (s.sqrt_explicit_w1inf + sqrt_implicit_norm(&inputs, s.mu) + 2.0)
        + ops.h() * s.grad_diffusion_plus_advection.powi(2);
    assert!(s.mu >= rhs.max(s.nu_implicit_max));
    // the Sobolev floors are constant shifts of the splitting
    let c = ops.control(1);
    for l in 0..ops.interior_count {
        let x = mesh.node(l);
        let base_im = 0.5 + x[1];
        let base_ex = 0.5 * x[0];
        assert!((c.diffusion_implicit[l] - base_im - s.mu).abs() < 1e-12);
        assert!((c.diffusion_explicit[l] - base_ex - s.explicit_shift).abs() < 1e-12);
    }
    assert!(c.implicit_reaction_shift > 0.0);
    assert_eq!(ops.control(0).implicit_reaction_shift, 0.0);
}

#[test]
fn fully_implicit_has_infinite_h_max() {
    let p = problem("\"1\"", "[\"0\", \"0\"]", "\"0\"", "0", "");
    let (_, _, ops) = build(&p, 1);
    assert!(ops.h_max.is_infinite());
    assert!((ops.h() - 0.5 * ops.dx).abs() < 1e-9 || ops.grid.steps as f64 * ops.h() == 1.0);
}
