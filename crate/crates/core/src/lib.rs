//! Monotone P1 finite element scheme for isotropic, possibly degenerate,
//! parabolic Hamilton-Jacobi-Bellman equations
//!
//! ```text
//!   -∂t v + sup_α ( -a^α Δv + b^α·∇v + c^α v - f^α ) = 0   in (0,T) × Ω
//!   v = 0 on (0,T) × ∂Ω,   v(T, ·) = v_T
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: simplicial meshes with interior-first node ordering, hat
//!   function data and the strict acuteness audit.
//! * [`controls`]: the finite control sample, coefficient expressions and
//!   the explicit/implicit splitting.
//! * [`assembly`]: the nodal-diffusion operators `E`, `I`, `F`, artificial
//!   diffusion and the diffusion floors.
//! * [`monotonicity`]: sign audits of the assembled operators and the
//!   largest admissible explicit time step.
//! * [`stepping`]: backward time stepping with Howard policy iteration.
//! * [`analysis`]: cut-off projection, weighted norms, coercivity and error
//!   studies.
//! * [`pipeline`] and [`builtin`]: glue used by the command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod builtin;
pub mod controls;
pub mod error;
pub mod mesh;
pub mod monotonicity;
pub mod par;
pub mod pipeline;
pub mod sparse;
pub mod stepping;

pub use error::{Error, Result};

/// Absolute tolerance for all sign checks on assembled operators.
pub const SIGN_TOL: f64 = 1e-12;
