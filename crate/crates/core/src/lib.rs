//! Collective (anti-reduced) integrators for Lie-Poisson systems.
//!
//! A Lie-Poisson system on `g*` is lifted to a canonical system on
//! `T*g ≅ R^n x R^n` through the momentum map `M_±(q, p) = ∓ ad*_q p`.
//! Symplectic Runge-Kutta methods applied to the lifted system then give
//! Poisson integrators for the original one.

pub mod clebsch;
pub mod diagnostics;
pub mod error;
pub mod integrators;
pub mod lie_algebra;
mod linalg;
pub mod poisson;
pub mod systems;

pub use clebsch::{
    anti_reduced_rhs, invariants, lifted_hamiltonian, momentum_map, solve_initial_point, AntiReducedField,
    InvariantSet, PhasePoint, PinningSpec,
};
pub use diagnostics::{compare_runs, ComparisonReport, DriftThresholds, InvariantSeries};
pub use error::{Error, Result};
pub use integrators::{integrate, IntegratorConfig, Method, Trajectory, VectorField};
pub use lie_algebra::{AlgebraReport, AlgebraVector, DualPoint, LieAlgebraSpec};
pub use poisson::{lp_bracket, lp_rhs, BracketSign, HamiltonianDef, LiePoissonField, ScalarField};
pub use systems::SystemPreset;

/// Least-squares slope, exposed for callers fitting convergence orders and drifts.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    linalg::ls_slope(xs, ys)
}
