//! Finite-difference oracle for G-expectations of Markovian functionals.

mod feedback;
pub(crate) mod heat1d;
mod hjb2d;
mod payoff;
mod semigroup;

pub use feedback::{feedback_control_from_lattice, LatticePolicy};
pub use heat1d::{solve_g_heat_1d, solve_g_heat_1d_fn, LatticeSolution, PdeParams};
pub use hjb2d::{solve_hjb_2d, HjbParams, HjbSolution};
pub use payoff::Payoff;
pub use semigroup::{compose_semigroup, DEFAULT_NESTING_CAP};
