//! Numerical laboratory for the sublinear G-expectation of a one-dimensional
//! G-Brownian motion.
//!
//! Two independent routes compute upper expectations: scenario-measure Monte
//! Carlo ([`upper`]) over families of volatility controls ([`scenario`]), and
//! the nonlinear G-heat / HJB equations ([`pde`]). The [`lab`] module turns
//! structural properties of G-Brownian motion, its quadratic variation and
//! finite-variation G-martingales into runnable checks with explicit
//! tolerances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod gspec;
pub mod lab;
pub mod pde;
pub mod rng;
pub mod scenario;
pub mod upper;

pub use error::{Error, Result};
pub use gspec::{envelope_c, g_function, GSpec, StepFunction};
