//! Pathwise simulation of G-Brownian motion under scenario measures and the
//! pathwise constructions on top of it.

mod bundle;
mod control;
mod grid;
mod mollify;
mod process;
mod qv;

pub use bundle::{simulate_bundle, simulate_range, PathBundle};
pub use control::{FeedbackPolicy, FnPolicy, VolControl};
pub use grid::TimeGrid;
pub use mollify::{l1_distance, mollify_block, mollify_uniform};
pub use process::{
    integrate_dqv, integrate_dt, ito_integral, k_process, AdaptedProcess, PathPrefix, PathSeries,
    SimpleProcess,
};
pub use qv::qv_dyadic;

pub use crate::gspec::oscillator;
