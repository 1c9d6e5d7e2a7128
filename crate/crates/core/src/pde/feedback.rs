use std::sync::Arc;

use crate::pde::LatticeSolution;
use crate::scenario::{FeedbackPolicy, VolControl};

/// Bang-bang policy read off a 1-d lattice: `sigma_hi` where the discrete
/// second difference of `u(T - t, ·)` at the nearest node is non-negative,
/// `sigma_lo` elsewhere.
pub struct LatticePolicy {
    lattice: Arc<LatticeSolution>,
}

impl LatticePolicy {
    pub fn new(lattice: Arc<LatticeSolution>) -> Self {
        Self { lattice }
    }

    pub fn lattice(&self) -> &LatticeSolution {
        &self.lattice
    }
}

impl FeedbackPolicy for LatticePolicy {
    fn sigma(&self, t: f64, b: f64) -> f64 {
        let lat = &self.lattice;
        let u = lat.slice_near(lat.horizon() - t);
        let j = lat.interior_index(b);
        let d2 = u[j + 1] - 2.0 * u[j] + u[j - 1];
        if d2 >= 0.0 {
            lat.spec().sigma_hi()
        } else {
            lat.spec().sigma_lo()
        }
    }

    fn label(&self) -> String {
        format!("lattice({})", self.lattice.payoff())
    }
}

/// Feedback control attaining the lattice value.
pub fn feedback_control_from_lattice(lattice: Arc<LatticeSolution>) -> VolControl {
    VolControl::Feedback(Arc::new(LatticePolicy::new(lattice)))
}
