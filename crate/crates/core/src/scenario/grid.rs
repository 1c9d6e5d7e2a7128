use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (in units of the step) for matching a time to a grid index.
const ALIGN_TOL: f64 = 1e-9;

/// Uniform time grid `t_i = i T / n` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("grid needs n_steps >= 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Grid time of index `i`, computed from the index (never accumulated).
    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Index of `t` if it is a grid time.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if (x - k).abs() <= ALIGN_TOL * x.abs().max(1.0) && k >= 0.0 && k <= self.n_steps as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn require_index(&self, t: f64) -> Result<usize> {
        self.index_of(t).ok_or(Error::OffGrid {
            time: t,
            step: self.dt(),
        })
    }

    /// Number of grid steps spanned by a positive length that is a multiple of the step.
    pub fn steps_in(&self, length: f64) -> Result<usize> {
        match self.index_of(length) {
            Some(k) if k > 0 => Ok(k),
            _ => Err(Error::OffGrid {
                time: length,
                step: self.dt(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_are_index_based() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.time(10), 1.0);
        assert_eq!(g.time(3), 0.3);
        assert_eq!(g.index_of(0.3), Some(3));
        assert_eq!(g.index_of(0.35), None);
        assert_eq!(g.index_of(1.2), None);
        assert!(g.require_index(0.05).is_err());
        assert_eq!(g.steps_in(0.5).unwrap(), 5);
        assert!(g.steps_in(0.0).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }
}
