use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gspec::GSpec;
use crate::pde::heat1d::HeatGrid;
use crate::pde::PdeParams;

/// Default cap on the number of nested increments.
pub const DEFAULT_NESTING_CAP: usize = 2;

/// `Ê[φ(B_{t_1} - B_{t_0}, ..., B_{t_m} - B_{t_{m-1}})]` with `t_0 = 0`, by
/// backward nesting: the last increment is integrated out by a G-heat solve
/// for every frozen value of the earlier ones, and the result becomes the
/// payoff of the previous level.
///
/// `times` holds `t_1 < ... < t_m`. Each level multiplies the work by the
/// number of spatial nodes, so `m` is capped.
pub fn compose_semigroup<F>(
    phi: F,
    times: &[f64],
    spec: &GSpec,
    params: &PdeParams,
    cap: usize,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if times.is_empty() {
        return Err(Error::InvalidArgument("need at least one time".into()));
    }
    if times.len() > cap {
        return Err(Error::InvalidArgument(format!(
            "{} nested increments exceed the cap of {cap}",
            times.len()
        )));
    }
    let mut prev = 0.0;
    let mut grids = Vec::with_capacity(times.len());
    for &t in times {
        if !(t > prev) {
            return Err(Error::InvalidArgument(
                "times must be positive and strictly increasing".into(),
            ));
        }
        grids.push(HeatGrid::new(t - prev, spec, params)?);
        prev = t;
    }
    let mut prefix = Vec::with_capacity(times.len());
    Ok(nest(&phi, &grids, spec, &mut prefix))
}

fn nest<F>(phi: &F, grids: &[HeatGrid], spec: &GSpec, prefix: &mut Vec<f64>) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let level = prefix.len();
    let grid = &grids[level];
    let u0: Vec<f64> = if level + 1 == grids.len() {
        grid.xs()
            .into_iter()
            .map(|y| {
                prefix.push(y);
                let v = phi(prefix);
                prefix.pop();
                v
            })
            .collect()
    } else {
        grid.xs()
            .into_par_iter()
            .map(|y| {
                let mut inner = prefix.clone();
                inner.push(y);
                nest(phi, grids, spec, &mut inner)
            })
            .collect()
    };
    grid.center_value(spec, u0)
}
