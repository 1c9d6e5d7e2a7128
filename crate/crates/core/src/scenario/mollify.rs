//! Time mollifiers of step series: trailing window average and the lagged
//! block average.

use crate::error::{Error, Result};
use crate::scenario::{PathSeries, TimeGrid};

fn window_steps(grid: &TimeGrid, eps: f64) -> Result<usize> {
    if !(eps > 0.0) || eps >= grid.horizon() {
        return Err(Error::InvalidArgument(format!(
            "mollifier width {eps} must lie in (0, T) with T = {}",
            grid.horizon()
        )));
    }
    grid.steps_in(eps)
}

fn check_steps(zeta: &PathSeries, grid: &TimeGrid) -> Result<()> {
    if zeta.len() != grid.n_steps() {
        return Err(Error::InvalidArgument(format!(
            "expected a step series of length {}, got {}",
            grid.n_steps(),
            zeta.len()
        )));
    }
    Ok(())
}

/// `zeta^eps_t = (1/eps) ∫_{(t-eps)^+}^t zeta_s ds` at grid times.
pub fn mollify_uniform(zeta: &PathSeries, grid: &TimeGrid, eps: f64) -> Result<PathSeries> {
    check_steps(zeta, grid)?;
    let m = window_steps(grid, eps)?;
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut out = PathSeries::zeros(zeta.n_paths(), n + 1);
    for p in 0..zeta.n_paths() {
        let z = zeta.path(p);
        let row = out.path_mut(p);
        for (i, v) in row.iter_mut().enumerate().skip(1) {
            let lo = i.saturating_sub(m);
            *v = z[lo..i].iter().sum::<f64>() * dt / eps;
        }
    }
    Ok(out)
}

/// Lagged block average: on `]k eps, (k+1) eps]` for `1 <= k <= k_eps - 1`
/// the value is the mean of `zeta` over the previous block; zero on the first
/// block and past `k_eps eps`, where `k_eps = floor(T / eps)`.
pub fn mollify_block(zeta: &PathSeries, grid: &TimeGrid, eps: f64) -> Result<PathSeries> {
    check_steps(zeta, grid)?;
    let m = window_steps(grid, eps)?;
    let n = grid.n_steps();
    let k_eps = n / m;
    let mut out = PathSeries::zeros(zeta.n_paths(), n);
    for p in 0..zeta.n_paths() {
        let z = zeta.path(p);
        let row = out.path_mut(p);
        for k in 1..k_eps {
            let avg = z[(k - 1) * m..k * m].iter().sum::<f64>() / m as f64;
            row[k * m..(k + 1) * m].fill(avg);
        }
    }
    Ok(out)
}

/// Per-path `∫_0^T |a - b| ds` for two step series.
pub fn l1_distance(a: &PathSeries, b: &PathSeries, grid: &TimeGrid) -> Result<Vec<f64>> {
    check_steps(a, grid)?;
    check_steps(b, grid)?;
    if a.n_paths() != b.n_paths() {
        return Err(Error::InvalidArgument("series path counts differ".into()));
    }
    let dt = grid.dt();
    Ok((0..a.n_paths())
        .map(|p| {
            a.path(p)
                .iter()
                .zip(b.path(p))
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                * dt
        })
        .collect())
}
