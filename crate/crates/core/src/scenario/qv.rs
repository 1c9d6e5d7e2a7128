use crate::error::{Error, Result};
use crate::scenario::{PathSeries, TimeGrid};

/// Dyadic quadratic variation `sum_k (X_{(k+1)t/2^n} - X_{kt/2^n})^2` of a
/// grid-point series, per path.
pub fn qv_dyadic(series: &PathSeries, grid: &TimeGrid, level: u32, t: f64) -> Result<Vec<f64>> {
    if series.len() != grid.n_steps() + 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a grid-point series of length {}, got {}",
            grid.n_steps() + 1,
            series.len()
        )));
    }
    if level > 40 {
        return Err(Error::InvalidArgument(format!(
            "dyadic level {level} too deep"
        )));
    }
    let parts = 1usize << level;
    let idx = (0..=parts)
        .map(|k| grid.require_index(t * k as f64 / parts as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..series.n_paths())
        .map(|p| {
            let x = series.path(p);
            idx.windows(2)
                .map(|w| {
                    let d = x[w[1]] - x[w[0]];
                    d * d
                })
                .sum()
        })
        .collect())
}
