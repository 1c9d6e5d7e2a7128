//! Explicit monotone scheme for the G-heat equation `u_t = G(u_xx)`.
//!
//! `u(t, x) = Ê[φ(x + B_t)]`. The scheme is
//! `u_j' = u_j + dt G((u_{j+1} - 2u_j + u_{j-1}) / dx^2)`, monotone while
//! `sigma_hi^2 dt <= dx^2`, with linear extrapolation at both edges. The
//! default ratio `sigma_hi^2 dt / dx^2 = 1/3` cancels the leading truncation
//! error wherever the solution is convex, which makes quartic payoffs exact
//! up to rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gspec::GSpec;
use crate::pde::Payoff;

/// Grid controls shared by the 1-d solver and the semigroup nesting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeParams {
    /// Approximate number of spatial intervals across the domain.
    pub nodes: usize,
    /// Domain half-width in units of `sigma_hi sqrt(T)`.
    pub domain_width_multiplier: f64,
    /// Target `sigma_hi^2 dt / dx^2`; values above 1 violate the CFL bound.
    pub cfl_fraction: f64,
    /// Tolerance on values normalized by `max(1, |value|)`.
    pub tolerance: f64,
    /// Re-solve on a 1.5x wider domain and compare the center value.
    pub boundary_check: bool,
    /// Upper bound on retained time slices.
    pub max_slices: usize,
}

impl Default for PdeParams {
    fn default() -> Self {
        Self {
            nodes: 400,
            domain_width_multiplier: 6.0,
            cfl_fraction: 1.0 / 3.0,
            tolerance: 1e-3,
            boundary_check: true,
            max_slices: 256,
        }
    }
}

impl PdeParams {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 {
            return Err(Error::InvalidArgument(format!(
                "PDE grid needs at least 8 nodes, got {}",
                self.nodes
            )));
        }
        if !(self.domain_width_multiplier > 0.0) {
            return Err(Error::InvalidArgument(
                "domain_width_multiplier must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if !(self.cfl_fraction > 0.0) {
            return Err(Error::InvalidArgument(
                "cfl_fraction must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform space-time lattice for one solve.
#[derive(Clone, Copy, Debug)]
pub(crate) struct HeatGrid {
    /// Node `j` sits at `(j - half) dx`.
    pub half: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
}

impl HeatGrid {
    pub(crate) fn new(horizon: f64, spec: &GSpec, params: &PdeParams) -> Result<Self> {
        params.validate()?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let hi = spec.sigma_hi_sq();
        let half_width = params.domain_width_multiplier * spec.sigma_hi() * horizon.sqrt();
        let dx0 = 2.0 * half_width / params.nodes as f64;
        let steps = (hi * horizon / (params.cfl_fraction * dx0 * dx0)).ceil() as usize;
        let dt = horizon / steps as f64;
        let dx = (hi * dt / params.cfl_fraction).sqrt();
        let limit = dx * dx / hi;
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        let half = (half_width / dx).ceil() as usize;
        Ok(Self {
            half,
            dx,
            dt,
            steps,
        })
    }

    pub(crate) fn widened(&self, factor: f64) -> Self {
        Self {
            half: (self.half as f64 * factor).ceil() as usize,
            ..*self
        }
    }

    pub(crate) fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub(crate) fn x(&self, j: usize) -> f64 {
        (j as f64 - self.half as f64) * self.dx
    }

    pub(crate) fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    /// Runs the scheme from `u` for all steps. `keep_every` > 0 retains every
    /// `keep_every`-th slice (and the last one) with its elapsed time.
    pub(crate) fn evolve(
        &self,
        spec: &GSpec,
        mut u: Vec<f64>,
        keep_every: usize,
    ) -> (Vec<f64>, Vec<(f64, Vec<f64>)>) {
        let n = u.len() - 1;
        let r = 0.5 * self.dt / (self.dx * self.dx);
        let (hi, lo) = (r * spec.sigma_hi_sq(), r * spec.sigma_lo_sq());
        let mut next = u.clone();
        let mut kept = Vec::new();
        if keep_every > 0 {
            kept.push((0.0, u.clone()));
        }
        for step in 1..=self.steps {
            for j in 1..n {
                let d2 = u[j + 1] - 2.0 * u[j] + u[j - 1];
                next[j] = u[j] + if d2 >= 0.0 { hi * d2 } else { lo * d2 };
            }
            next[0] = 2.0 * next[1] - next[2];
            next[n] = 2.0 * next[n - 1] - next[n - 2];
            std::mem::swap(&mut u, &mut next);
            if keep_every > 0 && (step % keep_every == 0 || step == self.steps) {
                kept.push((step as f64 * self.dt, u.clone()));
            }
        }
        (u, kept)
    }

    /// `u(T, 0)` for nodal initial data.
    pub(crate) fn center_value(&self, spec: &GSpec, u0: Vec<f64>) -> f64 {
        let (u, _) = self.evolve(spec, u0, 0);
        u[self.half]
    }
}

/// Retained solution of a 1-d G-heat solve.
#[derive(Clone, Debug)]
pub struct LatticeSolution {
    spec: GSpec,
    horizon: f64,
    payoff: String,
    dx: f64,
    dt: f64,
    steps: usize,
    xs: Vec<f64>,
    /// `(tau, u(tau, ·))` with `tau` the elapsed solve time, increasing.
    slices: Vec<(f64, Vec<f64>)>,
    boundary_influence: Option<f64>,
}

impl LatticeSolution {
    pub fn spec(&self) -> &GSpec {
        &self.spec
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn payoff(&self) -> &str {
        &self.payoff
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time_steps(&self) -> usize {
        self.steps
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// `sigma_hi^2 dt / dx^2`; at most 1 for every solution.
    pub fn cfl_ratio(&self) -> f64 {
        self.spec.sigma_hi_sq() * self.dt / (self.dx * self.dx)
    }

    /// Relative change of the center value under a 1.5x wider domain, when checked.
    pub fn boundary_influence(&self) -> Option<f64> {
        self.boundary_influence
    }

    pub fn slices(&self) -> &[(f64, Vec<f64>)] {
        &self.slices
    }

    pub fn final_slice(&self) -> &[f64] {
        &self.slices.last().expect("at least two slices").1
    }

    /// Retained slice whose elapsed time is closest to `tau`.
    pub fn slice_near(&self, tau: f64) -> &[f64] {
        let idx = self.slices.partition_point(|(s, _)| *s < tau);
        let best = if idx == 0 {
            0
        } else if idx == self.slices.len() {
            idx - 1
        } else if (self.slices[idx].0 - tau) < (tau - self.slices[idx - 1].0) {
            idx
        } else {
            idx - 1
        };
        &self.slices[best].1
    }

    /// `Ê[φ(B_T)]`.
    pub fn value(&self) -> f64 {
        self.final_slice()[self.xs.len() / 2]
    }

    /// `Ê[φ(x + B_T)]` by linear interpolation.
    pub fn value_at(&self, x: f64) -> f64 {
        interpolate(&self.xs, self.final_slice(), x)
    }

    /// Node index nearest to `x`, kept two nodes away from the edges.
    pub(crate) fn interior_index(&self, x: f64) -> usize {
        let j = ((x - self.xs[0]) / self.dx).round();
        // edge nodes are extrapolated, so stay two nodes inside
        (j.max(2.0) as usize).min(self.xs.len() - 3)
    }

    /// CSV `t,x,u` of the retained slices; `t` is the elapsed solve time.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "u"])?;
        for (tau, u) in &self.slices {
            for (x, v) in self.xs.iter().zip(u) {
                w.write_record([tau.to_string(), x.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let k = xs.partition_point(|&t| t <= x).clamp(1, n - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

/// Solves `u_t = G(u_xx)`, `u(0) = payoff`, up to `horizon`.
pub fn solve_g_heat_1d(
    payoff: &Payoff,
    horizon: f64,
    spec: &GSpec,
    params: &PdeParams,
) -> Result<LatticeSolution> {
    solve_g_heat_1d_fn(
        |x| payoff.eval(x),
        &payoff.to_string(),
        horizon,
        spec,
        params,
    )
}

/// [`solve_g_heat_1d`] for an arbitrary payoff function.
pub fn solve_g_heat_1d_fn(
    payoff: impl Fn(f64) -> f64,
    label: &str,
    horizon: f64,
    spec: &GSpec,
    params: &PdeParams,
) -> Result<LatticeSolution> {
    let grid = HeatGrid::new(horizon, spec, params)?;
    let xs = grid.xs();
    let u0: Vec<f64> = xs.iter().map(|&x| payoff(x)).collect();
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "payoff `{label}` is not finite on the domain"
        )));
    }
    let keep_every = grid.steps.div_ceil(params.max_slices.max(1)).max(1);
    let (u, slices) = grid.evolve(spec, u0, keep_every);
    let value = u[grid.half];

    let boundary_influence = if params.boundary_check {
        let wide = grid.widened(1.5);
        let wide_u0 = wide.xs().into_iter().map(&payoff).collect();
        let wide_value = wide.center_value(spec, wide_u0);
        let influence = (value - wide_value).abs() / value.abs().max(1.0);
        if !influence.is_finite() || influence > params.tolerance {
            return Err(Error::DomainTooNarrow {
                influence,
                tolerance: params.tolerance,
            });
        }
        Some(influence)
    } else {
        None
    };

    Ok(LatticeSolution {
        spec: *spec,
        horizon,
        payoff: label.to_string(),
        dx: grid.dx,
        dt: grid.dt,
        steps: grid.steps,
        xs,
        slices,
        boundary_influence,
    })
}
