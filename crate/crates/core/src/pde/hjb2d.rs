//! Joint functionals of `(B_T, <B>_T)`.
//!
//! `u(tau, b, q) = sup E[ψ(b + ∫σ dW, q + ∫σ^2 ds)]` over controls in the
//! band solves `u_tau = sup_σ σ^2 (u_bb / 2 + u_q)`. The Hamiltonian is
//! linear in `σ^2`, so the two band edges suffice. Space is discretized with
//! a central difference in `b` and a forward (upwind) difference in `q`.
//! The `q` axis spans the scheme's whole numerical domain of dependence,
//! so the top edge never reaches the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gspec::GSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HjbParams {
    /// Spatial intervals across the `b` domain.
    pub b_nodes: usize,
    /// `b` half-width in units of `sigma_hi sqrt(T)`.
    pub domain_width_multiplier: f64,
    /// `2 sigma_hi^2 dt / db^2`, in `(0, 1]`.
    pub cfl_fraction: f64,
    /// Volatilities over which the Hamiltonian is maximized; the two band
    /// edges when `None`.
    pub sigma_candidates: Option<Vec<f64>>,
}

impl Default for HjbParams {
    fn default() -> Self {
        Self {
            b_nodes: 200,
            domain_width_multiplier: 6.0,
            cfl_fraction: 1.0,
            sigma_candidates: None,
        }
    }
}

/// Terminal slice of a 2-d solve.
#[derive(Clone, Debug)]
pub struct HjbSolution {
    payoff: String,
    db: f64,
    dq: f64,
    dt: f64,
    b_half: usize,
    nq: usize,
    /// Row-major in `b`: `u[i * (nq + 1) + k]`.
    u: Vec<f64>,
}

impl HjbSolution {
    /// `Ê[ψ(B_T, <B>_T)]`.
    pub fn value(&self) -> f64 {
        self.at(self.b_half, 0)
    }

    pub fn payoff(&self) -> &str {
        &self.payoff
    }

    pub fn steps(&self) -> (f64, f64, f64) {
        (self.db, self.dq, self.dt)
    }

    /// Value at node `(b index, q index)`.
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.u[i * (self.nq + 1) + k]
    }

    /// Value at `b = 0` for a starting quadratic variation `q` on the grid.
    pub fn value_at_q(&self, q: f64) -> Option<f64> {
        let k = (q / self.dq).round();
        if k < 0.0 || k as usize > self.nq || (k * self.dq - q).abs() > 1e-9 * self.dq.max(q) {
            return None;
        }
        Some(self.at(self.b_half, k as usize))
    }
}

pub fn solve_hjb_2d(
    payoff: impl Fn(f64, f64) -> f64,
    label: &str,
    horizon: f64,
    spec: &GSpec,
    params: &HjbParams,
) -> Result<HjbSolution> {
    if params.b_nodes < 8 {
        return Err(Error::InvalidArgument(
            "HJB grid needs at least 8 b nodes".into(),
        ));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(params.cfl_fraction > 0.0) || params.cfl_fraction > 1.0 {
        return Err(Error::Cfl {
            dt: params.cfl_fraction,
            limit: 1.0,
        });
    }
    let candidates: Vec<f64> = match &params.sigma_candidates {
        None => vec![spec.sigma_lo_sq(), spec.sigma_hi_sq()],
        Some(c) if c.is_empty() => {
            return Err(Error::InvalidArgument("no sigma candidates".into()))
        }
        Some(c) => c
            .iter()
            .map(|&s| spec.check_sigma(s).map(|_| s * s))
            .collect::<Result<_>>()?,
    };
    let hi = spec.sigma_hi_sq();
    let half_width = params.domain_width_multiplier * spec.sigma_hi() * horizon.sqrt();
    let b_half = params.b_nodes.div_ceil(2);
    let db = half_width / b_half as f64;
    let steps = (2.0 * hi * horizon / (params.cfl_fraction * db * db)).ceil() as usize;
    let dt = horizon / steps as f64;
    let dq = 2.0 * hi * dt;
    // center coefficient 1 - sigma^2 dt (1/db^2 + 1/dq) stays non-negative
    if hi * dt * (1.0 / (db * db) + 1.0 / dq) > 1.0 + 1e-12 {
        return Err(Error::Cfl {
            dt,
            limit: 1.0 / (hi * (1.0 / (db * db) + 1.0 / dq)),
        });
    }
    let nb = 2 * b_half;
    let nq = steps;
    let stride = nq + 1;
    let mut u = vec![0.0; (nb + 1) * stride];
    for i in 0..=nb {
        let b = (i as f64 - b_half as f64) * db;
        for k in 0..=nq {
            u[i * stride + k] = payoff(b, k as f64 * dq);
        }
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "payoff `{label}` is not finite on the domain"
        )));
    }
    let mut next = u.clone();
    let (cb, cq) = (0.5 * dt / (db * db), dt / dq);
    for _ in 0..steps {
        for i in 1..nb {
            for k in 0..=nq {
                let c = u[i * stride + k];
                let d2b = u[(i + 1) * stride + k] - 2.0 * c + u[(i - 1) * stride + k];
                let dq_diff = if k < nq {
                    u[i * stride + k + 1] - c
                } else {
                    c - u[i * stride + k - 1]
                };
                let drift = cb * d2b + cq * dq_diff;
                let best = candidates
                    .iter()
                    .map(|s2| s2 * drift)
                    .fold(f64::NEG_INFINITY, f64::max);
                next[i * stride + k] = c + best;
            }
        }
        for k in 0..=nq {
            next[k] = 2.0 * next[stride + k] - next[2 * stride + k];
            next[nb * stride + k] = 2.0 * next[(nb - 1) * stride + k] - next[(nb - 2) * stride + k];
        }
        std::mem::swap(&mut u, &mut next);
    }
    Ok(HjbSolution {
        payoff: label.to_string(),
        db,
        dq,
        dt,
        b_half,
        nq,
        u,
    })
}
