//! Adapted step integrands and the pathwise integrators built on them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gspec::{GSpec, StepFunction};
use crate::scenario::{PathBundle, TimeGrid};

/// Per-path real series, `len` values per path, stored path-major.
///
/// Integrators return grid-point series (`len = n_steps + 1`); integrand
/// values and mollified step processes are step series (`len = n_steps`,
/// entry `i` is the value on `]t_i, t_{i+1}]`).
#[derive(Clone, Debug, PartialEq)]
pub struct PathSeries {
    n_paths: usize,
    len: usize,
    data: Vec<f64>,
}

impl PathSeries {
    pub fn new(n_paths: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_paths * len {
            return Err(Error::InvalidArgument(format!(
                "series data has {} entries, expected {} x {}",
                data.len(),
                n_paths,
                len
            )));
        }
        Ok(Self { n_paths, len, data })
    }

    pub fn zeros(n_paths: usize, len: usize) -> Self {
        Self {
            n_paths,
            len,
            data: vec![0.0; n_paths * len],
        }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn path(&self, p: usize) -> &[f64] {
        &self.data[p * self.len..(p + 1) * self.len]
    }

    pub fn path_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.len..(p + 1) * self.len]
    }

    pub fn at(&self, p: usize, i: usize) -> f64 {
        self.data[p * self.len + i]
    }

    /// Last value of every path.
    pub fn terminal(&self) -> Vec<f64> {
        (0..self.n_paths)
            .map(|p| self.at(p, self.len - 1))
            .collect()
    }

    /// Value at grid index `i` of every path.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.at(p, i)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_paths: self.n_paths,
            len: self.len,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n_paths != other.n_paths || self.len != other.len {
            return Err(Error::InvalidArgument("series shapes differ".into()));
        }
        Ok(Self {
            n_paths: self.n_paths,
            len: self.len,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Path values visible to an adapted coefficient at the left end `t_j` of its
/// interval: grid values up to and including `t_j`.
#[derive(Clone, Copy, Debug)]
pub struct PathPrefix<'a> {
    pub t: f64,
    pub b: &'a [f64],
    pub qv: &'a [f64],
}

impl PathPrefix<'_> {
    pub fn b_now(&self) -> f64 {
        *self.b.last().expect("prefix contains t_0")
    }
}

type Coefficient = dyn Fn(usize, &PathPrefix<'_>) -> f64 + Send + Sync;

/// `eta_t = sum_j xi_j 1_{]t_j, t_{j+1}]}(t)` with `xi_j` a function of the
/// path up to `t_j`.
#[derive(Clone)]
pub struct AdaptedProcess {
    label: String,
    partition: Vec<f64>,
    coefficient: Arc<Coefficient>,
}

/// Integrands of the pathwise integrators.
#[derive(Clone)]
pub enum SimpleProcess {
    /// Deterministic step function (constants included).
    Deterministic(StepFunction),
    /// Coefficients read from the truncated path.
    Adapted(AdaptedProcess),
    /// The scenario's own volatility `h_i` on each step.
    RealizedControl,
    /// The realized quadratic-variation density `h_i^2` on each step.
    QvDensity,
}

impl fmt::Debug for SimpleProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl SimpleProcess {
    pub fn constant(horizon: f64, c: f64) -> Result<Self> {
        Ok(SimpleProcess::Deterministic(StepFunction::constant(
            horizon, c,
        )?))
    }

    /// `1_{]a, b]}` on `[0, horizon]`.
    pub fn indicator(horizon: f64, a: f64, b: f64) -> Result<Self> {
        let mut breakpoints = vec![0.0];
        let mut values = Vec::new();
        if a > 0.0 {
            breakpoints.push(a);
            values.push(0.0);
        }
        breakpoints.push(b);
        values.push(1.0);
        if b < horizon {
            breakpoints.push(horizon);
            values.push(0.0);
        }
        Ok(SimpleProcess::Deterministic(StepFunction::new(
            breakpoints,
            values,
        )?))
    }

    /// Adapted process on an explicit partition.
    pub fn adapted(
        label: impl Into<String>,
        partition: Vec<f64>,
        coefficient: impl Fn(usize, &PathPrefix<'_>) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if partition.len() < 2 || partition[0] != 0.0 || partition.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidArgument(
                "partition must start at 0 and increase strictly".into(),
            ));
        }
        Ok(SimpleProcess::Adapted(AdaptedProcess {
            label: label.into(),
            partition,
            coefficient: Arc::new(coefficient),
        }))
    }

    /// Markovian integrand `f(t_i, B_{t_i})` on every grid step.
    pub fn markov(
        label: impl Into<String>,
        grid: &TimeGrid,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::adapted(label, grid.times(), move |_, prefix| {
            f(prefix.t, prefix.b_now())
        })
    }

    pub fn label(&self) -> String {
        match self {
            SimpleProcess::Deterministic(f) if f.values().len() == 1 => {
                format!("const({})", f.values()[0])
            }
            SimpleProcess::Deterministic(f) => format!("step({} pieces)", f.values().len()),
            SimpleProcess::Adapted(a) => a.label.clone(),
            SimpleProcess::RealizedControl => "h".into(),
            SimpleProcess::QvDensity => "d<B>/ds".into(),
        }
    }

    /// Checks that every partition time is a grid time and the horizons agree.
    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        let times: &[f64] = match self {
            SimpleProcess::Deterministic(f) => f.breakpoints(),
            SimpleProcess::Adapted(a) => &a.partition,
            _ => return Ok(()),
        };
        let last = *times.last().expect("non-empty partition");
        if grid.index_of(last) != Some(grid.n_steps()) {
            return Err(Error::InvalidArgument(format!(
                "partition ends at {last}, grid horizon is {}",
                grid.horizon()
            )));
        }
        times
            .iter()
            .try_for_each(|&t| grid.require_index(t).map(|_| ()))
    }

    /// Values on each grid step of one path.
    fn fill_steps(&self, bundle: &PathBundle, p: usize, out: &mut [f64]) {
        let grid = bundle.grid();
        match self {
            SimpleProcess::Deterministic(f) => {
                for (i, v) in out.iter_mut().enumerate() {
                    *v = f.eval(0.5 * (grid.time(i) + grid.time(i + 1)));
                }
            }
            SimpleProcess::Adapted(a) => {
                let (b, qv) = (bundle.b(p), bundle.qv(p));
                for (j, w) in a.partition.windows(2).enumerate() {
                    let lo = grid.index_of(w[0]).expect("checked");
                    let hi = grid.index_of(w[1]).expect("checked");
                    let prefix = PathPrefix {
                        t: grid.time(lo),
                        b: &b[..=lo],
                        qv: &qv[..=lo],
                    };
                    let xi = (a.coefficient)(j, &prefix);
                    out[lo..hi].fill(xi);
                }
            }
            SimpleProcess::RealizedControl => out.copy_from_slice(bundle.h(p)),
            SimpleProcess::QvDensity => {
                for (v, h) in out.iter_mut().zip(bundle.h(p)) {
                    *v = h * h;
                }
            }
        }
    }

    /// Step series of integrand values over the bundle.
    pub fn step_values(&self, bundle: &PathBundle) -> Result<PathSeries> {
        self.check_grid(bundle.grid())?;
        let n = bundle.grid().n_steps();
        let mut out = PathSeries::zeros(bundle.n_paths(), n);
        for p in 0..bundle.n_paths() {
            self.fill_steps(bundle, p, out.path_mut(p));
        }
        Ok(out)
    }
}

/// Running sums `sum_i f(p, i, eta_i)` at grid points.
fn running_sum(
    eta: &SimpleProcess,
    bundle: &PathBundle,
    term: impl Fn(usize, usize, f64) -> f64,
) -> Result<PathSeries> {
    let values = eta.step_values(bundle)?;
    let n = bundle.grid().n_steps();
    let mut out = PathSeries::zeros(bundle.n_paths(), n + 1);
    for p in 0..bundle.n_paths() {
        let v = values.path(p);
        let row = out.path_mut(p);
        let mut acc = 0.0;
        for i in 0..n {
            acc += term(p, i, v[i]);
            row[i + 1] = acc;
        }
    }
    Ok(out)
}

/// `∫_0^t eta dB` at grid times.
pub fn ito_integral(eta: &SimpleProcess, bundle: &PathBundle) -> Result<PathSeries> {
    running_sum(eta, bundle, |p, i, v| {
        let b = bundle.b(p);
        v * (b[i + 1] - b[i])
    })
}

/// `∫_0^t eta d<B>` at grid times.
pub fn integrate_dqv(eta: &SimpleProcess, bundle: &PathBundle) -> Result<PathSeries> {
    running_sum(eta, bundle, |p, i, v| {
        let q = bundle.qv(p);
        v * (q[i + 1] - q[i])
    })
}

/// `∫_0^t eta ds` at grid times.
pub fn integrate_dt(eta: &SimpleProcess, bundle: &PathBundle) -> Result<PathSeries> {
    let dt = bundle.grid().dt();
    running_sum(eta, bundle, |_, _, v| v * dt)
}

/// `K_t = ∫_0^t eta d<B> - ∫_0^t 2 G(eta) ds` at grid times.
pub fn k_process(eta: &SimpleProcess, bundle: &PathBundle, spec: &GSpec) -> Result<PathSeries> {
    let dt = bundle.grid().dt();
    running_sum(eta, bundle, |p, i, v| {
        let q = bundle.qv(p);
        v * (q[i + 1] - q[i]) - 2.0 * spec.g(v) * dt
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{simulate_bundle, VolControl};

    fn setup(control: VolControl) -> (GSpec, PathBundle) {
        let spec = GSpec::new(1.0, 2.0).unwrap();
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let bundle = simulate_bundle(&spec, &control, &grid, 16, 5).unwrap();
        (spec, bundle)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn ito_examples() {
        let (_, bundle) = setup(VolControl::RandomAdapted {
            seed: 1,
            switch_prob: 0.2,
        });
        let one = ito_integral(&SimpleProcess::constant(1.0, 1.0).unwrap(), &bundle).unwrap();
        let three = ito_integral(&SimpleProcess::constant(1.0, 3.0).unwrap(), &bundle).unwrap();
        let half =
            ito_integral(&SimpleProcess::indicator(1.0, 0.0, 0.5).unwrap(), &bundle).unwrap();
        for p in 0..bundle.n_paths() {
            assert!(close(one.path(p), bundle.b(p), 1e-12));
            let scaled: Vec<f64> = bundle.b(p).iter().map(|x| 3.0 * x).collect();
            assert!(close(three.path(p), &scaled, 1e-12));
            let frozen = bundle.b(p)[20];
            assert!(close(&half.path(p)[..=20], &bundle.b(p)[..=20], 1e-12));
            assert!(half.path(p)[20..]
                .iter()
                .all(|&x| (x - frozen).abs() < 1e-12));
        }
    }

    #[test]
    fn dt_and_dqv_examples() {
        let (_, bundle) = setup(VolControl::AlternatingBlocks { n: 2 });
        let one = SimpleProcess::constant(1.0, 1.0).unwrap();
        let q = integrate_dqv(&one, &bundle).unwrap();
        let t = integrate_dt(&one, &bundle).unwrap();
        let times = bundle.grid().times();
        for p in 0..bundle.n_paths() {
            assert!(close(q.path(p), bundle.qv(p), 1e-12));
            assert!(close(t.path(p), &times, 1e-12));
        }
        let osc = SimpleProcess::Deterministic(crate::gspec::oscillator(4, 1.0).unwrap());
        let d = integrate_dt(&osc, &bundle).unwrap();
        assert!(d.terminal().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn k_process_examples() {
        let one = SimpleProcess::constant(1.0, 1.0).unwrap();
        let minus = SimpleProcess::constant(1.0, -1.0).unwrap();
        let (spec, hi) = setup(VolControl::Constant(2f64.sqrt()));
        let (_, lo) = setup(VolControl::Constant(1.0));
        let k_hi = k_process(&one, &hi, &spec).unwrap();
        assert!(k_hi.path(0).iter().all(|x| x.abs() < 1e-12));
        let k_lo = k_process(&one, &lo, &spec).unwrap();
        let k_minus = k_process(&minus, &hi, &spec).unwrap();
        for (i, t) in lo.grid().times().iter().enumerate() {
            assert!((k_lo.at(3, i) + t).abs() < 1e-12);
            assert!((k_minus.at(3, i) + t).abs() < 1e-12);
        }
    }

    #[test]
    fn adapted_coefficient_sees_only_prefix() {
        let (_, bundle) = setup(VolControl::Constant(1.2));
        let grid = *bundle.grid();
        let eta = SimpleProcess::adapted("prefix-len", vec![0.0, 0.25, 1.0], |_, prefix| {
            prefix.b.len() as f64
        })
        .unwrap();
        let v = eta.step_values(&bundle).unwrap();
        assert_eq!(v.at(0, 0), 1.0);
        assert_eq!(v.at(0, 9), 1.0);
        assert_eq!(v.at(0, 10), 11.0);
        assert_eq!(v.at(0, 39), 11.0);
        let markov = SimpleProcess::markov("b", &grid, |_, b| b).unwrap();
        let m = markov.step_values(&bundle).unwrap();
        assert_eq!(m.path(2), &bundle.b(2)[..40]);
    }

    #[test]
    fn rejects_misaligned_partitions() {
        let (_, bundle) = setup(VolControl::Constant(1.2));
        let eta = SimpleProcess::indicator(1.0, 0.0, 0.333).unwrap();
        assert!(matches!(
            ito_integral(&eta, &bundle),
            Err(Error::OffGrid { .. })
        ));
        let wrong_horizon = SimpleProcess::constant(2.0, 1.0).unwrap();
        assert!(integrate_dt(&wrong_horizon, &bundle).is_err());
    }
}
