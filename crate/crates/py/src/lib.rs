//! Python bindings: band construction, the G function, PDE values, path
//! simulation, Monte Carlo upper/lower expectations and the lab runner.

#![allow(clippy::too_many_arguments)]

use std::sync::Arc;

use gexp_core::config::LabSection;
use gexp_core::lab::{run_lab as run_lab_core, LabId, LabOptions};
use gexp_core::pde::{solve_g_heat_1d, Payoff, PdeParams};
use gexp_core::scenario::{simulate_bundle, TimeGrid, VolControl};
use gexp_core::upper::{default_family, sample_family, Functional, McSetup, UpperEstimate};
use gexp_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::InvalidSpec(_)
        | Error::InvalidArgument(_)
        | Error::OffGrid { .. }
        | Error::EmptyFamily => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Volatility band `[sigma_lo^2, sigma_hi^2]`.
#[pyclass(name = "GSpec", frozen)]
struct PyGSpec {
    inner: gexp_core::GSpec,
}

#[pymethods]
impl PyGSpec {
    #[new]
    #[pyo3(signature = (sigma_lo_sq = 1.0, sigma_hi_sq = 2.0))]
    fn new(sigma_lo_sq: f64, sigma_hi_sq: f64) -> PyResult<Self> {
        Ok(Self {
            inner: gexp_core::GSpec::new(sigma_lo_sq, sigma_hi_sq).map_err(to_py)?,
        })
    }

    #[getter]
    fn sigma_lo_sq(&self) -> f64 {
        self.inner.sigma_lo_sq()
    }

    #[getter]
    fn sigma_hi_sq(&self) -> f64 {
        self.inner.sigma_hi_sq()
    }

    /// `G(a) = (sigma_hi^2 a^+ - sigma_lo^2 a^-) / 2`.
    fn g(&self, a: f64) -> f64 {
        self.inner.g(a)
    }

    fn __repr__(&self) -> String {
        format!(
            "GSpec(sigma_lo_sq={}, sigma_hi_sq={})",
            self.inner.sigma_lo_sq(),
            self.inner.sigma_hi_sq()
        )
    }
}

#[pyfunction]
fn g_function(a: f64, spec: &PyGSpec) -> f64 {
    gexp_core::g_function(a, &spec.inner)
}

#[pyfunction]
fn envelope_c(a: f64, c_hi: f64, c_lo: f64) -> PyResult<f64> {
    gexp_core::envelope_c(a, c_hi, c_lo).map_err(to_py)
}

/// PDE value of a catalog payoff at `B_T`.
#[pyfunction]
#[pyo3(signature = (payoff, spec, horizon = 1.0, nodes = 400))]
fn solve_g_heat(
    py: Python<'_>,
    payoff: &str,
    spec: &PyGSpec,
    horizon: f64,
    nodes: usize,
) -> PyResult<f64> {
    let p = Payoff::parse(payoff).map_err(to_py)?;
    let params = PdeParams {
        nodes,
        ..PdeParams::default()
    };
    let spec = spec.inner;
    py.detach(|| solve_g_heat_1d(&p, horizon, &spec, &params))
        .map(|s| s.value())
        .map_err(to_py)
}

/// Simulates a bundle; returns `t`, and per-path lists `b`, `qv`, `h`.
#[pyfunction]
#[pyo3(signature = (spec, control, n_paths, n_steps = 64, horizon = 1.0, seed = 42))]
fn simulate<'py>(
    py: Python<'py>,
    spec: &PyGSpec,
    control: &str,
    n_paths: usize,
    n_steps: usize,
    horizon: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = spec.inner;
    let c = VolControl::parse(control, &spec).map_err(to_py)?;
    let grid = TimeGrid::new(horizon, n_steps).map_err(to_py)?;
    let b = py
        .detach(|| simulate_bundle(&spec, &c, &grid, n_paths, seed))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", grid.times())?;
    let rows = |f: &dyn Fn(usize) -> Vec<f64>| (0..b.n_paths()).map(f).collect::<Vec<_>>();
    out.set_item("b", rows(&|p| b.b(p).to_vec()))?;
    out.set_item("qv", rows(&|p| b.qv(p).to_vec()))?;
    out.set_item("h", rows(&|p| b.h(p).to_vec()))?;
    out.set_item("control", b.control())?;
    out.set_item("seed", b.seed())?;
    Ok(out)
}

fn estimate(
    py: Python<'_>,
    functional: &str,
    spec: &PyGSpec,
    n_paths: usize,
    n_steps: usize,
    horizon: f64,
    seed: u64,
    feedback: bool,
    lower: bool,
) -> PyResult<Py<PyDict>> {
    let spec = spec.inner;
    let grid = TimeGrid::new(horizon, n_steps).map_err(to_py)?;
    let (f, payoff) = match functional {
        "qv" => (Functional::terminal_qv(), None),
        "b" => (Functional::terminal_b(), None),
        name => {
            let p = Payoff::parse(name).map_err(to_py)?;
            (Functional::terminal_payoff(p.clone()), Some(p))
        }
    };
    let est: UpperEstimate = py
        .detach(|| -> gexp_core::Result<UpperEstimate> {
            let lattice = match (feedback, payoff) {
                (true, Some(p)) => {
                    let target = if lower {
                        Payoff::Scaled(-1.0, Box::new(p))
                    } else {
                        p
                    };
                    Some(Arc::new(solve_g_heat_1d(
                        &target,
                        horizon,
                        &spec,
                        &PdeParams::default(),
                    )?))
                }
                (true, None) => {
                    return Err(Error::InvalidArgument(
                        "feedback needs a payoff functional".into(),
                    ))
                }
                _ => None,
            };
            let family = default_family(&spec, &grid, lattice);
            let setup = McSetup {
                spec,
                grid,
                n_paths,
                seed,
            };
            let s = sample_family(&f, &family, &setup)?;
            Ok(if lower { s.lower(0) } else { s.upper(0) })
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("value", est.value)?;
    out.set_item("std_err", est.std_err)?;
    out.set_item("winner", est.winner)?;
    out.set_item("family", est.family)?;
    out.set_item("n_paths", est.n_paths)?;
    out.set_item("seed", est.seed)?;
    Ok(out.unbind())
}

/// Monte Carlo `Ê[ξ]` over the default control family. `functional` is `qv`,
/// `b` or a catalog payoff of `B_T`.
#[pyfunction]
#[pyo3(signature = (functional, spec, n_paths = 10_000, n_steps = 64, horizon = 1.0, seed = 42, feedback = false))]
fn estimate_upper(
    py: Python<'_>,
    functional: &str,
    spec: &PyGSpec,
    n_paths: usize,
    n_steps: usize,
    horizon: f64,
    seed: u64,
    feedback: bool,
) -> PyResult<Py<PyDict>> {
    estimate(
        py, functional, spec, n_paths, n_steps, horizon, seed, feedback, false,
    )
}

/// `-Ê[-ξ]`, the lower expectation.
#[pyfunction]
#[pyo3(signature = (functional, spec, n_paths = 10_000, n_steps = 64, horizon = 1.0, seed = 42, feedback = false))]
fn estimate_lower(
    py: Python<'_>,
    functional: &str,
    spec: &PyGSpec,
    n_paths: usize,
    n_steps: usize,
    horizon: f64,
    seed: u64,
    feedback: bool,
) -> PyResult<Py<PyDict>> {
    estimate(
        py, functional, spec, n_paths, n_steps, horizon, seed, feedback, true,
    )
}

/// Runs one lab and returns its verdict as a JSON string.
#[pyfunction]
#[pyo3(signature = (lab, spec, seed = 42, n_paths = None))]
fn run_lab(
    py: Python<'_>,
    lab: &str,
    spec: &PyGSpec,
    seed: u64,
    n_paths: Option<usize>,
) -> PyResult<String> {
    let id: LabId = lab.parse().map_err(to_py)?;
    let opts = LabOptions {
        overrides: LabSection {
            n_paths,
            ..LabSection::default()
        },
        ..LabOptions::new(spec.inner, seed)
    };
    let out = py.detach(|| run_lab_core(id, &opts)).map_err(to_py)?;
    serde_json::to_string(&out.verdict).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn gexp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGSpec>()?;
    m.add_function(wrap_pyfunction!(g_function, m)?)?;
    m.add_function(wrap_pyfunction!(envelope_c, m)?)?;
    m.add_function(wrap_pyfunction!(solve_g_heat, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_upper, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_lower, m)?)?;
    m.add_function(wrap_pyfunction!(run_lab, m)?)?;
    m.add(
        "LABS",
        LabId::ALL.iter().map(|l| l.as_str()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
