//! Upper and lower expectations as max/min of Monte Carlo means over an
//! explicit family of volatility controls.
//!
//! Every control in a family is driven by the same Brownian increments
//! (common random numbers, keyed by master seed and path index). The
//! max-of-means is therefore exactly sublinear and monotone at a fixed seed,
//! and comparisons between controls are not drowned by independent noise.
//! The estimate always undershoots the true supremum; the reported error is
//! the winner's standard error and ignores selection noise.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gspec::GSpec;
use crate::pde::{feedback_control_from_lattice, LatticeSolution, Payoff};
use crate::scenario::{l1_distance, simulate_range, PathBundle, PathSeries, TimeGrid, VolControl};

/// Paths simulated per batch; keeps memory flat for large runs.
pub const CHUNK: usize = 2048;

/// JSON report layout version.
pub const SCHEMA_VERSION: u32 = 1;

type Eval = dyn Fn(&PathBundle) -> Result<Vec<Vec<f64>>> + Send + Sync;

/// One or more real path functionals evaluated together on each bundle.
/// `eval` returns one per-path vector per name.
#[derive(Clone)]
pub struct Functional {
    names: Vec<String>,
    eval: Arc<Eval>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Functional({})", self.names.join(", "))
    }
}

impl Functional {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&PathBundle) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            names: vec![name.into()],
            eval: Arc::new(move |b| Ok(vec![f(b)?])),
        }
    }

    /// Several outputs sharing one pass over the bundle.
    pub fn many(
        names: Vec<String>,
        f: impl Fn(&PathBundle) -> Result<Vec<Vec<f64>>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            names,
            eval: Arc::new(f),
        }
    }

    /// `φ(B_T)`.
    pub fn terminal_payoff(payoff: Payoff) -> Self {
        let name = format!("{payoff}(B_T)");
        Self::new(name, move |b| {
            Ok(b.terminal_b().into_iter().map(|x| payoff.eval(x)).collect())
        })
    }

    pub fn terminal_b() -> Self {
        Self::new("B_T", |b| Ok(b.terminal_b()))
    }

    pub fn terminal_qv() -> Self {
        Self::new("<B>_T", |b| Ok(b.terminal_qv()))
    }

    pub fn constant(k: f64) -> Self {
        Self::new(format!("{k}"), move |b| Ok(vec![k; b.n_paths()]))
    }

    /// Terminal value of a grid-point series.
    pub fn terminal_of(
        name: impl Into<String>,
        series: impl Fn(&PathBundle) -> Result<PathSeries> + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, move |b| Ok(series(b)?.terminal()))
    }

    /// Pathwise `∫_0^T |η - η'| ds` of two step series.
    pub fn l1_gap(
        name: impl Into<String>,
        eta: impl Fn(&PathBundle) -> Result<PathSeries> + Send + Sync + 'static,
        eta_prime: impl Fn(&PathBundle) -> Result<PathSeries> + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, move |b| {
            l1_distance(&eta(b)?, &eta_prime(b)?, b.grid())
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self) -> &str {
        &self.names[0]
    }

    pub fn outputs(&self) -> usize {
        self.names.len()
    }

    pub fn evaluate(&self, bundle: &PathBundle) -> Result<Vec<Vec<f64>>> {
        let out = (self.eval)(bundle)?;
        if out.len() != self.names.len() || out.iter().any(|v| v.len() != bundle.n_paths()) {
            return Err(Error::Functional {
                name: self.names.join(", "),
                reason: "wrong output shape".into(),
            });
        }
        if let Some(bad) = out.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Functional {
                name: self.names.join(", "),
                reason: format!("non-finite value {bad}"),
            });
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        let inner = self.clone();
        Self {
            names: self.names.iter().map(|n| format!("{c}*{n}")).collect(),
            eval: Arc::new(move |b| {
                let mut out = (inner.eval)(b)?;
                out.iter_mut().flatten().for_each(|v| *v *= c);
                Ok(out)
            }),
        }
    }

    /// Output-wise sum; both sides need the same number of outputs.
    pub fn add(&self, other: &Functional) -> Result<Self> {
        if self.outputs() != other.outputs() {
            return Err(Error::InvalidArgument(
                "functional output counts differ".into(),
            ));
        }
        let (x, y) = (self.clone(), other.clone());
        Ok(Self {
            names: self
                .names
                .iter()
                .zip(&other.names)
                .map(|(a, b)| format!("{a}+{b}"))
                .collect(),
            eval: Arc::new(move |b| {
                let mut out = (x.eval)(b)?;
                for (u, v) in out.iter_mut().zip((y.eval)(b)?) {
                    u.iter_mut().zip(v).for_each(|(s, t)| *s += t);
                }
                Ok(out)
            }),
        })
    }
}

/// Band, grid and sample size shared by one estimation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McSetup {
    pub spec: GSpec,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
}

/// Nine constants on a uniform `σ` grid, `AlternatingBlocks(n)` for
/// `n ∈ {1, 2, 4, 8}` where `2n` divides the step count, and the lattice
/// feedback policy when one is supplied.
pub fn default_family(
    spec: &GSpec,
    grid: &TimeGrid,
    lattice: Option<Arc<LatticeSolution>>,
) -> Vec<VolControl> {
    let (lo, hi) = (spec.sigma_lo(), spec.sigma_hi());
    let mut family: Vec<VolControl> = (0..9)
        .map(|k| {
            let s = match k {
                0 => lo,
                8 => hi,
                _ => lo + (hi - lo) * k as f64 / 8.0,
            };
            VolControl::Constant(s)
        })
        .collect();
    for n in [1, 2, 4, 8] {
        if grid.n_steps().is_multiple_of(2 * n) {
            family.push(VolControl::AlternatingBlocks { n });
        }
    }
    if let Some(lat) = lattice {
        family.push(feedback_control_from_lattice(lat));
    }
    family
}

/// Per-path outputs of a functional under every control of a family.
#[derive(Clone, Debug)]
pub struct Samples {
    names: Vec<String>,
    controls: Vec<String>,
    /// `[control][output][path]`.
    data: Vec<Vec<Vec<f64>>>,
    n_paths: usize,
    seed: u64,
}

/// Mean and standard error of one control's sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlStat {
    pub control: String,
    pub mean: f64,
    pub std_err: f64,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Simulates every control of `family` on `setup` and evaluates `functional`
/// chunk by chunk. Deterministic for any worker count.
pub fn sample_family(
    functional: &Functional,
    family: &[VolControl],
    setup: &McSetup,
) -> Result<Samples> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if setup.n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be positive".into()));
    }
    let k = functional.outputs();
    let data = family
        .par_iter()
        .map(|control| -> Result<Vec<Vec<f64>>> {
            let mut acc = vec![Vec::with_capacity(setup.n_paths); k];
            let mut start = 0;
            while start < setup.n_paths {
                let len = CHUNK.min(setup.n_paths - start);
                let bundle = simulate_range(
                    &setup.spec,
                    control,
                    &setup.grid,
                    setup.seed,
                    start as u64,
                    len,
                )?;
                for (a, v) in acc.iter_mut().zip(functional.evaluate(&bundle)?) {
                    a.extend(v);
                }
                start += len;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Samples {
        names: functional.names.clone(),
        controls: family.iter().map(VolControl::label).collect(),
        data,
        n_paths: setup.n_paths,
        seed: setup.seed,
    })
}

impl Samples {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    /// Per-path values of `output` under control `c`.
    pub fn values(&self, c: usize, output: usize) -> &[f64] {
        &self.data[c][output]
    }

    pub fn stats(&self, output: usize) -> Vec<ControlStat> {
        self.controls
            .iter()
            .zip(&self.data)
            .map(|(label, d)| {
                let (mean, std_err) = mean_se(&d[output]);
                ControlStat {
                    control: label.clone(),
                    mean,
                    std_err,
                }
            })
            .collect()
    }

    fn pick(&self, output: usize, upper: bool) -> UpperEstimate {
        let stats = self.stats(output);
        let mut best = 0;
        for (i, s) in stats.iter().enumerate() {
            let better = if upper {
                s.mean > stats[best].mean
            } else {
                s.mean < stats[best].mean
            };
            if better {
                best = i;
            }
        }
        UpperEstimate {
            schema_version: SCHEMA_VERSION,
            functional: self.names[output].clone(),
            side: if upper { Side::Upper } else { Side::Lower },
            value: stats[best].mean,
            std_err: stats[best].std_err,
            winner: stats[best].control.clone(),
            family: self.controls.clone(),
            per_control: stats,
            n_paths: self.n_paths,
            seed: self.seed,
        }
    }

    /// `Ê` of one output.
    pub fn upper(&self, output: usize) -> UpperEstimate {
        self.pick(output, true)
    }

    /// `-Ê(-ξ)` of one output.
    pub fn lower(&self, output: usize) -> UpperEstimate {
        self.pick(output, false)
    }

    /// `Ê(ξ) + Ê(-ξ)` of one output.
    pub fn symmetry_defect(&self, output: usize) -> Estimate {
        let (u, l) = (self.upper(output), self.lower(output));
        Estimate {
            value: u.value - l.value,
            std_err: u.std_err.hypot(l.std_err),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

/// Max (or min) of per-control means with the winner's standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpperEstimate {
    pub schema_version: u32,
    pub functional: String,
    pub side: Side,
    pub value: f64,
    pub std_err: f64,
    pub winner: String,
    pub family: Vec<String>,
    #[serde(skip)]
    pub per_control: Vec<ControlStat>,
    pub n_paths: usize,
    pub seed: u64,
}

impl UpperEstimate {
    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }

    /// CSV `control,mean,std_err`.
    pub fn write_control_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["control", "mean", "std_err"])?;
        for s in &self.per_control {
            w.write_record([s.control.clone(), s.mean.to_string(), s.std_err.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A scalar estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

pub fn estimate_upper(
    functional: &Functional,
    family: &[VolControl],
    setup: &McSetup,
) -> Result<UpperEstimate> {
    Ok(sample_family(functional, family, setup)?.upper(0))
}

/// `-Ê(-ξ)`; the winner is the minimizing control.
pub fn estimate_lower(
    functional: &Functional,
    family: &[VolControl],
    setup: &McSetup,
) -> Result<UpperEstimate> {
    Ok(sample_family(functional, family, setup)?.lower(0))
}

pub fn symmetry_defect(
    functional: &Functional,
    family: &[VolControl],
    setup: &McSetup,
) -> Result<Estimate> {
    Ok(sample_family(functional, family, setup)?.symmetry_defect(0))
}

/// `Ê ∫_0^T |η - η'| ds` for two step-series valued path functionals.
pub fn m1_norm(
    eta: impl Fn(&PathBundle) -> Result<PathSeries> + Send + Sync + 'static,
    eta_prime: impl Fn(&PathBundle) -> Result<PathSeries> + Send + Sync + 'static,
    family: &[VolControl],
    setup: &McSetup,
) -> Result<Estimate> {
    let f = Functional::l1_gap("|eta - eta'|", eta, eta_prime);
    let u = estimate_upper(&f, family, setup)?;
    Ok(Estimate {
        value: u.value,
        std_err: u.std_err,
    })
}

/// Upper and lower increment rate of `A` over one window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowRate {
    pub start: f64,
    pub end: f64,
    pub upper: f64,
    pub upper_se: f64,
    pub lower: f64,
    pub lower_se: f64,
}

/// Increment rates `c_hi = Ê(A_T)/T`, `c_lo = -Ê(-A_T)/T` and their
/// per-window versions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub process: String,
    pub c_hi: f64,
    pub c_hi_se: f64,
    pub c_lo: f64,
    pub c_lo_se: f64,
    pub windows: Vec<WindowRate>,
    /// All window rates agree pairwise within 3 combined SE, on both sides.
    pub stationary: bool,
}

impl GapReport {
    /// `c_hi >= c_lo - 3 SE`.
    pub fn ordered(&self) -> bool {
        self.c_hi >= self.c_lo - 3.0 * self.c_hi_se.hypot(self.c_lo_se) - 1e-12
    }
}

fn agree(a: f64, sa: f64, b: f64, sb: f64) -> bool {
    let slack = 1e-9 * (1.0 + a.abs().max(b.abs()));
    (a - b).abs() <= 3.0 * sa.hypot(sb) + slack
}

/// Estimates the gap of the grid-point process `A` (with `A_0 = 0`) over the
/// whole horizon and over `windows` equal windows.
pub fn gap_report(
    name: impl Into<String>,
    process: impl Fn(&PathBundle) -> Result<PathSeries> + Send + Sync + 'static,
    windows: usize,
    family: &[VolControl],
    setup: &McSetup,
) -> Result<GapReport> {
    if windows < 2 {
        return Err(Error::InvalidArgument(
            "gap report needs at least 2 windows".into(),
        ));
    }
    let grid = setup.grid;
    let n = grid.n_steps();
    if !n.is_multiple_of(windows) {
        return Err(Error::OffGrid {
            time: grid.horizon() / windows as f64,
            step: grid.dt(),
        });
    }
    let m = n / windows;
    let mut names = vec!["A_T".to_string()];
    names.extend((0..windows).map(|w| format!("window {w}")));
    let f = Functional::many(names, move |b| {
        let a = process(b)?;
        if a.len() != n + 1 {
            return Err(Error::Functional {
                name: "gap process".into(),
                reason: format!("expected {} grid points, got {}", n + 1, a.len()),
            });
        }
        let mut out = vec![a.terminal()];
        for w in 0..windows {
            out.push(
                (0..a.n_paths())
                    .map(|p| a.at(p, (w + 1) * m) - a.at(p, w * m))
                    .collect(),
            );
        }
        Ok(out)
    });
    let samples = sample_family(&f, family, setup)?;
    let t = grid.horizon();
    let len = t / windows as f64;
    let (hi, lo) = (samples.upper(0), samples.lower(0));
    let rates: Vec<WindowRate> = (0..windows)
        .map(|w| {
            let (u, l) = (samples.upper(w + 1), samples.lower(w + 1));
            WindowRate {
                start: grid.time(w * m),
                end: grid.time((w + 1) * m),
                upper: u.value / len,
                upper_se: u.std_err / len,
                lower: l.value / len,
                lower_se: l.std_err / len,
            }
        })
        .collect();
    let stationary = rates.iter().all(|a| {
        rates.iter().all(|b| {
            agree(a.upper, a.upper_se, b.upper, b.upper_se)
                && agree(a.lower, a.lower_se, b.lower, b.lower_se)
        })
    });
    Ok(GapReport {
        process: name.into(),
        c_hi: hi.value / t,
        c_hi_se: hi.std_err / t,
        c_lo: lo.value / t,
        c_lo_se: lo.std_err / t,
        windows: rates,
        stationary,
    })
}
