//! Block-mollification error of `dt` integrands, symmetry of `∫h ds` and
//! decay of oscillating integrals.

use crate::error::{Error, Result};
use crate::gspec::{oscillator, GSpec, StepFunction};
use crate::lab::{cell, Check, DataTable, LabId, LabOptions, LabOutcome, LabVerdict, Relation};
use crate::scenario::{mollify_block, PathBundle, PathSeries, SimpleProcess, TimeGrid, VolControl};
use crate::upper::{default_family, sample_family, Functional, McSetup};

/// `(c_hi - c_lo)(n - 1) T / (2n)`: the lower bound on
/// `‖h - h^{T/(2n),0}‖_{M^1}` when `A = ∫h ds` has increment rates
/// `c_hi >= c_lo`.
pub fn mollification_bound(c_hi: f64, c_lo: f64, n: usize, horizon: f64) -> f64 {
    (c_hi - c_lo) * (n as f64 - 1.0) * horizon / (2.0 * n as f64)
}

/// `σ_lo + (σ_hi - σ_lo) exp(-B_t^2)`: an adapted integrand with values in
/// the band that reacts to the scenario.
pub(crate) fn bump_integrand(spec: &GSpec, grid: &TimeGrid) -> Result<SimpleProcess> {
    let (lo, hi) = (spec.sigma_lo(), spec.sigma_hi());
    SimpleProcess::markov("bump(B)", grid, move |_, b| lo + (hi - lo) * (-b * b).exp())
}

fn per_path_dt_sum(a: &PathSeries, b: &PathSeries, dt: f64) -> Vec<f64> {
    (0..a.n_paths())
        .map(|p| {
            a.path(p)
                .iter()
                .zip(b.path(p))
                .map(|(x, y)| x * y)
                .sum::<f64>()
                * dt
        })
        .collect()
}

fn block_error(h: &PathSeries, grid: &TimeGrid, n: usize) -> Result<Vec<f64>> {
    let eps = grid.horizon() / (2 * n) as f64;
    let m = mollify_block(h, grid, eps)?;
    crate::scenario::l1_distance(h, &m, grid)
}

fn check_block_counts(ns: &[usize], grid: &TimeGrid, min: usize) -> Result<()> {
    for &n in ns {
        if n < min {
            return Err(Error::InvalidArgument(format!(
                "block count n = {n} below {min}"
            )));
        }
        if !grid.n_steps().is_multiple_of(2 * n) {
            return Err(Error::OffGrid {
                time: grid.horizon() / (2 * n) as f64,
                step: grid.dt(),
            });
        }
    }
    Ok(())
}

/// The default family plus `AlternatingBlocks(n)` for every tested `n`.
fn family_with_blocks(setup: &McSetup, ns: &[usize]) -> Vec<VolControl> {
    let mut family = default_family(&setup.spec, &setup.grid, None);
    for &n in ns {
        let c = VolControl::AlternatingBlocks { n };
        if !family.iter().any(|x| x.label() == c.label()) {
            family.push(c);
        }
    }
    family
}

struct BlockRow {
    n: usize,
    bound: f64,
    bound_se: f64,
    measured: f64,
    measured_se: f64,
    const_norm: f64,
}

struct BlockRun {
    setup: McSetup,
    c_hi: f64,
    c_lo: f64,
    c_se: f64,
    const_gap: f64,
    rows: Vec<BlockRow>,
}

const QV_STEPS: usize = 200;
const QV_PATHS: usize = 2000;

/// Measures `‖ζ - ζ^{T/(2n),0}‖_{M^1}` for the realized density of `<B>`
/// and for `h ≡ 1`, together with the gap of `<B>` and of `∫ 1 ds`.
fn qv_density_run(opts: &LabOptions, ns: &[usize]) -> Result<BlockRun> {
    let setup = opts.setup(QV_STEPS, QV_PATHS)?;
    let grid = setup.grid;
    check_block_counts(ns, &grid, 2)?;
    let family = family_with_blocks(&setup, ns);
    let t = grid.horizon();
    let mut names = vec!["<B>_T".to_string(), "int 1 ds".to_string()];
    for &n in ns {
        names.push(format!("qv density n={n}"));
        names.push(format!("constant n={n}"));
    }
    let ns_owned = ns.to_vec();
    let one = SimpleProcess::constant(t, 1.0)?;
    let f = Functional::many(names, move |b: &PathBundle| {
        let grid = b.grid();
        let zeta = SimpleProcess::QvDensity.step_values(b)?;
        let ones = one.step_values(b)?;
        let mut out = vec![b.terminal_qv(), vec![grid.horizon(); b.n_paths()]];
        for &n in &ns_owned {
            out.push(block_error(&zeta, grid, n)?);
            out.push(block_error(&ones, grid, n)?);
        }
        Ok(out)
    });
    let s = sample_family(&f, &family, &setup)?;
    let (hi, lo) = (s.upper(0), s.lower(0));
    let (c_hi, c_lo) = (hi.value / t, lo.value / t);
    let c_se = hi.std_err.hypot(lo.std_err) / t;
    let const_gap = (s.upper(1).value - s.lower(1).value) / t;
    let rows = ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let m = s.upper(2 + 2 * k);
            BlockRow {
                n,
                bound: mollification_bound(c_hi, c_lo, n, t),
                bound_se: c_se * (n as f64 - 1.0) * t / (2.0 * n as f64),
                measured: m.value,
                measured_se: m.std_err,
                const_norm: s.upper(3 + 2 * k).value,
            }
        })
        .collect();
    Ok(BlockRun {
        setup,
        c_hi,
        c_lo,
        c_se,
        const_gap,
        rows,
    })
}

fn block_table(run: &BlockRun) -> DataTable {
    let mut table = DataTable::new(&[
        "n",
        "eps",
        "bound",
        "measured",
        "std_err",
        "constant_h_norm",
    ]);
    let t = run.setup.grid.horizon();
    for r in &run.rows {
        table.push(vec![
            cell(r.n),
            cell(t / (2 * r.n) as f64),
            cell(r.bound),
            cell(r.measured),
            cell(r.measured_se),
            cell(r.const_norm),
        ]);
    }
    table
}

fn block_checks(run: &BlockRun) -> Vec<Check> {
    let mut checks = Vec::new();
    for r in &run.rows {
        checks.push(Check::new(
            format!("n={} mollification error >= bound", r.n),
            r.measured,
            r.measured_se.hypot(r.bound_se),
            Relation::AtLeast,
            r.bound,
        ));
        checks.push(Check::new(
            format!("n={} constant h: error >= bound 0", r.n),
            r.const_norm,
            0.0,
            Relation::AtLeast,
            0.0,
        ));
    }
    checks.push(Check::new(
        "<B> gap c_hi - c_lo",
        run.c_hi - run.c_lo,
        run.c_se,
        Relation::AtLeast,
        0.0,
    ));
    checks.push(Check::new(
        "constant h has no gap",
        run.const_gap,
        0.0,
        Relation::Equal,
        0.0,
    ));
    checks
}

pub fn thm32(opts: &LabOptions) -> Result<LabOutcome> {
    let ns = opts.n_list(&[10]);
    let run = qv_density_run(opts, &ns)?;
    let verdict = LabVerdict::new(
        LabId::Thm32,
        "the block mollification error of an integrand dominates \
         (c_hi - c_lo)(n - 1)T/(2n); a constant integrand has no gap",
        opts.seed,
        opts.profile(&run.setup),
        block_checks(&run),
    );
    Ok(LabOutcome {
        table: block_table(&run),
        verdict,
    })
}

pub fn cor33(opts: &LabOptions) -> Result<LabOutcome> {
    let ns = opts.n_list(&[2, 5, 10, 20]);
    let run = qv_density_run(opts, &ns)?;
    let mut checks = block_checks(&run);
    for w in run.rows.windows(2) {
        checks.push(Check::new(
            format!("error at n={} does not fall below n={}", w[1].n, w[0].n),
            w[1].measured,
            w[1].measured_se.hypot(w[0].measured_se),
            Relation::AtLeast,
            w[0].measured,
        ));
    }
    let limit = (run.c_hi - run.c_lo) * run.setup.grid.horizon() / 2.0;
    checks.push(
        Check::new(
            "error stays above the limiting bound (c_hi - c_lo)T/2 - 3 SE at the largest n",
            run.rows.last().map_or(0.0, |r| r.measured),
            run.rows.last().map_or(0.0, |r| r.measured_se),
            Relation::AtLeast,
            limit,
        )
        .informational(),
    );
    let verdict = LabVerdict::new(
        LabId::Cor33,
        "the realized density of <B> cannot be approximated by lagged block \
         averages: the error stays above a positive bound for all n",
        opts.seed,
        opts.profile(&run.setup),
        checks,
    );
    Ok(LabOutcome {
        table: block_table(&run),
        verdict,
    })
}

const BUMP_PATHS: usize = 20_000;

pub fn prop35(opts: &LabOptions) -> Result<LabOutcome> {
    let ns = opts.n_list(&[1, 2, 4, 8]);
    let setup = opts.setup(128, BUMP_PATHS)?;
    let grid = setup.grid;
    check_block_counts(&ns, &grid, 1)?;
    let t = grid.horizon();
    let family = family_with_blocks(&setup, &ns);
    let h = bump_integrand(&setup.spec, &grid)?;
    let step =
        SimpleProcess::Deterministic(StepFunction::uniform_blocks(t, vec![1.0, 1.25, 1.1, 1.4])?);
    let one = SimpleProcess::constant(t, 1.0)?;
    let mut names = vec![
        "A_T bump".to_string(),
        "A_T const".into(),
        "A_T step".into(),
    ];
    names.extend(ns.iter().map(|n| format!("norm n={n}")));
    let ns_owned = ns.clone();
    let f = Functional::many(names, move |b: &PathBundle| {
        let grid = b.grid();
        let dt = grid.dt();
        let hv = h.step_values(b)?;
        let ones = PathSeries::zeros(b.n_paths(), grid.n_steps()).map(|_| 1.0);
        let mut out = vec![
            per_path_dt_sum(&hv, &ones, dt),
            per_path_dt_sum(&one.step_values(b)?, &ones, dt),
            per_path_dt_sum(&step.step_values(b)?, &ones, dt),
        ];
        for &n in &ns_owned {
            out.push(block_error(&hv, grid, n)?);
        }
        Ok(out)
    });
    let s = sample_family(&f, &family, &setup)?;
    let defect = s.symmetry_defect(0);
    let mut table = DataTable::new(&["n", "defect", "defect_se", "norm", "norm_se", "two_norm"]);
    let mut checks = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let norm = s.upper(3 + k);
        table.push(vec![
            cell(n),
            cell(defect.value),
            cell(defect.std_err),
            cell(norm.value),
            cell(norm.std_err),
            cell(2.0 * norm.value),
        ]);
        checks.push(Check::new(
            format!("n={n} defect <= 2 * mollification error"),
            defect.value,
            defect.std_err.hypot(2.0 * norm.std_err),
            Relation::AtMost,
            2.0 * norm.value,
        ));
    }
    let d_const = s.symmetry_defect(1);
    let d_step = s.symmetry_defect(2);
    checks.push(Check::new(
        "h = 1: defect",
        d_const.value,
        d_const.std_err,
        Relation::Equal,
        0.0,
    ));
    checks.push(Check::new(
        "deterministic step h: defect",
        d_step.value,
        d_step.std_err,
        Relation::Equal,
        0.0,
    ));
    checks.push(
        Check::new(
            "bump h: symmetry defect of A_T",
            defect.value,
            defect.std_err,
            Relation::AtLeast,
            0.0,
        )
        .informational(),
    );
    let verdict = LabVerdict::new(
        LabId::Prop35,
        "the symmetry defect of A_T = ∫h ds is at most twice the block \
         mollification error of h",
        opts.seed,
        opts.profile(&setup),
        checks,
    );
    Ok(LabOutcome { verdict, table })
}

/// `Ê ∫ δ_{2n} h ds` against the oscillator `δ_{2n}`.
pub fn delta_decay(opts: &LabOptions) -> Result<LabOutcome> {
    let ns = opts.n_list(&[1, 2, 4, 8, 16]);
    let setup = opts.setup(256, BUMP_PATHS)?;
    let grid = setup.grid;
    check_block_counts(&ns, &grid, 1)?;
    let t = grid.horizon();
    let spec = setup.spec;
    let mut family = family_with_blocks(&setup, &ns);
    for &n in &ns {
        let values = (0..2 * n)
            .map(|i| {
                if i % 2 == 0 {
                    spec.sigma_hi()
                } else {
                    spec.sigma_lo()
                }
            })
            .collect();
        family.push(VolControl::PiecewiseDeterministic(
            StepFunction::uniform_blocks(t, values)?,
        ));
    }
    for seed in 0..2 {
        family.push(VolControl::RandomAdapted {
            seed,
            switch_prob: 0.1,
        });
    }
    let h = bump_integrand(&spec, &grid)?;
    let deltas = ns
        .iter()
        .map(|&n| oscillator(2 * n, t).map(SimpleProcess::Deterministic))
        .collect::<Result<Vec<_>>>()?;
    let mut names = vec!["int |h| ds".to_string()];
    for &n in &ns {
        names.push(format!("delta_{} h", 2 * n));
        names.push(format!("delta_{} const", 2 * n));
        names.push(format!("delta_{} squared", 2 * n));
    }
    let f = Functional::many(names, move |b: &PathBundle| {
        let dt = b.grid().dt();
        let hv = h.step_values(b)?;
        let ones = hv.map(|_| 1.0);
        let mut out = vec![per_path_dt_sum(&hv.map(f64::abs), &ones, dt)];
        for d in &deltas {
            let dv = d.step_values(b)?;
            out.push(per_path_dt_sum(&dv, &hv, dt));
            out.push(per_path_dt_sum(&dv, &ones, dt));
            out.push(per_path_dt_sum(&dv, &dv, dt));
        }
        Ok(out)
    });
    let s = sample_family(&f, &family, &setup)?;
    let m1 = s.upper(0);
    let threshold = 0.05 * m1.value;
    let mut table = DataTable::new(&[
        "n",
        "blocks",
        "estimate",
        "std_err",
        "winner",
        "constant_h",
        "delta_squared",
    ]);
    let mut checks = Vec::new();
    let mut est = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let e = s.upper(1 + 3 * k);
        let c = s.upper(2 + 3 * k);
        let c_lo = s.lower(2 + 3 * k);
        let sq = s.upper(3 + 3 * k);
        table.push(vec![
            cell(n),
            cell(2 * n),
            cell(e.value),
            cell(e.std_err),
            e.winner.clone(),
            cell(c.value),
            cell(sq.value),
        ]);
        checks.push(Check::new(
            format!("h = 1: ∫δ_{} ds vanishes", 2 * n),
            c.value.abs().max(c_lo.value.abs()),
            0.0,
            Relation::Equal,
            0.0,
        ));
        checks.push(
            Check::new(
                format!("h = δ_{}: no decay, ∫δ² ds = T", 2 * n),
                sq.value,
                0.0,
                Relation::Equal,
                t,
            )
            .informational(),
        );
        est.push((n, e));
    }
    for w in est.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        checks.push(Check::new(
            format!("estimate at n={} <= estimate at n={}", w[1].0, w[0].0),
            b.value,
            b.std_err.hypot(a.std_err),
            Relation::AtMost,
            a.value,
        ));
    }
    if let Some((n, last)) = est.last() {
        checks.push(Check::new(
            format!("estimate at n={n} below 0.05 * ‖h‖_M1"),
            last.value,
            last.std_err.hypot(0.05 * m1.std_err),
            Relation::AtMost,
            threshold,
        ));
    }
    let mut verdict = LabVerdict::new(
        LabId::Delta,
        "upper expectations of ∫δ_{2n} h ds decay in n for an adapted integrand",
        opts.seed,
        opts.profile(&setup),
        checks,
    );
    verdict.profile.insert("m1_norm_h".into(), m1.value.into());
    verdict.profile.insert("threshold".into(), threshold.into());
    Ok(LabOutcome { verdict, table })
}
