//! Scaling of stochastic integrals with constant integrand and the G-normal
//! convolution identity `aX + bX' ~ sqrt(a^2 + b^2) X`.

use crate::error::Result;
use crate::lab::{cell, Check, DataTable, LabId, LabOptions, LabOutcome, LabVerdict, Relation};
use crate::pde::{compose_semigroup, solve_g_heat_1d, Payoff, DEFAULT_NESTING_CAP};
use crate::scenario::{ito_integral, qv_dyadic, PathBundle, SimpleProcess, VolControl};
use crate::upper::{default_family, sample_family, Functional};

/// Declared agreement of nested and scaled PDE values.
pub const GNORMAL_TOLERANCE: f64 = 5e-3;

const SCALING_PAYOFFS: [&str; 3] = ["x2", "neg_x2", "x4"];

/// `M = ∫ sqrt(c) dB`: `<M> = c <B>` through dyadic sums, and
/// `Ê φ(M_T) = Ê φ(sqrt(c) B_T)` against the PDE.
pub fn qv_scaling(opts: &LabOptions) -> Result<LabOutcome> {
    let setup = opts.setup(256, 10_000)?;
    let grid = setup.grid;
    let (t, spec) = (grid.horizon(), setup.spec);
    let cs: Vec<f64> = match opts.overrides.c {
        Some(c) => vec![c],
        None => vec![0.0, 1.0, 4.0],
    };
    let levels: Vec<u32> = opts
        .n_list(&[2, 4, 6, 8])
        .into_iter()
        .map(|n| n as u32)
        .collect();
    let mut family = default_family(&spec, &grid, None);
    family.push(VolControl::RandomAdapted {
        seed: 0,
        switch_prob: 0.1,
    });

    let mut names = vec!["<B>_T".to_string()];
    for c in &cs {
        names.push(format!("c={c} max |M - sqrt(c) B|"));
        for n in &levels {
            names.push(format!("c={c} |Ω^{n}(M) - c<B>_T|"));
        }
    }
    let (cs_f, levels_f) = (cs.clone(), levels.clone());
    let f = Functional::many(names, move |b: &PathBundle| {
        let grid = b.grid();
        let mut out = vec![b.terminal_qv()];
        for &c in &cs_f {
            let m = ito_integral(&SimpleProcess::constant(grid.horizon(), c.sqrt())?, b)?;
            out.push(
                (0..b.n_paths())
                    .map(|p| {
                        m.path(p)
                            .iter()
                            .zip(b.b(p))
                            .map(|(x, y)| (x - c.sqrt() * y).abs())
                            .fold(0.0, f64::max)
                    })
                    .collect(),
            );
            let qv = b.terminal_qv();
            for &n in &levels_f {
                let om = qv_dyadic(&m, grid, n, grid.horizon())?;
                out.push(om.iter().zip(&qv).map(|(o, q)| (o - c * q).abs()).collect());
            }
        }
        Ok(out)
    });
    let s = sample_family(&f, &family, &setup)?;

    let mut table = DataTable::new(&[
        "c",
        "quantity",
        "level_or_payoff",
        "estimate",
        "std_err",
        "target",
    ]);
    let mut checks = Vec::new();
    let per_c = 1 + levels.len();
    for (ci, &c) in cs.iter().enumerate() {
        let base = 1 + ci * per_c;
        let dev = s.upper(base);
        checks.push(
            Check::new(
                format!("c={c}: M = sqrt(c) B pathwise"),
                dev.value,
                0.0,
                Relation::AtMost,
                0.0,
            )
            .absolute(1e-12 * (1.0 + c)),
        );
        let gaps: Vec<_> = (0..levels.len()).map(|j| s.upper(base + 1 + j)).collect();
        for (n, g) in levels.iter().zip(&gaps) {
            table.push(vec![
                cell(c),
                "qv_l1_gap".into(),
                cell(n),
                cell(g.value),
                cell(g.std_err),
                cell(0.0),
            ]);
        }
        for (j, w) in gaps.windows(2).enumerate() {
            checks.push(Check::new(
                format!(
                    "c={c}: <M> gap at level {} <= level {}",
                    levels[j + 1],
                    levels[j]
                ),
                w[1].value,
                w[1].std_err.hypot(w[0].std_err),
                Relation::AtMost,
                w[0].value,
            ));
        }
        if let (Some(&n), Some(g)) = (levels.last(), gaps.last()) {
            let scale = c * spec.sigma_hi_sq() * t * (2.0 / (1u64 << n) as f64).sqrt();
            checks.push(Check::new(
                format!("c={c}: <M> gap at level {n} within c σ_hi² T sqrt(2/2^n)"),
                g.value,
                g.std_err,
                Relation::AtMost,
                scale,
            ));
        }
    }
    let qv_hi = s.upper(0).value / t;
    let qv_lo = s.lower(0).value / t;
    checks.push(
        Check::new(
            "<B> rate gap c_hi - c_lo > 0: no constant h gives <M>_t = t in every scenario",
            qv_hi - qv_lo,
            0.0,
            Relation::AtLeast,
            0.0,
        )
        .informational(),
    );

    let constants: Vec<VolControl> = family
        .iter()
        .filter(|c| matches!(c, VolControl::Constant(_)))
        .cloned()
        .collect();
    let payoffs: Vec<Payoff> = SCALING_PAYOFFS
        .iter()
        .map(|p| Payoff::parse(p))
        .collect::<Result<_>>()?;
    let mut names = Vec::new();
    for c in &cs {
        for p in SCALING_PAYOFFS {
            names.push(format!("c={c} {p}(M_T)"));
        }
    }
    let (cs_f, payoffs_f) = (cs.clone(), payoffs.clone());
    let f = Functional::many(names, move |b: &PathBundle| {
        let bt = b.terminal_b();
        let mut out = Vec::new();
        for &c in &cs_f {
            for p in &payoffs_f {
                out.push(bt.iter().map(|x| p.eval(c.sqrt() * x)).collect());
            }
        }
        Ok(out)
    });
    let scan = sample_family(&f, &constants, &setup)?;
    for (ci, &c) in cs.iter().enumerate() {
        for (pi, p) in payoffs.iter().enumerate() {
            let mc = scan.upper(ci * payoffs.len() + pi);
            let pde = solve_g_heat_1d(&p.clone().dilate(c.sqrt()), t, &spec, &opts.pde)?.value();
            table.push(vec![
                cell(c),
                "upper_expectation".into(),
                SCALING_PAYOFFS[pi].into(),
                cell(mc.value),
                cell(mc.std_err),
                cell(pde),
            ]);
            checks.push(
                Check::new(
                    format!(
                        "c={c}: Ê {}(M_T) = PDE value of {}(sqrt(c) x)",
                        SCALING_PAYOFFS[pi], SCALING_PAYOFFS[pi]
                    ),
                    mc.value,
                    mc.std_err,
                    Relation::Equal,
                    pde,
                )
                .absolute(opts.pde.tolerance * pde.abs().max(1.0)),
            );
        }
    }
    let verdict = LabVerdict::new(
        LabId::QvScaling,
        "the integral of a constant sqrt(c) against B has quadratic variation \
         c<B> and the law of sqrt(c) B",
        opts.seed,
        opts.profile(&setup),
        checks,
    );
    Ok(LabOutcome { verdict, table })
}

/// Nested two-increment solve of `φ(a Δ_1 + b Δ_2)` against a single solve
/// of `φ(sqrt(a^2 + b^2) x)`.
pub fn gnormal(opts: &LabOptions) -> Result<LabOutcome> {
    let spec = opts.spec;
    let t = opts.horizon();
    let pairs: Vec<[f64; 2]> = opts
        .overrides
        .pairs
        .clone()
        .unwrap_or_else(|| vec![[1.0, 1.0], [3.0, 4.0], [2.0, 0.0]]);
    let names: Vec<String> = opts
        .overrides
        .payoffs
        .clone()
        .unwrap_or_else(|| vec!["x2".into(), "abs".into(), "x4".into()]);
    let mut table = DataTable::new(&["a", "b", "payoff", "nested", "scaled", "abs_diff"]);
    let mut checks = Vec::new();
    for name in &names {
        let payoff = Payoff::parse(name)?;
        for &[a, b] in &pairs {
            let phi = payoff.clone();
            let nested = compose_semigroup(
                move |x| phi.eval(a * x[0] + b * x[1]),
                &[t, 2.0 * t],
                &spec,
                &opts.pde,
                DEFAULT_NESTING_CAP,
            )?;
            let r = a.hypot(b);
            let scaled = solve_g_heat_1d(&payoff.clone().dilate(r), t, &spec, &opts.pde)?.value();
            table.push(vec![
                cell(a),
                cell(b),
                name.clone(),
                cell(nested),
                cell(scaled),
                cell((nested - scaled).abs()),
            ]);
            checks.push(
                Check::new(
                    format!("{name}: a={a}, b={b}"),
                    nested,
                    0.0,
                    Relation::Equal,
                    scaled,
                )
                .absolute(GNORMAL_TOLERANCE),
            );
            if name == "x2" {
                checks.push(
                    Check::new(
                        format!("x2: a={a}, b={b} equals (a² + b²) σ_hi² T"),
                        scaled,
                        0.0,
                        Relation::Equal,
                        r * r * spec.sigma_hi_sq() * t,
                    )
                    .absolute(GNORMAL_TOLERANCE),
                );
            }
        }
    }
    let mut profile = std::collections::BTreeMap::new();
    profile.insert("sigma_lo_sq".into(), spec.sigma_lo_sq().into());
    profile.insert("sigma_hi_sq".into(), spec.sigma_hi_sq().into());
    profile.insert("T".into(), t.into());
    profile.insert("nodes".into(), opts.pde.nodes.into());
    let verdict = LabVerdict::new(
        LabId::Gnormal,
        "a X + b X' has the law of sqrt(a² + b²) X for independent G-normal copies",
        opts.seed,
        profile,
        checks,
    );
    Ok(LabOutcome { verdict, table })
}
