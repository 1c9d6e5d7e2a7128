//! The finite-variation martingale `K = ∫η d<B> - ∫2G(η) ds` for `η ≡ c`:
//! its step-integral envelope and the decomposition of `X = B + K`.

use crate::error::Result;
use crate::gspec::{envelope_c, oscillator, StepFunction};
use crate::lab::{cell, Check, DataTable, LabId, LabOptions, LabOutcome, LabVerdict, Relation};
use crate::scenario::{k_process, qv_dyadic, PathBundle, PathSeries, SimpleProcess, VolControl};
use crate::upper::{default_family, gap_report, sample_family, Functional, McSetup};

/// Per-step increments of `K` outside `[-c (σ_hi^2 - σ_lo^2) dt, 0]`, per path.
fn band_violations(k: &PathSeries, floor: f64) -> Vec<f64> {
    let slack = 1e-12 * (1.0 + floor.abs());
    (0..k.n_paths())
        .map(|p| {
            k.path(p)
                .windows(2)
                .filter(|w| {
                    let d = w[1] - w[0];
                    d > slack || d < floor - slack
                })
                .count() as f64
        })
        .collect()
}

fn b_series(b: &PathBundle) -> Result<PathSeries> {
    let len = b.grid().n_steps() + 1;
    let data = (0..b.n_paths()).flat_map(|p| b.b(p).to_vec()).collect();
    PathSeries::new(b.n_paths(), len, data)
}

fn with_random(mut family: Vec<VolControl>) -> Vec<VolControl> {
    for seed in 0..2 {
        family.push(VolControl::RandomAdapted {
            seed,
            switch_prob: 0.1,
        });
    }
    family
}

fn coefficient(opts: &LabOptions) -> f64 {
    opts.overrides.c.unwrap_or(1.0)
}

/// `Ê ∫ a dK = ∫ C(a) ds` with `C(a) = -c_lo a^-`, `c_lo = -c (σ_hi^2 - σ_lo^2)`,
/// for `a ∈ {1, -1, δ_2}`.
pub fn lemma42(opts: &LabOptions) -> Result<LabOutcome> {
    let setup = opts.setup(64, 2000)?;
    let grid = setup.grid;
    let (t, dt) = (grid.horizon(), grid.dt());
    let spec = setup.spec;
    let c = coefficient(opts);
    let spread = c * spec.spread();
    let integrands = vec![
        ("a = 1", StepFunction::constant(t, 1.0)?),
        ("a = -1", StepFunction::constant(t, -1.0)?),
        ("a = delta_2", oscillator(2, t)?),
    ];
    let mut family = with_random(default_family(&spec, &grid, None));
    for (_, a) in &integrands {
        let theta = VolControl::PiecewiseDeterministic(a.map(|v| {
            if v >= 0.0 {
                spec.sigma_hi()
            } else {
                spec.sigma_lo()
            }
        }));
        if !family.iter().any(|x| x.label() == theta.label()) {
            family.push(theta);
        }
    }
    let eta = SimpleProcess::constant(t, c)?;
    let steps: Vec<SimpleProcess> = integrands
        .iter()
        .map(|(_, a)| SimpleProcess::Deterministic(a.clone()))
        .collect();
    let mut names: Vec<String> = integrands.iter().map(|(n, _)| format!("∫{n} dK")).collect();
    names.push("K band violations".into());
    names.push("max_t K_t".into());
    let f = Functional::many(names, move |b: &PathBundle| {
        let k = k_process(&eta, b, &spec)?;
        let mut out = Vec::new();
        for a in &steps {
            let av = a.step_values(b)?;
            out.push(
                (0..b.n_paths())
                    .map(|p| {
                        let kp = k.path(p);
                        av.path(p)
                            .iter()
                            .enumerate()
                            .map(|(i, ai)| ai * (kp[i + 1] - kp[i]))
                            .sum()
                    })
                    .collect(),
            );
        }
        out.push(band_violations(&k, -spread * b.grid().dt()));
        out.push(
            (0..k.n_paths())
                .map(|p| k.path(p).iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        );
        Ok(out)
    });
    let s = sample_family(&f, &family, &setup)?;
    let mut table = DataTable::new(&["integrand", "estimate", "std_err", "target", "winner"]);
    let mut checks = Vec::new();
    for (j, (name, a)) in integrands.iter().enumerate() {
        let target = a.integral_of(|v| envelope_c(v, 0.0, -spread).expect("0 >= -spread"));
        let e = s.upper(j);
        let lipschitz = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        table.push(vec![
            name.to_string(),
            cell(e.value),
            cell(e.std_err),
            cell(target),
            e.winner.clone(),
        ]);
        checks.push(
            Check::new(
                format!("Ê ∫{name} dK = ∫C(a) ds"),
                e.value,
                e.std_err,
                Relation::Equal,
                target,
            )
            .discretization(spread * dt * lipschitz),
        );
    }
    let k = integrands.len();
    let viol = s.upper(k);
    checks.push(Check::new(
        "K increments within [-c(σ_hi² - σ_lo²)dt, 0]",
        viol.value,
        0.0,
        Relation::Equal,
        0.0,
    ));
    let kmax = s.upper(k + 1);
    checks.push(Check::new(
        "K_t <= K_0 = 0 on every path",
        kmax.value,
        0.0,
        Relation::AtMost,
        0.0,
    ));
    let mut verdict = LabVerdict::new(
        LabId::Lemma42,
        "upper expectations of step integrals against K equal ∫C(a(s))ds, and K \
         is non-increasing with bounded decrease rate",
        opts.seed,
        opts.profile(&setup),
        checks,
    );
    verdict.profile.insert("c".into(), c.into());
    Ok(LabOutcome { verdict, table })
}

/// `X = B + K` with `K` from `η ≡ c`: the drift part is pathwise monotone,
/// the dyadic quadratic variation of `X` approaches that of `B`, and `B_T` is
/// symmetric while `K_T` is not.
pub fn thm44(opts: &LabOptions) -> Result<LabOutcome> {
    let setup: McSetup = opts.setup(256, 20_000)?;
    let grid = setup.grid;
    let (t, spec) = (grid.horizon(), setup.spec);
    let c = coefficient(opts);
    let spread = c * spec.spread();
    let levels: Vec<u32> = opts.n_list(&[4, 8]).into_iter().map(|n| n as u32).collect();
    let family = with_random(default_family(&spec, &grid, None));
    let eta = SimpleProcess::constant(t, c)?;
    let mut names = vec!["B_T".to_string(), "K_T".into(), "L band violations".into()];
    names.extend(levels.iter().map(|n| format!("|Ω^{n}(X) - Ω^{n}(B)|")));
    let (eta_f, levels_f) = (eta.clone(), levels.clone());
    let f = Functional::many(names, move |b: &PathBundle| {
        let grid = b.grid();
        let k = k_process(&eta_f, b, &spec)?;
        let bs = b_series(b)?;
        let x = bs.zip_with(&k, |u, v| u + v)?;
        let mut out = vec![
            b.terminal_b(),
            k.terminal(),
            band_violations(&k, -spread * grid.dt()),
        ];
        for &n in &levels_f {
            let ox = qv_dyadic(&x, grid, n, grid.horizon())?;
            let ob = qv_dyadic(&bs, grid, n, grid.horizon())?;
            out.push(ox.iter().zip(&ob).map(|(a, b)| (a - b).abs()).collect());
        }
        Ok(out)
    });
    let s = sample_family(&f, &family, &setup)?;
    let gap = gap_report("K", move |b| k_process(&eta, b, &spec), 4, &family, &setup)?;

    let mut table = DataTable::new(&["level", "gap", "std_err", "winner"]);
    let gaps: Vec<_> = (0..levels.len()).map(|j| s.upper(3 + j)).collect();
    for (n, g) in levels.iter().zip(&gaps) {
        table.push(vec![
            cell(n),
            cell(g.value),
            cell(g.std_err),
            g.winner.clone(),
        ]);
    }
    let mut checks = vec![Check::new(
        "L increments within [-c(σ_hi² - σ_lo²)dt, 0]",
        s.upper(2).value,
        0.0,
        Relation::Equal,
        0.0,
    )];
    if let (Some(first), Some(last)) = (gaps.first(), gaps.last()) {
        if gaps.len() > 1 {
            let ratio = last.value / first.value;
            let se = ratio.abs()
                * ((last.std_err / last.value).powi(2) + (first.std_err / first.value).powi(2))
                    .sqrt();
            checks.push(Check::new(
                format!(
                    "Ω gap ratio level {} / level {}",
                    levels[levels.len() - 1],
                    levels[0]
                ),
                ratio,
                se,
                Relation::AtMost,
                0.6,
            ));
        }
    }
    checks.push(Check::flag(
        "K has stationary increment rates",
        gap.stationary,
    ));
    checks.push(Check::new(
        "K c_hi",
        gap.c_hi,
        gap.c_hi_se,
        Relation::Equal,
        0.0,
    ));
    checks.push(Check::new(
        "K c_lo",
        gap.c_lo,
        gap.c_lo_se,
        Relation::Equal,
        -spread,
    ));
    let db = s.symmetry_defect(0);
    let dk = s.symmetry_defect(1);
    checks.push(Check::new(
        "B_T symmetry defect",
        db.value,
        db.std_err,
        Relation::Equal,
        0.0,
    ));
    checks.push(Check::new(
        "K_T symmetry defect",
        dk.value,
        dk.std_err,
        Relation::Equal,
        spread * t,
    ));
    let mut verdict = LabVerdict::new(
        LabId::Thm44,
        "X = B + K splits into a symmetric martingale and a non-increasing \
         finite-variation part; dyadic quadratic variations of X and B merge",
        opts.seed,
        opts.profile(&setup),
        checks,
    );
    verdict.profile.insert("c".into(), c.into());
    Ok(LabOutcome { verdict, table })
}
