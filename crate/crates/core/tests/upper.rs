use std::sync::Arc;

use gexp_core::gspec::oscillator;
use gexp_core::pde::{solve_g_heat_1d, Payoff, PdeParams};
use gexp_core::scenario::{
    integrate_dqv, integrate_dt, ito_integral, mollify_block, SimpleProcess, TimeGrid, VolControl,
};
use gexp_core::upper::{
    default_family, estimate_lower, estimate_upper, gap_report, m1_norm, sample_family,
    symmetry_defect, Functional, McSetup,
};
use gexp_core::{Error, GSpec};
use proptest::prelude::*;

fn spec() -> GSpec {
    GSpec::new(1.0, 2.0).unwrap()
}

fn setup(n_steps: usize, n_paths: usize, seed: u64) -> McSetup {
    McSetup {
        spec: spec(),
        grid: TimeGrid::new(1.0, n_steps).unwrap(),
        n_paths,
        seed,
    }
}

fn extremes() -> Vec<VolControl> {
    let s = spec();
    vec![
        VolControl::Constant(s.sigma_lo()),
        VolControl::Constant(s.sigma_hi()),
    ]
}

fn square() -> Functional {
    Functional::terminal_payoff(Payoff::parse("x2").unwrap())
}

#[test]
fn second_moment_upper_and_lower() {
    let st = setup(8, 100_000, 1);
    let up = estimate_upper(&square(), &extremes(), &st).unwrap();
    assert!((up.value - 2.0).abs() <= 3.0 * up.std_err, "{up:?}");
    assert_eq!(up.winner, extremes()[1].label());
    let lo = estimate_lower(&square(), &extremes(), &st).unwrap();
    assert!((lo.value - 1.0).abs() <= 3.0 * lo.std_err, "{lo:?}");
    assert_eq!(lo.winner, extremes()[0].label());
}

#[test]
fn qv_estimates_are_exact() {
    let st = setup(8, 1000, 2);
    let up = estimate_upper(&Functional::terminal_qv(), &extremes(), &st).unwrap();
    let lo = estimate_lower(&Functional::terminal_qv(), &extremes(), &st).unwrap();
    assert!((up.value - 2.0).abs() < 1e-12 && up.std_err < 1e-12);
    assert!((lo.value - 1.0).abs() < 1e-12 && lo.std_err < 1e-12);
}

#[test]
fn terminal_b_lower_is_zero() {
    let st = setup(8, 50_000, 3);
    let lo = estimate_lower(&Functional::terminal_b(), &extremes(), &st).unwrap();
    assert!(lo.value.abs() <= 3.0 * lo.std_err, "{lo:?}");
}

#[test]
fn symmetry_defect_examples() {
    let st = setup(16, 50_000, 4);
    let family = default_family(&st.spec, &st.grid, None);
    let b = symmetry_defect(&Functional::terminal_b(), &family, &st).unwrap();
    assert!(b.value.abs() <= 3.0 * b.std_err + 1e-12, "{b:?}");
    let q = symmetry_defect(&Functional::terminal_qv(), &family, &st).unwrap();
    assert!(
        (q.value - spec().spread()).abs() <= 3.0 * q.std_err + 1e-12,
        "{q:?}"
    );
    let delta = SimpleProcess::Deterministic(oscillator(2, 1.0).unwrap());
    let f = Functional::terminal_of("∫δ_2 dB", move |b| ito_integral(&delta, b));
    let d = symmetry_defect(&f, &family, &st).unwrap();
    assert!(d.value.abs() <= 3.0 * d.std_err, "{d:?}");
}

#[test]
fn m1_norm_examples() {
    let st = setup(20, 500, 5);
    let family = default_family(&st.spec, &st.grid, None);
    let same = m1_norm(
        |b| SimpleProcess::RealizedControl.step_values(b),
        |b| SimpleProcess::RealizedControl.step_values(b),
        &family,
        &st,
    )
    .unwrap();
    assert_eq!(same.value, 0.0);
    let one_zero = m1_norm(
        |b| SimpleProcess::constant(1.0, 1.0)?.step_values(b),
        |b| SimpleProcess::constant(1.0, 0.0)?.step_values(b),
        &family,
        &st,
    )
    .unwrap();
    assert!((one_zero.value - 1.0).abs() < 1e-12 && one_zero.std_err < 1e-12);
}

#[test]
fn qv_density_mollification_bound() {
    let st = setup(40, 2000, 6);
    let s = spec();
    for n in [2, 5, 10] {
        let mut family = default_family(&st.spec, &st.grid, None);
        family.push(VolControl::AlternatingBlocks { n });
        let eps = 1.0 / (2 * n) as f64;
        let est = m1_norm(
            |b| SimpleProcess::QvDensity.step_values(b),
            move |b| mollify_block(&SimpleProcess::QvDensity.step_values(b)?, b.grid(), eps),
            &family,
            &st,
        )
        .unwrap();
        let bound = s.spread() * (n as f64 - 1.0) / (2 * n) as f64;
        assert!(
            est.value >= bound - 3.0 * est.std_err,
            "n={n}: {est:?} < {bound}"
        );
    }
}

#[test]
fn empty_family_and_bad_functionals_rejected() {
    let st = setup(8, 10, 0);
    assert!(matches!(
        estimate_upper(&square(), &[], &st),
        Err(Error::EmptyFamily)
    ));
    let nan = Functional::new("nan", |b| Ok(vec![f64::NAN; b.n_paths()]));
    assert!(estimate_upper(&nan, &extremes(), &st).is_err());
    let short = Functional::new("short", |_| Ok(vec![0.0]));
    assert!(estimate_upper(&short, &extremes(), &st).is_err());
}

#[test]
fn gap_of_qv_and_time() {
    let st = setup(64, 2000, 7);
    let family = default_family(&st.spec, &st.grid, None);
    let qv = gap_report(
        "<B>",
        |b| integrate_dqv(&SimpleProcess::constant(1.0, 1.0)?, b),
        4,
        &family,
        &st,
    )
    .unwrap();
    assert!(qv.ordered() && qv.stationary);
    assert!((qv.c_hi - 2.0).abs() < 1e-12 && (qv.c_lo - 1.0).abs() < 1e-12);
    let time = gap_report(
        "t",
        |b| integrate_dt(&SimpleProcess::constant(1.0, 1.0)?, b),
        4,
        &family,
        &st,
    )
    .unwrap();
    assert!((time.c_hi - time.c_lo).abs() < 1e-12);
    assert!(gap_report(
        "t",
        |b| SimpleProcess::QvDensity.step_values(b),
        3,
        &family,
        &st
    )
    .is_err());
}

#[test]
fn agrees_with_pde_on_catalog() {
    let st = setup(64, 20_000, 8);
    for (name, payoff) in Payoff::catalog() {
        let sol = Arc::new(solve_g_heat_1d(&payoff, 1.0, &st.spec, &PdeParams::default()).unwrap());
        let pde = sol.value();
        let family = default_family(&st.spec, &st.grid, Some(sol));
        let est = estimate_upper(&Functional::terminal_payoff(payoff), &family, &st).unwrap();
        assert!(
            (est.value - pde).abs() <= 3.0 * est.std_err + 1e-3 * pde.abs().max(1.0),
            "{name}: {} ± {} vs {pde}",
            est.value,
            est.std_err
        );
    }
}

fn payoff() -> impl Strategy<Value = Payoff> {
    prop_oneof![
        Just(Payoff::Abs),
        (-1.0f64..1.0).prop_map(Payoff::Call),
        (-1.0f64..1.0).prop_map(Payoff::Put),
        proptest::collection::vec(-1.0f64..1.0, 1..4).prop_map(Payoff::Poly),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimator_is_sublinear(p in payoff(), q in payoff(), seed in 0u64..1000) {
        let st = setup(8, 500, seed);
        let family = default_family(&st.spec, &st.grid, None);
        let (x, y) = (Functional::terminal_payoff(p), Functional::terminal_payoff(q));
        let s = sample_family(&x.add(&y).unwrap(), &family, &st).unwrap().upper(0);
        let a = estimate_upper(&x, &family, &st).unwrap();
        let b = estimate_upper(&y, &family, &st).unwrap();
        prop_assert!(s.value <= a.value + b.value + 1e-9);
    }

    #[test]
    fn estimator_is_homogeneous_and_preserves_constants(
        p in payoff(),
        l in 0.0f64..5.0,
        k in -5.0f64..5.0,
    ) {
        let st = setup(8, 300, 1);
        let family = default_family(&st.spec, &st.grid, None);
        let x = Functional::terminal_payoff(p);
        let a = estimate_upper(&x, &family, &st).unwrap();
        let b = estimate_upper(&x.scale(l), &family, &st).unwrap();
        prop_assert!((b.value - l * a.value).abs() <= 1e-9 * (1.0 + b.value.abs()));
        let c = estimate_upper(&Functional::constant(k), &family, &st).unwrap();
        prop_assert!((c.value - k).abs() < 1e-12);
    }

    #[test]
    fn estimator_is_monotone(p in payoff(), d in 0.0f64..2.0, seed in 0u64..1000) {
        let st = setup(8, 300, seed);
        let family = default_family(&st.spec, &st.grid, None);
        let x = Functional::terminal_payoff(p.clone());
        let y = Functional::terminal_payoff(Payoff::Sum(vec![p, Payoff::Abs.dilate(d)]));
        let a = estimate_upper(&x, &family, &st).unwrap();
        let b = estimate_upper(&y, &family, &st).unwrap();
        prop_assert!(a.value <= b.value + 1e-12);
    }

    #[test]
    fn enlarging_family_never_lowers(p in payoff(), extra in 1.0f64..2f64.sqrt()) {
        let st = setup(8, 300, 2);
        let x = Functional::terminal_payoff(p);
        let small = extremes();
        let mut big = small.clone();
        big.push(VolControl::Constant(extra));
        big.push(VolControl::RandomAdapted { seed: 3, switch_prob: 0.5 });
        let a = estimate_upper(&x, &small, &st).unwrap();
        let b = estimate_upper(&x, &big, &st).unwrap();
        prop_assert!(a.value <= b.value);
    }
}
