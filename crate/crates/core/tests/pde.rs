use std::sync::Arc;

use gexp_core::pde::{
    compose_semigroup, feedback_control_from_lattice, solve_g_heat_1d, solve_g_heat_1d_fn,
    solve_hjb_2d, HjbParams, Payoff, PdeParams, DEFAULT_NESTING_CAP,
};
use gexp_core::scenario::{simulate_bundle, TimeGrid, VolControl};
use gexp_core::upper::{sample_family, Functional, McSetup};
use gexp_core::GSpec;
use proptest::prelude::*;

fn spec() -> GSpec {
    GSpec::new(1.0, 2.0).unwrap()
}

fn solve(name: &str, t: f64) -> f64 {
    solve_g_heat_1d(
        &Payoff::parse(name).unwrap(),
        t,
        &spec(),
        &PdeParams::default(),
    )
    .unwrap()
    .value()
}

fn within_tol(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(1.0)
}

#[test]
fn catalog_examples() {
    assert!(within_tol(solve("x2", 1.0), 2.0, 1e-3));
    assert!(within_tol(solve("neg_x2", 1.0), -1.0, 1e-3));
    assert!(solve("x", 1.0).abs() < 1e-9);
}

#[test]
fn fourth_moment_against_gaussian() {
    let s = spec();
    let pde = solve("x4", 1.0);
    let closed = 3.0 * s.sigma_hi_sq().powi(2);
    assert!(within_tol(pde, closed, 1e-3), "{pde} vs {closed}");
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let b = simulate_bundle(&s, &VolControl::Constant(s.sigma_hi()), &grid, 100_000, 8).unwrap();
    let x4: Vec<f64> = b.terminal_b().iter().map(|x| x.powi(4)).collect();
    let n = x4.len() as f64;
    let m = x4.iter().sum::<f64>() / n;
    let se = (x4.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(
        (m - pde).abs() <= 3.0 * se + 1e-3 * pde,
        "{m} ± {se} vs {pde}"
    );
}

#[test]
fn constants_are_fixed_points() {
    for k in [-3.0, 0.0, 2.5] {
        let sol =
            solve_g_heat_1d(&Payoff::Poly(vec![k]), 1.0, &spec(), &PdeParams::default()).unwrap();
        assert!(sol.final_slice().iter().all(|v| (v - k).abs() < 1e-12));
    }
}

#[test]
fn cfl_bound() {
    let sol = solve_g_heat_1d(&Payoff::Abs, 1.0, &spec(), &PdeParams::default()).unwrap();
    assert!(sol.cfl_ratio() <= 1.0);
    assert!(sol.dt() <= sol.dx().powi(2) / spec().sigma_hi_sq() + 1e-15);
    let bad = PdeParams {
        cfl_fraction: 1.5,
        ..PdeParams::default()
    };
    assert!(solve_g_heat_1d(&Payoff::Abs, 1.0, &spec(), &bad).is_err());
}

#[test]
fn narrow_domain_detected() {
    let narrow = PdeParams {
        domain_width_multiplier: 0.5,
        ..PdeParams::default()
    };
    assert!(solve_g_heat_1d(&Payoff::parse("x4").unwrap(), 1.0, &spec(), &narrow).is_err());
}

#[test]
fn flow_property() {
    let s = spec();
    let params = PdeParams::default();
    for name in ["x4", "abs", "abs_minus_x2"] {
        let p = Payoff::parse(name).unwrap();
        let full = solve_g_heat_1d(&p, 1.0, &s, &params).unwrap().value();
        let half = solve_g_heat_1d(&p, 0.5, &s, &params).unwrap();
        let restart = solve_g_heat_1d_fn(|x| half.value_at(x), "restart", 0.5, &s, &params)
            .unwrap()
            .value();
        assert!(
            within_tol(restart, full, 1e-3),
            "{name}: {restart} vs {full}"
        );
    }
}

#[test]
fn grid_convergence_monitor() {
    // |x| is convex, so the value is E|N(0, σ_hi² T)|
    let exact = (2.0 * spec().sigma_hi_sq() / std::f64::consts::PI).sqrt();
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&nodes| {
            let p = PdeParams {
                nodes,
                ..PdeParams::default()
            };
            (solve_g_heat_1d(&Payoff::Abs, 1.0, &spec(), &p)
                .unwrap()
                .value()
                - exact)
                .abs()
        })
        .collect();
    assert!(errs[2] <= errs[0], "{errs:?}");
    assert!(errs[2] < 1e-3, "{errs:?}");
}

#[test]
fn feedback_policy_on_convex_and_concave() {
    let s = spec();
    let grid = TimeGrid::new(1.0, 32).unwrap();
    for (name, sigma) in [("x2", s.sigma_hi()), ("neg_x2", s.sigma_lo())] {
        let sol = solve_g_heat_1d(
            &Payoff::parse(name).unwrap(),
            1.0,
            &s,
            &PdeParams::default(),
        )
        .unwrap();
        let control = feedback_control_from_lattice(Arc::new(sol));
        let b = simulate_bundle(&s, &control, &grid, 200, 3).unwrap();
        for p in 0..b.n_paths() {
            assert!(b.h(p).iter().all(|&h| h == sigma), "{name}");
        }
    }
}

#[test]
fn mixed_feedback_beats_constants() {
    let s = spec();
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let payoff = Payoff::parse("abs_minus_x2").unwrap();
    let sol = solve_g_heat_1d(&payoff, 1.0, &s, &PdeParams::default()).unwrap();
    let pde = sol.value();
    let mut family: Vec<VolControl> = (0..9)
        .map(|k| {
            VolControl::Constant(s.sigma_lo() + (s.sigma_hi() - s.sigma_lo()) * k as f64 / 8.0)
        })
        .collect();
    family.push(feedback_control_from_lattice(Arc::new(sol)));
    let setup = McSetup {
        spec: s,
        grid,
        n_paths: 40_000,
        seed: 12,
    };
    let samples = sample_family(&Functional::terminal_payoff(payoff), &family, &setup).unwrap();
    let stats = samples.stats(0);
    let fb = stats.last().unwrap();
    for c in &stats[..stats.len() - 1] {
        assert!(
            fb.mean >= c.mean - 3.0 * fb.std_err.hypot(c.std_err),
            "{fb:?} vs {c:?}"
        );
        assert!(c.mean <= pde + 3.0 * c.std_err, "{c:?} above {pde}");
    }
    assert!(
        fb.mean >= pde - (3.0 * fb.std_err + 1e-3),
        "{fb:?} vs {pde}"
    );
    assert!(fb.mean <= pde + 3.0 * fb.std_err, "{fb:?} vs {pde}");
}

#[test]
fn hjb_extreme_values() {
    let s = spec();
    let p = HjbParams::default();
    let q = solve_hjb_2d(|_, q| q, "q", 1.0, &s, &p).unwrap().value();
    let mq = solve_hjb_2d(|_, q| -q, "-q", 1.0, &s, &p).unwrap().value();
    assert!(within_tol(q, 2.0, 1e-3), "{q}");
    assert!(within_tol(mq, -1.0, 1e-3), "{mq}");
}

type Phi = fn(f64) -> f64;

#[test]
fn hjb_function_of_qv_is_maximal() {
    let s = spec();
    let p = HjbParams::default();
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let phis: [(&str, Phi); 3] = [
        ("bump", |q| -(q - 1.4).powi(2)),
        ("sin", |q| (3.0 * q).sin()),
        ("square", |q| q * q),
    ];
    for (name, phi) in phis {
        let pde = solve_hjb_2d(move |_, q| phi(q), name, 1.0, &s, &p)
            .unwrap()
            .value();
        // constant controls realize every v in the band exactly
        let scan = (0..=200)
            .map(|k| {
                let sigma = s.sigma_lo() + (s.sigma_hi() - s.sigma_lo()) * k as f64 / 200.0;
                let b = simulate_bundle(&s, &VolControl::Constant(sigma), &grid, 1, 0).unwrap();
                phi(b.terminal_qv()[0])
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (pde - scan).abs() <= 1e-2 * scan.abs().max(1.0),
            "{name}: {pde} vs {scan}"
        );
    }
}

#[test]
fn hjb_more_candidates_change_nothing() {
    let s = spec();
    let psi = |b: f64, q: f64| (b * b - q).abs() + 0.3 * q.sin();
    let base = solve_hjb_2d(psi, "psi", 1.0, &s, &HjbParams::default())
        .unwrap()
        .value();
    let wide = HjbParams {
        sigma_candidates: Some(vec![1.0, 1.1, 1.25, 1.3, 2f64.sqrt()]),
        ..HjbParams::default()
    };
    let more = solve_hjb_2d(psi, "psi", 1.0, &s, &wide).unwrap().value();
    assert!(
        (base - more).abs() <= 1e-3 * base.abs().max(1.0),
        "{base} vs {more}"
    );
}

#[test]
fn semigroup_examples() {
    let s = spec();
    let params = PdeParams {
        nodes: 200,
        ..PdeParams::default()
    };
    let sum = compose_semigroup(
        |x| x[0] + x[1],
        &[1.0, 2.0],
        &s,
        &params,
        DEFAULT_NESTING_CAP,
    )
    .unwrap();
    assert!(sum.abs() < 1e-6, "{sum}");
    let sq = compose_semigroup(
        |x| (x[0] + x[1]).powi(2),
        &[1.0, 2.0],
        &s,
        &params,
        DEFAULT_NESTING_CAP,
    )
    .unwrap();
    let single = solve_g_heat_1d(&Payoff::parse("x2").unwrap(), 2.0, &s, &params)
        .unwrap()
        .value();
    assert!(within_tol(single, 4.0, 1e-3));
    assert!((sq - single).abs() < 5e-3, "{sq} vs {single}");
    assert!(compose_semigroup(|x| x[0], &[1.0, 2.0, 3.0], &s, &params, 2).is_err());
    assert!(compose_semigroup(|x| x[0], &[1.0, 1.0], &s, &params, 2).is_err());
}

fn small() -> PdeParams {
    PdeParams {
        nodes: 60,
        boundary_check: false,
        ..PdeParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_principle(
        c in proptest::collection::vec(-1.0f64..1.0, 3),
        k in -2.0f64..2.0,
        w in 0.0f64..2.0,
        d in 0.0f64..1.0,
    ) {
        let s = spec();
        let phi = Payoff::Poly(c.clone());
        let psi = Payoff::Sum(vec![
            Payoff::Poly(c),
            Payoff::Scaled(w, Box::new(Payoff::Call(k))),
            Payoff::Poly(vec![d]),
        ]);
        let u = solve_g_heat_1d(&phi, 1.0, &s, &small()).unwrap();
        let v = solve_g_heat_1d(&psi, 1.0, &s, &small()).unwrap();
        for (a, b) in u.final_slice().iter().zip(v.final_slice()) {
            prop_assert!(a <= &(b + 1e-12));
        }
    }

    #[test]
    fn convex_payoff_follows_sigma_hi(k in -1.0f64..1.0) {
        // (x - k)^+ is convex: the G-heat value is the Black-Bachelier call at σ_hi
        let s = spec();
        let v = solve_g_heat_1d(&Payoff::Call(k), 1.0, &s, &PdeParams::default()).unwrap().value();
        let sd = s.sigma_hi();
        let z = -k / sd;
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cdf = 0.5 * (1.0 + erf(z / 2f64.sqrt()));
        let want = -k * cdf + sd * pdf;
        prop_assert!((v - want).abs() < 2e-3, "{} vs {}", v, want);
    }
}

fn erf(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    y.copysign(x)
}
