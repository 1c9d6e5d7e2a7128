use gexp_core::gspec::oscillator;
use gexp_core::{envelope_c, g_function, GSpec, StepFunction};
use proptest::prelude::*;

fn band() -> impl Strategy<Value = GSpec> {
    (0.01f64..5.0, 0.01f64..5.0).prop_map(|(lo, extra)| GSpec::new(lo, lo + extra).unwrap())
}

#[test]
fn g_examples() {
    let spec = GSpec::new(1.0, 2.0).unwrap();
    assert_eq!(g_function(1.0, &spec), 1.0);
    assert_eq!(g_function(0.0, &spec), 0.0);
    assert_eq!(g_function(-1.0, &spec), -0.5);
}

#[test]
fn envelope_examples() {
    let c = 0.7;
    assert_eq!(envelope_c(1.0, 0.0, -c).unwrap(), 0.0);
    assert_eq!(envelope_c(-1.0, 0.0, -c).unwrap(), c);
    assert_eq!(envelope_c(2.0, 3.0, 1.0).unwrap(), 6.0);
    assert!(envelope_c(1.0, 1.0, 2.0).is_err());
}

#[test]
fn degenerate_and_invalid_bands_rejected() {
    assert!(GSpec::new(1.0, 1.0).is_err());
    assert!(GSpec::new(2.0, 1.0).is_err());
    assert!(GSpec::new(0.0, 1.0).is_err());
    assert!(GSpec::new(f64::NAN, 1.0).is_err());
}

#[test]
fn oscillator_cancels_for_even_counts() {
    for n in [2, 4, 6, 10] {
        assert!(oscillator(n, 1.5).unwrap().integral().abs() < 1e-12);
    }
    let one = oscillator(1, 2.0).unwrap();
    assert_eq!(one.eval(1.0), 1.0);
    assert_eq!(one.integral(), 2.0);
}

proptest! {
    #[test]
    fn g_is_subadditive(spec in band(), a in -10.0f64..10.0, b in -10.0f64..10.0) {
        prop_assert!(g_function(a + b, &spec) <= g_function(a, &spec) + g_function(b, &spec) + 1e-12);
    }

    #[test]
    fn g_is_positively_homogeneous(spec in band(), a in -10.0f64..10.0, l in 0.0f64..10.0) {
        let lhs = g_function(l * a, &spec);
        let rhs = l * g_function(a, &spec);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn g_is_monotone_nondegenerate(spec in band(), a in -10.0f64..10.0, d in 0.0f64..10.0) {
        let b = a - d;
        let lhs = g_function(a, &spec) - g_function(b, &spec);
        prop_assert!(lhs >= 0.5 * spec.sigma_lo_sq() * (a - b) - 1e-12);
    }

    #[test]
    fn envelope_matches_twice_g(spec in band(), a in -10.0f64..10.0) {
        let c = envelope_c(a, spec.sigma_hi_sq(), spec.sigma_lo_sq()).unwrap();
        prop_assert!((c - 2.0 * g_function(a, &spec)).abs() < 1e-12);
    }

    #[test]
    fn step_integral_matches_riemann_sum(
        values in proptest::collection::vec(-3.0f64..3.0, 1..8),
        horizon in 0.5f64..3.0,
    ) {
        let f = StepFunction::uniform_blocks(horizon, values).unwrap();
        let n = 100_000;
        let h = horizon / n as f64;
        let riemann: f64 = (1..=n).map(|i| f.eval(i as f64 * h) * h).sum();
        // each breakpoint can misplace at most one cell
        let slack = 2.0 * h * 3.0 * f.values().len() as f64;
        prop_assert!((riemann - f.integral()).abs() <= slack + 1e-9);
    }
}
