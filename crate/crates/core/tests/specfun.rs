mod common;

use fluordet::specfun::{ln_poisson_pmf, poisson_pmf, reg_inc_gamma, reg_inc_gamma_upper};
use fluordet::Error;

#[test]
fn gamma_matches_quadrature_of_definition() {
    // The a = 3, x = 2 example, plus a spread of arguments on both sides of
    // the series / continued-fraction switch.
    let p = reg_inc_gamma(3, 2.0).unwrap().value();
    assert!((p - 0.323324).abs() < 1e-6);
    for &(a, x) in &[
        (3u64, 2.0),
        (1, 0.3),
        (4, 9.5),
        (12, 11.0),
        (25, 30.0),
        (40, 12.0),
    ] {
        let lnf = common::ln_factorial(a - 1);
        let oracle = common::integrate(|y| (-y + (a - 1) as f64 * y.ln() - lnf).exp(), 0.0, x, 400);
        let got = reg_inc_gamma(a, x).unwrap().value();
        assert!(
            (got - oracle).abs() <= 1e-12 * oracle.max(1e-300) + 1e-15,
            "P({a},{x}) = {got} vs {oracle}"
        );
    }
}

#[test]
fn gamma_frozen_reference_values() {
    // Arbitrary-precision evaluations.
    let cases = [
        (3u64, 2.0, 0.323_323_583_816_936_54),
        (20, 15.3, 0.142_170_255_435_965_76),
        (7, 30.0, 0.999_999_882_680_579_9),
    ];
    for (a, x, v) in cases {
        let got = reg_inc_gamma(a, x).unwrap().value();
        assert!((got / v - 1.0).abs() < 1e-12, "P({a},{x}) = {got}");
    }
}

#[test]
fn gamma_trivial_cases() {
    assert!((reg_inc_gamma(1, 2.0).unwrap().value() - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    assert_eq!(reg_inc_gamma(5, 0.0).unwrap().value(), 0.0);
    assert!(matches!(reg_inc_gamma(0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(reg_inc_gamma(2, -1.0), Err(Error::Domain(_))));
    assert!(matches!(
        reg_inc_gamma(2, f64::INFINITY),
        Err(Error::Domain(_))
    ));
    assert!(matches!(reg_inc_gamma(2, f64::NAN), Err(Error::Domain(_))));
}

#[test]
fn gamma_reaches_one_far_in_the_tail() {
    for a in 1..=50u64 {
        let x = a as f64 + 40.0 * (a as f64).sqrt();
        assert!(
            (reg_inc_gamma(a, x).unwrap().value() - 1.0).abs() < 1e-12,
            "a={a}"
        );
    }
}

#[test]
fn gamma_recurrence_over_grid() {
    for a in 1..=30u64 {
        for k in 0..=120 {
            let x = 0.5 * k as f64;
            let lhs = reg_inc_gamma(a + 1, x).unwrap().value();
            let rhs = reg_inc_gamma(a, x).unwrap().value() - common::poisson(a, x);
            assert!((lhs - rhs).abs() < 1e-11, "a={a} x={x}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn gamma_monotone_and_complementary() {
    for a in [1u64, 3, 10, 60] {
        let mut prev = 0.0;
        for k in 0..400 {
            let x = 0.25 * k as f64;
            let p = reg_inc_gamma(a, x).unwrap().value();
            assert!(p >= prev, "a={a} x={x}");
            prev = p;
            let q = reg_inc_gamma_upper(a, x).unwrap().value();
            assert!((p + q - 1.0).abs() < 1e-13);
        }
    }
}

#[test]
fn poisson_examples() {
    for lambda in [0.1, 1.0, 12.0, 250.0] {
        assert!((poisson_pmf(0, lambda).unwrap().value() - (-lambda).exp()).abs() < 1e-15);
    }
    assert_eq!(poisson_pmf(3, 0.0).unwrap().value(), 0.0);
    assert_eq!(poisson_pmf(0, 0.0).unwrap().value(), 1.0);
    let total: f64 = (0..=200)
        .map(|n| poisson_pmf(n, 12.0).unwrap().value())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(matches!(poisson_pmf(1, -0.5), Err(Error::Domain(_))));
}

#[test]
fn poisson_normalized_at_truncation() {
    for lambda in [0.2, 3.0, 12.0, 97.5, 1000.0] {
        let top = (lambda + 12.0 * f64::sqrt(lambda) + 30.0).ceil() as u64;
        let total: f64 = (0..=top)
            .map(|n| poisson_pmf(n, lambda).unwrap().value())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "lambda={lambda}: {total}");
    }
}

#[test]
fn poisson_log_space_survives_huge_arguments() {
    let v = ln_poisson_pmf(1_000_000, 1_000_000.0).unwrap();
    // Stirling: ln p ~ -0.5 ln(2 pi n) at n = mean.
    assert!(
        (v + 0.5 * (2.0 * std::f64::consts::PI * 1e6).ln()).abs() < 1e-6,
        "{v}"
    );
    assert!(poisson_pmf(1_000_000, 1_000_000.0).unwrap().value() > 0.0);
}
