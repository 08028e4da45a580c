//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

/// Nodes and weights of `n`-point Gauss-Legendre quadrature on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 20-point Gauss-Legendre over `panels` equal pieces of [a, b].
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre_rule(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            rule.iter()
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Poisson probability by direct summation of logarithms.
pub fn poisson(n: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - ln_factorial(n)).exp()
}

/// Dark-prepared count probability: an exponential leak time smears the
/// Poisson mean over (0, lambda0], plus the never-leaked point mass at zero.
pub fn dark_by_quadrature(n: u64, lambda0: f64, a: f64) -> f64 {
    let smeared = integrate(
        |l| a * ((l - lambda0) * a).exp() * poisson(n, l),
        0.0,
        lambda0,
        200,
    );
    let point = if n == 0 { (-a * lambda0).exp() } else { 0.0 };
    point + smeared
}

/// Bright-prepared count probability: counting stops at an exponential leak
/// time, or runs the full window with probability exp(-b lambda0).
pub fn bright_by_quadrature(n: u64, lambda0: f64, b: f64) -> f64 {
    let smeared = integrate(|l| b * (-b * l).exp() * poisson(n, l), 0.0, lambda0, 200);
    smeared + (-b * lambda0).exp() * poisson(n, lambda0)
}

/// Three-ion cadmium register at the calibrated crosstalk level: leak floors
/// at `eta = 1e-3`, six detected photons per outer ion and the middle ion
/// illuminated 1.3 times harder.
pub fn register_fixture(crosstalk_eps: f64) -> fluordet::ccd::RegisterSetup {
    use fluordet::{CcdParams, IonSpecies, LeakParams, Scheme};
    let (a1, a2) = fluordet::detmodel::leak_floor(&IonSpecies::cd111(), Scheme::P32).unwrap();
    let leaks: Vec<LeakParams> = [6.0, 7.8, 6.0]
        .iter()
        .map(|&l| LeakParams::new(l, a1, a2).unwrap())
        .collect();
    fluordet::ccd::RegisterSetup::linear_chain(&leaks, 1e-3, CcdParams::default(), crosstalk_eps)
        .unwrap()
}

pub const CALIBRATED_EPS: f64 = 0.006;
