//! Photon-count distributions for an ion prepared dark or bright.
//!
//! The dark distribution is a Poisson count whose mean is smeared by an
//! exponentially distributed leak time onto the cycling transition, plus a
//! point mass at zero for ions that never leak. The bright distribution is
//! the reverse: Poisson counting until the ion is pumped dark.

use crate::error::{Error, Result};
use crate::specfun::{ln_poisson_pmf, reg_inc_gamma, Probability};

use super::params::{check_eta, LeakParams};

/// Histogram truncation `ceil(lambda0 + 12 sqrt(lambda0) + 30)`.
pub fn n_max(lambda0: f64) -> usize {
    (lambda0 + 12.0 * lambda0.sqrt() + 30.0).ceil() as usize
}

/// Dark leak probability per detected photon, checked against the
/// geometric-series validity condition `alpha1 / eta < 1`.
fn dark_ratio(params: &LeakParams, eta: f64) -> Result<f64> {
    params.validate()?;
    check_eta(eta)?;
    let a = params.alpha1 / eta;
    if a >= 1.0 {
        return Err(Error::domain(format!(
            "dark distribution requires alpha1/eta < 1, got {a}"
        )));
    }
    Ok(a)
}

fn bright_ratio(params: &LeakParams, eta: f64) -> Result<f64> {
    params.validate()?;
    check_eta(eta)?;
    Ok(params.alpha2 / eta)
}

/// Probability that a dark ion never leaks during detection,
/// `exp(-alpha1 lambda0 / eta)`.
pub fn dark_point_mass(params: &LeakParams, eta: f64) -> Result<Probability> {
    params.validate()?;
    check_eta(eta)?;
    Probability::new((-params.alpha1 * params.lambda0 / eta).exp())
}

/// Density of the Poisson mean for a dark ion that leaks,
/// `g(lambda) = (alpha1/eta) exp((lambda - lambda0) alpha1/eta)` on `(0, lambda0]`.
pub fn dark_leak_density(lambda: f64, params: &LeakParams, eta: f64) -> Result<f64> {
    params.validate()?;
    check_eta(eta)?;
    if !(lambda > 0.0 && lambda <= params.lambda0) {
        return Err(Error::domain(format!(
            "leak density is defined on (0, {}], got {lambda}",
            params.lambda0
        )));
    }
    let a = params.alpha1 / eta;
    Ok(a * ((lambda - params.lambda0) * a).exp())
}

/// `ln[ r / (1 + s)^{n+1} P(n+1, (1 + s) lambda0) ]`, the smeared term shared
/// by both distributions (`s = -r` for dark, `s = +r` for bright).
fn ln_smeared_term(n: u64, ratio: f64, shift: f64, lambda0: f64) -> Result<f64> {
    if ratio == 0.0 || lambda0 == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let p = reg_inc_gamma(n + 1, (1.0 + shift) * lambda0)?.value();
    Ok(ratio.ln() - (n + 1) as f64 * shift.ln_1p() + p.ln())
}

/// Probability of `n` detected photons from an ion prepared dark.
pub fn p_dark(n: u64, params: &LeakParams, eta: f64) -> Result<Probability> {
    let a = dark_ratio(params, eta)?;
    Ok(Probability::saturating(p_dark_unchecked(
        n,
        params.lambda0,
        a,
    )?))
}

fn p_dark_unchecked(n: u64, lambda0: f64, a: f64) -> Result<f64> {
    let survive = (-a * lambda0).exp();
    let delta = if n == 0 { 1.0 } else { 0.0 };
    Ok(survive * (delta + ln_smeared_term(n, a, -a, lambda0)?.exp()))
}

/// Probability of `n` detected photons from an ion prepared bright.
pub fn p_bright(n: u64, params: &LeakParams, eta: f64) -> Result<Probability> {
    let b = bright_ratio(params, eta)?;
    Ok(Probability::saturating(p_bright_unchecked(
        n,
        params.lambda0,
        b,
    )?))
}

fn p_bright_unchecked(n: u64, lambda0: f64, b: f64) -> Result<f64> {
    let poisson = (ln_poisson_pmf(n, lambda0)? - b * lambda0).exp();
    Ok(poisson + ln_smeared_term(n, b, b, lambda0)?.exp())
}

/// `p_dark(0..=n_max)`.
pub fn dark_distribution(params: &LeakParams, eta: f64, n_max: usize) -> Result<Vec<f64>> {
    let a = dark_ratio(params, eta)?;
    (0..=n_max as u64)
        .map(|n| p_dark_unchecked(n, params.lambda0, a))
        .collect()
}

/// `p_bright(0..=n_max)`.
pub fn bright_distribution(params: &LeakParams, eta: f64, n_max: usize) -> Result<Vec<f64>> {
    let b = bright_ratio(params, eta)?;
    (0..=n_max as u64)
        .map(|n| p_bright_unchecked(n, params.lambda0, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(lambda0: f64, a1: f64, a2: f64) -> LeakParams {
        LeakParams::per_detected(lambda0, a1, a2, 1.0).unwrap()
    }

    #[test]
    fn no_leak_dark_is_point_mass() {
        let p = lp(12.0, 0.0, 0.0);
        assert_eq!(p_dark(0, &p, 1.0).unwrap().value(), 1.0);
        for n in 1..50 {
            assert_eq!(p_dark(n, &p, 1.0).unwrap().value(), 0.0);
        }
        let g = dark_leak_density(3.0, &p, 1.0).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(dark_point_mass(&p, 1.0).unwrap().value(), 1.0);
    }

    #[test]
    fn density_at_full_light_level() {
        let p = lp(12.0, 0.05, 0.0);
        assert!((dark_leak_density(12.0, &p, 1.0).unwrap() - 0.05).abs() < 1e-15);
        assert!(dark_leak_density(0.0, &p, 1.0).is_err());
        assert!(dark_leak_density(12.5, &p, 1.0).is_err());
    }

    #[test]
    fn dark_zero_bin_closed_form() {
        let p = lp(12.0, 0.05, 0.0);
        let v = p_dark(0, &p, 1.0).unwrap().value();
        let expected = (-0.6f64).exp() * (1.0 + 0.05 / 0.95 * (1.0 - (-11.4f64).exp()));
        assert!((v - expected).abs() < 1e-14, "{v}");
        // quadrature of the convolution integral plus the point mass
        assert!((v - 0.577696135666746).abs() < 1e-13, "{v}");
    }

    #[test]
    fn bright_without_leak_is_poisson() {
        let p = lp(7.3, 0.0, 0.0);
        for n in 0..60 {
            let a = p_bright(n, &p, 1.0).unwrap().value();
            let b = crate::specfun::poisson_pmf(n, 7.3).unwrap().value();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dark_validity_condition() {
        let p = LeakParams::new(12.0, 0.02, 0.0).unwrap();
        assert!(matches!(p_dark(0, &p, 0.02), Err(Error::Domain(_))));
        assert!(p_dark(0, &p, 0.021).is_ok());
    }

    #[test]
    fn distributions_normalize() {
        for &(l0, a) in &[
            (0.5, 0.3),
            (5.6, 1e-3),
            (12.0, 0.05),
            (40.0, 0.2),
            (300.0, 1e-4),
        ] {
            let p = lp(l0, a, a);
            let nm = n_max(l0);
            let sd: f64 = dark_distribution(&p, 1.0, nm).unwrap().iter().sum();
            let sb: f64 = bright_distribution(&p, 1.0, nm).unwrap().iter().sum();
            assert!((sd - 1.0).abs() < 1e-9, "dark {l0} {a}: {sd}");
            assert!((sb - 1.0).abs() < 1e-9, "bright {l0} {a}: {sb}");
        }
    }

    #[test]
    fn zero_light_level() {
        let p = lp(0.0, 0.1, 0.1);
        assert_eq!(p_dark(0, &p, 1.0).unwrap().value(), 1.0);
        assert_eq!(p_bright(0, &p, 1.0).unwrap().value(), 1.0);
        assert_eq!(p_bright(1, &p, 1.0).unwrap().value(), 0.0);
    }
}
