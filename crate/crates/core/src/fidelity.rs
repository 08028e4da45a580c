//! Threshold discrimination between dark and bright count distributions.
//!
//! A count strictly above the threshold `d` reads as bright. The reported
//! fidelity is the smaller of the two one-sided fidelities, and the optimizer
//! tunes the light level `lambda0` and `d` to make that minimum as large as
//! possible.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::angular::Scheme;
use crate::detmodel::{
    bright_distribution, check_eta, dark_distribution, leak_floor, n_max, IonSpecies, LeakParams,
};
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::specfun::Probability;

const GRID_POINTS: usize = 200;
const GOLDEN_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscriminationResult {
    pub d: u64,
    pub lambda0_opt: f64,
    pub fidelity: Probability,
    pub dark_fidelity: Probability,
    pub bright_fidelity: Probability,
}

impl DiscriminationResult {
    fn new(d: u64, lambda0: f64, dark: f64, bright: f64) -> Self {
        let dark = Probability::saturating(dark);
        let bright = Probability::saturating(bright);
        let fidelity = if dark.value() <= bright.value() {
            dark
        } else {
            bright
        };
        DiscriminationResult {
            d,
            lambda0_opt: lambda0,
            fidelity,
            dark_fidelity: dark,
            bright_fidelity: bright,
        }
    }

    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity.value()
    }
}

/// One-sided fidelities for a fixed threshold `d`.
pub fn fidelity_at(d: u64, params: &LeakParams, eta: f64) -> Result<DiscriminationResult> {
    let dark = dark_distribution(params, eta, d as usize)?;
    let bright = bright_distribution(params, eta, d as usize)?;
    let dark_cdf: f64 = dark.iter().sum();
    let bright_cdf: f64 = bright.iter().sum();
    Ok(DiscriminationResult::new(
        d,
        params.lambda0,
        dark_cdf,
        1.0 - bright_cdf,
    ))
}

/// Best threshold for fixed parameters, scanning every `d` in `[0, n_max]`.
/// Ties go to the smallest `d`.
pub fn best_threshold(params: &LeakParams, eta: f64) -> Result<DiscriminationResult> {
    let nm = n_max(params.lambda0);
    let dark = dark_distribution(params, eta, nm)?;
    let bright = bright_distribution(params, eta, nm)?;
    let mut best: Option<DiscriminationResult> = None;
    let (mut dark_cdf, mut bright_cdf) = (0.0, 0.0);
    for d in 0..=nm {
        dark_cdf += dark[d];
        bright_cdf += bright[d];
        let r = DiscriminationResult::new(d as u64, params.lambda0, dark_cdf, 1.0 - bright_cdf);
        if best.map_or(true, |b| r.fidelity.value() > b.fidelity.value()) {
            best = Some(r);
        }
    }
    Ok(best.expect("threshold range is never empty"))
}

/// Maximizes the discrimination fidelity over `lambda0` for fixed leak
/// probabilities, searching `(0, 3 ln(eta / alpha1)]`.
pub fn optimize_light_level(alpha1: f64, alpha2: f64, eta: f64) -> Result<DiscriminationResult> {
    check_eta(eta)?;
    if !(alpha1 > 0.0 && alpha1 < eta) {
        return Err(Error::domain(format!(
            "light-level search needs 0 < alpha1 < eta, got alpha1={alpha1}, eta={eta}"
        )));
    }
    let upper = 3.0 * (eta / alpha1).ln();
    let base = LeakParams::new(upper, alpha1, alpha2)?;
    let objective = |lambda0: f64| best_threshold(&base.with_lambda0(lambda0), eta);

    let step = upper / GRID_POINTS as f64;
    let mut best_i = 0;
    let mut best = objective(step)?;
    for i in 1..GRID_POINTS {
        let r = objective(step * (i + 1) as f64)?;
        if r.fidelity.value() > best.fidelity.value() {
            best = r;
            best_i = i;
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = step * best_i as f64;
    let mut hi = (step * (best_i + 2) as f64).min(upper);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while hi - lo > GOLDEN_REL_TOL * hi {
        if f1.fidelity.value() >= f2.fidelity.value() {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    for r in [f1, f2] {
        if r.fidelity.value() > best.fidelity.value() {
            best = r;
        }
    }
    Ok(best)
}

/// Optimal discrimination for a species in the weak, resonant, pure
/// polarization limit, where the leak probabilities sit at their floor.
pub fn optimize_detection(
    species: &IonSpecies,
    scheme: Scheme,
    eta: f64,
) -> Result<DiscriminationResult> {
    check_eta(eta)?;
    let (alpha1, alpha2) = leak_floor(species, scheme)?;
    optimize_light_level(alpha1, alpha2, eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxFidelity {
    pub fidelity: Probability,
    /// Light level at which the approximation is evaluated, `ln(eta / alpha1)`.
    pub lambda0: f64,
}

/// Leading-order fidelity `1 - (alpha1/eta) ln(eta/alpha1)`.
pub fn approx_fidelity(eta: f64, alpha1: f64) -> Result<ApproxFidelity> {
    check_eta(eta)?;
    if !(alpha1 > 0.0 && alpha1 < eta) {
        return Err(Error::domain(format!(
            "approximate fidelity needs 0 < alpha1 < eta, got alpha1={alpha1}, eta={eta}"
        )));
    }
    let lambda0 = (eta / alpha1).ln();
    Ok(ApproxFidelity {
        fidelity: Probability::saturating(1.0 - alpha1 / eta * lambda0),
        lambda0,
    })
}

/// Upper bound `1 - (4/9)(gamma / 2 omega_hfp)^2` on direct clock-state
/// detection, set by off-resonant pumping during state preparation.
pub fn max_clock_fidelity(gamma: f64, omega_hfp: f64) -> Result<Probability> {
    if !(gamma.is_finite() && gamma > 0.0 && omega_hfp.is_finite() && omega_hfp > 0.0) {
        return Err(Error::domain(format!(
            "linewidth and splitting must be positive, got gamma={gamma}, omega_hfp={omega_hfp}"
        )));
    }
    let r = gamma / (2.0 * omega_hfp);
    Probability::new(1.0 - 4.0 / 9.0 * r * r)
}

/// Clock-state detection through the P3/2 manifold: the preparation bound and
/// the discrimination optimum, composed multiplicatively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockStateFidelity {
    pub max_clock: Probability,
    pub discrimination: DiscriminationResult,
    pub total: Probability,
}

pub fn clock_state_fidelity(species: &IonSpecies, eta: f64) -> Result<ClockStateFidelity> {
    let m = species.manifold(Scheme::P32)?;
    let max_clock = max_clock_fidelity(m.gamma, m.omega_hfp)?;
    let discrimination = optimize_detection(species, Scheme::P32, eta)?;
    let total = Probability::saturating(max_clock.value() * discrimination.fidelity.value());
    Ok(ClockStateFidelity {
        max_clock,
        discrimination,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub eta: f64,
    pub infidelity_numeric: f64,
    pub infidelity_approx: f64,
    pub lambda0_opt: f64,
    pub d_opt: u64,
}

/// Numeric and approximate infidelity over a grid of collection
/// efficiencies, evaluated in parallel and returned in input order.
pub fn fidelity_curve(species: &IonSpecies, scheme: Scheme, etas: &[f64]) -> Result<Vec<CurveRow>> {
    let (alpha1, alpha2) = leak_floor(species, scheme)?;
    etas.par_iter()
        .map(|&eta| {
            let numeric = optimize_light_level(alpha1, alpha2, eta)?;
            let approx = approx_fidelity(eta, alpha1)?;
            Ok(CurveRow {
                eta,
                infidelity_numeric: numeric.infidelity(),
                infidelity_approx: 1.0 - approx.fidelity.value(),
                lambda0_opt: numeric.lambda0_opt,
                d_opt: numeric.d,
            })
        })
        .collect()
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("eta,infidelity_numeric,infidelity_approx,lambda0_opt,d_opt\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sig9(r.eta),
            sig9(r.infidelity_numeric),
            sig9(r.infidelity_approx),
            sig9(r.lambda0_opt),
            r.d_opt
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub species: String,
    pub eta: f64,
    pub result: DiscriminationResult,
}

/// Collection efficiencies of the published comparison table.
pub const TABLE_ETAS: [f64; 3] = [1e-3, 1e-2, 0.3];

/// P1/2-scheme optimum for every species and efficiency, species-major.
pub fn p12_table(species: &[IonSpecies], etas: &[f64]) -> Result<Vec<TableRow>> {
    let jobs: Vec<(&IonSpecies, f64)> = species
        .iter()
        .flat_map(|sp| etas.iter().map(move |&eta| (sp, eta)))
        .collect();
    jobs.par_iter()
        .map(|&(sp, eta)| {
            Ok(TableRow {
                species: sp.name.clone(),
                eta,
                result: optimize_detection(sp, Scheme::P12, eta)?,
            })
        })
        .collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("species,eta,fidelity,lambda0_opt,d_opt\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.species,
            sig9(r.eta),
            sig9(r.result.fidelity.value()),
            sig9(r.result.lambda0_opt),
            r.result.d
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leak_free_threshold_zero() {
        let p = LeakParams::new(5.6, 0.0, 0.0).unwrap();
        let r = fidelity_at(0, &p, 1e-3).unwrap();
        assert_eq!(r.dark_fidelity.value(), 1.0);
        assert!((r.bright_fidelity.value() - (1.0 - (-5.6f64).exp())).abs() < 1e-15);
        assert_eq!(r.fidelity, r.bright_fidelity);
    }

    #[test]
    fn best_threshold_matches_brute_force() {
        let p = LeakParams::per_detected(12.0, 0.01, 0.01, 1e-3).unwrap();
        let best = best_threshold(&p, 1e-3).unwrap();
        let brute = (0..=n_max(12.0) as u64)
            .map(|d| fidelity_at(d, &p, 1e-3).unwrap())
            .max_by(|a, b| a.fidelity.value().total_cmp(&b.fidelity.value()))
            .unwrap();
        assert!(best.d >= 1);
        assert_eq!(best.d, brute.d);
        assert!((best.fidelity.value() - brute.fidelity.value()).abs() < 1e-14);
    }

    #[test]
    fn approx_limits() {
        let a = approx_fidelity(1e-3, 1.066e-6).unwrap();
        assert!((a.fidelity.value() - 0.9927).abs() < 1e-4, "{}", a.fidelity);
        assert!(approx_fidelity(1.0, 1e-12).unwrap().fidelity.value() > 1.0 - 1e-10);
        assert!(approx_fidelity(1e-3, 1e-3).is_err());
    }

    #[test]
    fn clock_bound_algebra() {
        assert!(max_clock_fidelity(0.0, 1.0).is_err());
        assert_eq!(max_clock_fidelity(1e-12, 1.0).unwrap().value(), 1.0);
        assert!((max_clock_fidelity(2.0, 1.0).unwrap().value() - 5.0 / 9.0).abs() < 1e-15);
        assert!(max_clock_fidelity(1.0, 0.0).is_err());
    }

    #[test]
    fn curve_row_matches_single_point() {
        let cd = IonSpecies::cd111();
        let rows = fidelity_curve(&cd, Scheme::P32, &[1e-3, 0.1]).unwrap();
        let single = optimize_detection(&cd, Scheme::P32, 1e-3).unwrap();
        assert_eq!(rows[0].infidelity_numeric, single.infidelity());
        assert_eq!(rows[0].d_opt, single.d);
        assert!(rows[1].infidelity_numeric < rows[0].infidelity_numeric);
        let csv = curve_csv(&rows);
        assert!(csv.starts_with("eta,infidelity_numeric,infidelity_approx,lambda0_opt,d_opt\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
