//! Scalar special functions: log-factorials, the regularized lower
//! incomplete gamma function for integer order, and the Poisson pmf.
//!
//! Everything here is evaluated in log space with a single final
//! exponentiation so that photon numbers in the thousands neither overflow
//! nor underflow before the last step.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance allowed outside `[0, 1]` before a value is rejected as a probability.
pub const PROBABILITY_SLACK: f64 = 1e-12;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const LN_FACTORIAL_TABLE: usize = 1024;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    /// Accepts values within [`PROBABILITY_SLACK`] of the unit interval and
    /// clamps them onto it.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
            return Err(Error::domain(format!("{value} is not a probability")));
        }
        Ok(Probability(value.clamp(0.0, 1.0)))
    }

    /// Clamps without checking. For values that are probabilities by
    /// construction but may carry rounding noise.
    pub(crate) fn saturating(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0_f64;
        table.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln(n!)`. Tabulated below 1024, Stirling series above.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACTORIAL_TABLE {
        return ln_factorial_table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Truncation error of the series is below 1e-20 for n >= 1024.
    x * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

fn max_iterations(a: f64, x: f64) -> usize {
    1000 + (20.0 * (a + x).sqrt()) as usize
}

/// Regularized lower incomplete gamma function for integer order,
/// `P(a, x) = 1/(a-1)! * integral_0^x e^{-y} y^{a-1} dy`.
///
/// Series expansion below `x = a + 1`, Lentz continued fraction for the
/// complement above.
pub fn reg_inc_gamma(a: u64, x: f64) -> Result<Probability> {
    if a == 0 {
        return Err(Error::domain(
            "incomplete gamma order must be a positive integer",
        ));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "incomplete gamma argument must be finite and non-negative, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(Probability::ZERO);
    }
    let af = a as f64;
    if x < af + 1.0 {
        lower_series(a, x).map(Probability::saturating)
    } else {
        upper_continued_fraction(a, x).map(|q| Probability::saturating(1.0 - q))
    }
}

/// Complement `Q(a, x) = 1 - P(a, x)`, accurate when `P` is close to one.
pub fn reg_inc_gamma_upper(a: u64, x: f64) -> Result<Probability> {
    if a == 0 {
        return Err(Error::domain(
            "incomplete gamma order must be a positive integer",
        ));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "incomplete gamma argument must be finite and non-negative, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(Probability::ONE);
    }
    if x < a as f64 + 1.0 {
        lower_series(a, x).map(|p| Probability::saturating(1.0 - p))
    } else {
        upper_continued_fraction(a, x).map(Probability::saturating)
    }
}

fn lower_series(a: u64, x: f64) -> Result<f64> {
    let af = a as f64;
    // e^{-x} x^a / a!
    let ln_prefactor = ln_poisson_pmf(a, x)?;
    let mut denom = af;
    let mut term = 1.0 / af;
    let mut sum = term;
    for _ in 0..max_iterations(af, x) {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            // sum carries the 1/a factor, so the prefactor uses (a-1)! = a!/a
            return Ok((ln_prefactor + af.ln() + sum.ln()).exp());
        }
    }
    Err(Error::NoConvergence(format!("series for P({a}, {x})")))
}

fn upper_continued_fraction(a: u64, x: f64) -> Result<f64> {
    let af = a as f64;
    // e^{-x} x^a / (a-1)!
    let ln_prefactor = ln_poisson_pmf(a, x)? + af.ln();
    let mut b = x + 1.0 - af;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=max_iterations(af, x) {
        let fi = i as f64;
        let an = -fi * (fi - af);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok((ln_prefactor + h.ln()).exp());
        }
    }
    Err(Error::NoConvergence(format!(
        "continued fraction for Q({a}, {x})"
    )))
}

/// `ln` of the Poisson pmf; `-inf` for impossible outcomes.
pub fn ln_poisson_pmf(n: u64, mean: f64) -> Result<f64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::domain(format!(
            "Poisson mean must be finite and non-negative, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(if n == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if n == 0 {
        return Ok(-mean);
    }
    let nf = n as f64;
    Ok(-stirling_remainder(n) - deviance(nf, mean) - 0.5 * (2.0 * PI * nf).ln())
}

/// `ln n! - [(n + 1/2) ln n - n + ln sqrt(2 pi)]`, the error of Stirling's
/// formula, for `n >= 1`.
fn stirling_remainder(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nf = n as f64;
    if n <= 15 {
        return ln_factorial(n) - (nf + 0.5) * nf.ln() + nf - 0.5 * (2.0 * PI).ln();
    }
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// `x ln(x / m) + m - x`, evaluated without cancellation when `x` is near `m`.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `e^{-mean} mean^n / n!`.
pub fn poisson_pmf(n: u64, mean: f64) -> Result<Probability> {
    ln_poisson_pmf(n, mean).map(|l| Probability::saturating(l.exp()))
}
