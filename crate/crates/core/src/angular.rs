//! Wigner 3j/6j symbols, squared dipole transition strengths between
//! hyperfine levels, and the closed-form branching ratios used by the leak
//! model.
//!
//! Angular momenta are stored as doubled integers. Racah sums run over
//! arbitrary-precision rationals; the square of every symbol is rational, so
//! a single square root is taken when converting to `f64`.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer or half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn integer(n: i32) -> Self {
        HalfInt(2 * n)
    }

    /// Parses a float that must be a multiple of 1/2.
    pub fn from_f64(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !twice.is_finite() || twice.fract() != 0.0 || twice.abs() > i32::MAX as f64 {
            return Err(Error::domain(format!("{value} is not a half-integer")));
        }
        Ok(HalfInt(twice as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        HalfInt::from_f64(v).map_err(serde::de::Error::custom)
    }
}

/// Which excited fine-structure manifold the detection laser addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Stretch-state qubit cycling on S1/2 -> P3/2 with sigma+ light.
    P32,
    /// Clock-state qubit (I = 1/2) cycling on S1/2 F=1 -> P1/2 F'=0.
    P12,
}

impl Scheme {
    /// Twice the excited-state J.
    fn twice_j_excited(self) -> i32 {
        match self {
            Scheme::P32 => 3,
            Scheme::P12 => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::P32 => "p32",
            Scheme::P12 => "p12",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p32" | "p3/2" => Ok(Scheme::P32),
            "p12" | "p1/2" => Ok(Scheme::P12),
            other => Err(Error::config(format!(
                "unknown scheme `{other}` (expected p32 or p12)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `sign * sqrt(square)` with an exact rational square.
#[derive(Debug, Clone)]
struct SignedSqrt {
    negative: bool,
    square: BigRational,
}

impl SignedSqrt {
    fn zero() -> Self {
        SignedSqrt {
            negative: false,
            square: BigRational::zero(),
        }
    }

    fn to_f64(&self) -> f64 {
        let v = self.square.to_f64().unwrap_or(f64::NAN).sqrt();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

fn factorial(n: i32) -> BigInt {
    static TABLE: OnceLock<Vec<BigInt>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(128);
        let mut acc = BigInt::one();
        t.push(acc.clone());
        for k in 1..128u32 {
            acc *= k;
            t.push(acc.clone());
        }
        t
    });
    debug_assert!(n >= 0);
    match table.get(n as usize) {
        Some(v) => v.clone(),
        None => (1..=n).fold(BigInt::one(), |acc, k| acc * k),
    }
}

fn check_magnitude(j: HalfInt) -> Result<()> {
    if j.0 < 0 {
        return Err(Error::domain(format!(
            "angular momentum magnitude {j} is negative"
        )));
    }
    Ok(())
}

/// Triangle condition on doubled values, including integer perimeter.
fn triangle(a: i32, b: i32, c: i32) -> bool {
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

/// Delta(abc) = (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)! for a valid triad.
fn triangle_coefficient(a: i32, b: i32, c: i32) -> BigRational {
    BigRational::new(
        factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2),
        factorial((a + b + c) / 2 + 1),
    )
}

fn racah_3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<SignedSqrt> {
    for j in [j1, j2, j3] {
        check_magnitude(j)?;
    }
    for (j, m) in [(j1, m1), (j2, m2), (j3, m3)] {
        if (j.0 + m.0) % 2 != 0 {
            return Err(Error::domain(format!(
                "projection {m} inconsistent with j = {j}"
            )));
        }
    }
    let (tj1, tj2, tj3) = (j1.0, j2.0, j3.0);
    let (tm1, tm2, tm3) = (m1.0, m2.0, m3.0);
    if tm1 + tm2 + tm3 != 0
        || !triangle(tj1, tj2, tj3)
        || tm1.abs() > tj1
        || tm2.abs() > tj2
        || tm3.abs() > tj3
    {
        return Ok(SignedSqrt::zero());
    }

    // All quantities below are integers.
    let kmin = 0.max((tj2 - tj3 - tm1) / 2).max((tj1 - tj3 + tm2) / 2);
    let kmax = ((tj1 + tj2 - tj3) / 2)
        .min((tj1 - tm1) / 2)
        .min((tj2 + tm2) / 2);

    let mut sum = BigRational::zero();
    for k in kmin..=kmax {
        let denom = factorial(k)
            * factorial((tj3 - tj2 + tm1) / 2 + k)
            * factorial((tj3 - tj1 - tm2) / 2 + k)
            * factorial((tj1 + tj2 - tj3) / 2 - k)
            * factorial((tj1 - tm1) / 2 - k)
            * factorial((tj2 + tm2) / 2 - k);
        let term = BigRational::new(BigInt::one(), denom);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return Ok(SignedSqrt::zero());
    }

    let projections = factorial((tj1 + tm1) / 2)
        * factorial((tj1 - tm1) / 2)
        * factorial((tj2 + tm2) / 2)
        * factorial((tj2 - tm2) / 2)
        * factorial((tj3 + tm3) / 2)
        * factorial((tj3 - tm3) / 2);
    let phase_odd = ((tj1 - tj2 - tm3) / 2).rem_euclid(2) == 1;
    let negative = phase_odd ^ sum.is_negative();
    let square =
        triangle_coefficient(tj1, tj2, tj3) * BigRational::from_integer(projections) * &sum * &sum;
    Ok(SignedSqrt { negative, square })
}

fn racah_6j(j: [HalfInt; 6]) -> Result<SignedSqrt> {
    for &x in &j {
        check_magnitude(x)?;
    }
    let [j1, j2, j3, j4, j5, j6] = j.map(|x| x.0);
    let triads = [(j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3)];
    if !triads.iter().all(|&(a, b, c)| triangle(a, b, c)) {
        return Ok(SignedSqrt::zero());
    }
    let a = triads.map(|(x, y, z)| (x + y + z) / 2);
    let b = [
        (j1 + j2 + j4 + j5) / 2,
        (j2 + j3 + j5 + j6) / 2,
        (j3 + j1 + j6 + j4) / 2,
    ];
    let tmin = *a.iter().max().unwrap();
    let tmax = *b.iter().min().unwrap();

    let mut sum = BigRational::zero();
    for t in tmin..=tmax {
        let denom = a.iter().map(|&ai| factorial(t - ai)).product::<BigInt>()
            * b.iter().map(|&bi| factorial(bi - t)).product::<BigInt>();
        let term = BigRational::new(factorial(t + 1), denom);
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return Ok(SignedSqrt::zero());
    }
    let deltas = triads
        .iter()
        .map(|&(x, y, z)| triangle_coefficient(x, y, z))
        .fold(BigRational::one(), |acc, d| acc * d);
    let negative = sum.is_negative();
    Ok(SignedSqrt {
        negative,
        square: deltas * &sum * &sum,
    })
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Zero when the triangle or projection-sum selection rules fail. Errors on a
/// negative magnitude or a projection whose parity does not match its `j`.
pub fn wigner_3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<f64> {
    racah_3j(j1, j2, j3, m1, m2, m3).map(|v| v.to_f64())
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}`. Zero when any triad fails the
/// triangle rule.
pub fn wigner_6j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    j4: HalfInt,
    j5: HalfInt,
    j6: HalfInt,
) -> Result<f64> {
    racah_6j([j1, j2, j3, j4, j5, j6]).map(|v| v.to_f64())
}

/// Un-normalized squared dipole strength between ground `|F, f>` of S1/2
/// and excited `|F', f'>` of the scheme's P manifold, as an exact rational.
fn raw_strength(
    f_ground: HalfInt,
    f_excited: HalfInt,
    m_ground: HalfInt,
    m_excited: HalfInt,
    spin: HalfInt,
    scheme: Scheme,
) -> Result<BigRational> {
    let q = m_excited - m_ground;
    if q.0.abs() > 2 {
        return Ok(BigRational::zero());
    }
    let s = HalfInt::HALF;
    let l = HalfInt::ZERO;
    let l_exc = HalfInt::ONE;
    let j = HalfInt::HALF;
    let j_exc = HalfInt::from_twice(scheme.twice_j_excited());
    let one = HalfInt::ONE;

    let fine = racah_6j([l_exc, j_exc, s, j, l, one])?;
    let hyperfine = racah_6j([j_exc, f_excited, spin, f_ground, j, one])?;
    let angular = racah_3j(f_ground, one, f_excited, m_ground, q, -m_excited)?;
    let degeneracy = (j.0 + 1) * (j_exc.0 + 1) * (f_ground.0 + 1) * (f_excited.0 + 1);
    Ok(BigRational::from_integer(BigInt::from(degeneracy))
        * fine.square
        * hyperfine.square
        * angular.square)
}

fn check_scheme_spin(spin: HalfInt, scheme: Scheme) -> Result<()> {
    if spin.0 <= 0 {
        return Err(Error::domain(format!(
            "nuclear spin must be positive, got {spin}"
        )));
    }
    if scheme == Scheme::P12 && spin != HalfInt::HALF {
        return Err(Error::domain(format!(
            "the P1/2 clock-state scheme requires nuclear spin 1/2, got {spin}"
        )));
    }
    Ok(())
}

/// Total decay strength out of the cycling excited level. For P3/2 this is
/// the cycling transition itself; for P1/2 the F'=0 level decays to all
/// three F=1 sublevels.
fn normalization(spin: HalfInt, scheme: Scheme) -> Result<BigRational> {
    let half = HalfInt::HALF;
    let (f_exc, m_exc) = match scheme {
        Scheme::P32 => (spin + HalfInt::from_twice(3), spin + HalfInt::from_twice(3)),
        Scheme::P12 => (HalfInt::ZERO, HalfInt::ZERO),
    };
    let mut total = BigRational::zero();
    for f_ground in [spin - half, spin + half] {
        if f_ground.0 < 0 {
            continue;
        }
        for m_ground in (-f_ground.0..=f_ground.0)
            .step_by(2)
            .map(HalfInt::from_twice)
        {
            total += raw_strength(f_ground, f_exc, m_ground, m_exc, spin, scheme)?;
        }
    }
    if total.is_zero() {
        return Err(Error::domain("cycling transition has zero strength"));
    }
    Ok(total)
}

/// Squared Clebsch-Gordan transition strength between S1/2 `|F, f>` and
/// the excited `|F', f'>` driven by polarization `q`, normalized so that the
/// cycling excited level has unit total strength.
///
/// Returns 0 when `f' != f + q`.
pub fn cg_squared(
    f_ground: HalfInt,
    f_excited: HalfInt,
    m_ground: HalfInt,
    m_excited: HalfInt,
    q: HalfInt,
    spin: HalfInt,
    scheme: Scheme,
) -> Result<f64> {
    check_scheme_spin(spin, scheme)?;
    if !q.is_integer() || q.0.abs() > 2 {
        return Err(Error::domain(format!(
            "dipole polarization q must be -1, 0 or +1, got {q}"
        )));
    }
    if m_excited != m_ground + q {
        return Ok(0.0);
    }
    let raw = raw_strength(f_ground, f_excited, m_ground, m_excited, spin, scheme)?;
    Ok((raw / normalization(spin, scheme)?)
        .to_f64()
        .unwrap_or(f64::NAN))
}

/// Branching ratios entering the leak probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchingRatios {
    /// Dark state to the cycling manifold.
    pub m1: f64,
    /// Bright state to dark via pi-polarized impurity.
    pub m2_pi: f64,
    /// Bright state to dark via sigma- impurity.
    pub m2_minus: f64,
}

/// Closed-form branching ratios.
///
/// P3/2: `M1 = 4I(3+2I)/(9(1+2I)^2)`, `M2pi = 4I/(9+18I)`,
/// `M2- = 16I/(9(1+2I)^3)`. P1/2 (I = 1/2 only): every path is `2/9`.
pub fn branching_ratios(spin: HalfInt, scheme: Scheme) -> Result<BranchingRatios> {
    check_scheme_spin(spin, scheme)?;
    match scheme {
        Scheme::P32 => {
            let i = spin.value();
            let a = 1.0 + 2.0 * i;
            Ok(BranchingRatios {
                m1: 4.0 * i * (3.0 + 2.0 * i) / (9.0 * a * a),
                m2_pi: 4.0 * i / (9.0 + 18.0 * i),
                m2_minus: 16.0 * i / (9.0 * a * a * a),
            })
        }
        Scheme::P12 => Ok(BranchingRatios {
            m1: 2.0 / 9.0,
            m2_pi: 2.0 / 9.0,
            m2_minus: 2.0 / 9.0,
        }),
    }
}

/// The same ratios assembled from products of [`cg_squared`] strengths, one
/// excitation and the subsequent decays.
pub fn branching_ratios_from_strengths(spin: HalfInt, scheme: Scheme) -> Result<BranchingRatios> {
    check_scheme_spin(spin, scheme)?;
    let half = HalfInt::HALF;
    let c = |fg: HalfInt, fe: HalfInt, mg: HalfInt, me: HalfInt| {
        cg_squared(fg, fe, mg, me, me - mg, spin, scheme)
    };
    match scheme {
        Scheme::P32 => {
            let up = spin + half;
            let down = spin - half;
            // Dark |I-1/2, I-1/2> -> P|I+1/2, I+1/2>, then decay to bright manifold.
            let m1 = c(down, up, down, up)? * (c(up, up, down, up)? + c(up, up, up, up)?);
            // Bright |I+1/2, I+1/2> -> P|I+1/2, I+1/2> (pi), decay to dark.
            let m2_pi = c(up, up, up, up)? * c(down, up, down, up)?;
            // Bright |I+1/2, I+1/2> -> P|I+1/2, I-1/2> (sigma-), decay to dark.
            let m2_minus = c(up, up, up, down)? * c(down, up, down, down)?;
            Ok(BranchingRatios {
                m1,
                m2_pi,
                m2_minus,
            })
        }
        Scheme::P12 => {
            let zero = HalfInt::ZERO;
            let one = HalfInt::ONE;
            // Dark |0,0> -> P1/2 |1,0>, then decay to the two other F=1 sublevels.
            let excite = c(zero, one, zero, zero)?;
            let decay_to_bright = c(one, one, one, zero)? + c(one, one, -one, zero)?;
            let m1 = excite * decay_to_bright;
            // Bright |1,0> -> P1/2 |1,+-1>, decay to |1,...> and |0,0>.
            let excite_bright = c(one, one, zero, one)? + c(one, one, zero, -one)?;
            let decay_to_dark = c(zero, one, zero, one)?;
            let m2 = excite_bright * decay_to_dark;
            Ok(BranchingRatios {
                m1,
                m2_pi: m2,
                m2_minus: m2,
            })
        }
    }
}
