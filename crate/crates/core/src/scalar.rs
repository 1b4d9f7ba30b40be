//! Exact scalars: rationals, half-integers, and rationals carrying an integer
//! power of √π.
//!
//! Gamma is only ever evaluated at positive half-integers, where
//! Γ(n) = (n-1)! and Γ(n + 1/2) = (2n)!/(4^n n!) · √π. Carrying the √π
//! exponent symbolically lets products of Gamma values stay exact, and lets
//! callers check that the π-contributions cancel instead of assuming it.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always held in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("Gamma undefined at nonpositive argument {argument} (factor {factor})")]
    GammaDomain { factor: String, argument: HalfInt },
    #[error("cannot add scalars with different sqrt(pi) powers ({0} and {1})")]
    MixedSqrtPi(i64, i64),
    #[error("{0} is not a half-integer")]
    NotHalfInteger(String),
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Renders a rational as `p/q`, or `p` when the denominator is 1.
pub fn fmt_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `-p`, `p/q` or `-p/q` (no decimals).
pub fn parse_rational(s: &str) -> Result<Rational, ScalarError> {
    let t = s.trim();
    let bad = || ScalarError::Parse(s.to_string());
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (t, None),
    };
    let valid_int = |x: &str, signed: bool| {
        let digits = if signed { x.strip_prefix('-').unwrap_or(x) } else { x };
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if !valid_int(num, true) {
        return Err(bad());
    }
    let n: BigInt = num.parse().map_err(|_| bad())?;
    let d: BigInt = match den {
        Some(d) if valid_int(d, false) => d.parse().map_err(|_| bad())?,
        Some(_) => return Err(bad()),
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// `r^e` for any integer exponent; `r` must be nonzero when `e < 0`.
pub fn rat_pow(r: &Rational, e: i64) -> Rational {
    let mut base = if e < 0 { r.recip() } else { r.clone() };
    let mut k = e.unsigned_abs();
    let mut acc = Rational::one();
    while k > 0 {
        if k & 1 == 1 {
            acc *= &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    acc
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Cat(k) = (2k)! / (k! (k+1)!).
pub fn catalan(k: u64) -> BigInt {
    factorial(2 * k) / (factorial(k) * factorial(k + 1))
}

/// An element of ½ℤ, stored as twice its value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt {
    twice: BigInt,
}

impl HalfInt {
    pub fn from_twice(twice: impl Into<BigInt>) -> Self {
        HalfInt { twice: twice.into() }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        HalfInt { twice: v.into() * 2 }
    }

    pub fn twice(&self) -> &BigInt {
        &self.twice
    }

    pub fn is_integer(&self) -> bool {
        self.twice.is_even()
    }

    pub fn is_positive(&self) -> bool {
        self.twice.is_positive()
    }

    /// The value as an integer, if it is one.
    pub fn to_integer(&self) -> Option<BigInt> {
        self.is_integer().then(|| &self.twice / 2)
    }

    pub fn to_i64(&self) -> Option<i64> {
        self.to_integer().and_then(|v| v.to_i64())
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.twice.clone(), BigInt::from(2))
    }

    /// `self + other`.
    pub fn add(&self, other: &HalfInt) -> HalfInt {
        HalfInt { twice: &self.twice + &other.twice }
    }

    /// `self · k` for an integer `k`.
    pub fn scale(&self, k: i64) -> HalfInt {
        HalfInt { twice: &self.twice * k }
    }
}

impl TryFrom<&Rational> for HalfInt {
    type Error = ScalarError;

    fn try_from(r: &Rational) -> Result<Self, Self::Error> {
        let doubled = r * Rational::from_integer(BigInt::from(2));
        if doubled.is_integer() {
            Ok(HalfInt { twice: doubled.to_integer() })
        } else {
            Err(ScalarError::NotHalfInteger(fmt_rational(r)))
        }
    }
}

impl FromStr for HalfInt {
    type Err = ScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HalfInt::try_from(&parse_rational(s)?)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_rational(&self.to_rational()))
    }
}

/// `coeff · (√π)^sqrtpi_pow`. Zero always carries power 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PiScalar {
    coeff: Rational,
    sqrtpi_pow: i64,
}

impl PiScalar {
    pub fn new(coeff: Rational, sqrtpi_pow: i64) -> Self {
        let sqrtpi_pow = if coeff.is_zero() { 0 } else { sqrtpi_pow };
        PiScalar { coeff, sqrtpi_pow }
    }

    pub fn rational(coeff: Rational) -> Self {
        PiScalar::new(coeff, 0)
    }

    pub fn integer(v: impl Into<BigInt>) -> Self {
        PiScalar::rational(Rational::from_integer(v.into()))
    }

    pub fn one() -> Self {
        PiScalar::integer(1)
    }

    pub fn coeff(&self) -> &Rational {
        &self.coeff
    }

    pub fn sqrtpi_pow(&self) -> i64 {
        self.sqrtpi_pow
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    /// The value as a rational, when no √π factor remains.
    pub fn as_rational(&self) -> Option<&Rational> {
        (self.sqrtpi_pow == 0).then_some(&self.coeff)
    }

    pub fn abs(&self) -> PiScalar {
        PiScalar::new(self.coeff.abs(), self.sqrtpi_pow)
    }

    /// Sign of the value; √π is positive so only the coefficient matters.
    pub fn signum(&self) -> i32 {
        match self.coeff.cmp(&Rational::zero()) {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }

    /// Sum; only defined when both sides carry the same √π power (zero is
    /// compatible with anything).
    pub fn checked_add(&self, other: &PiScalar) -> Result<PiScalar, ScalarError> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.sqrtpi_pow != other.sqrtpi_pow {
            return Err(ScalarError::MixedSqrtPi(self.sqrtpi_pow, other.sqrtpi_pow));
        }
        Ok(PiScalar::new(&self.coeff + &other.coeff, self.sqrtpi_pow))
    }

    /// Multiply by a rational.
    pub fn scale(&self, r: &Rational) -> PiScalar {
        PiScalar::new(&self.coeff * r, self.sqrtpi_pow)
    }
}

impl Mul for &PiScalar {
    type Output = PiScalar;

    fn mul(self, rhs: &PiScalar) -> PiScalar {
        PiScalar::new(&self.coeff * &rhs.coeff, self.sqrtpi_pow + rhs.sqrtpi_pow)
    }
}

impl Div for &PiScalar {
    type Output = PiScalar;

    /// Panics on division by zero, like the underlying rationals.
    fn div(self, rhs: &PiScalar) -> PiScalar {
        PiScalar::new(&self.coeff / &rhs.coeff, self.sqrtpi_pow - rhs.sqrtpi_pow)
    }
}

impl fmt::Display for PiScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_rational(&self.coeff))?;
        if self.sqrtpi_pow != 0 {
            write!(f, " * sqrtpi^{}", self.sqrtpi_pow)?;
        }
        Ok(())
    }
}

/// Γ(h) for a positive half-integer `h`.
pub fn gamma_half(h: &HalfInt) -> Result<PiScalar, ScalarError> {
    gamma_checked(h, "Gamma")
}

fn gamma_checked(h: &HalfInt, factor: &str) -> Result<PiScalar, ScalarError> {
    if !h.is_positive() {
        return Err(ScalarError::GammaDomain {
            factor: factor.to_string(),
            argument: h.clone(),
        });
    }
    let too_large = || ScalarError::Precondition(format!("Gamma argument {h} too large"));
    if h.is_integer() {
        let n = h.to_integer().and_then(|v| v.to_u64()).ok_or_else(too_large)?;
        Ok(PiScalar::integer(factorial(n - 1)))
    } else {
        // h = n + 1/2
        let n = ((h.twice() - 1u32) / 2u32).to_u64().ok_or_else(too_large)?;
        let num = factorial(2 * n);
        let den = BigInt::from(4).pow(n as u32) * factorial(n);
        Ok(PiScalar::new(Rational::new(num, den), 1))
    }
}

/// The Morris–Selberg product
///
/// S_n(a,b,c) = (1/n!) ∏_{j=0}^{n-1} Γ(a+b+(n-1+j)c) Γ(c) / (Γ(a+jc) Γ(c+jc) Γ(b+jc+1)).
pub fn selberg_morris(
    n: u32,
    a: &HalfInt,
    b: &HalfInt,
    c: &HalfInt,
) -> Result<PiScalar, ScalarError> {
    if n == 0 {
        return Err(ScalarError::Precondition("n must be positive".into()));
    }
    let nn = i64::from(n);
    let one = HalfInt::from_int(1);
    let gamma_c = gamma_checked(c, "Gamma(c)")?;
    let mut acc = PiScalar::rational(Rational::new(BigInt::one(), factorial(u64::from(n))));
    for j in 0..nn {
        let jc = c.scale(j);
        let top = a.add(b).add(&c.scale(nn - 1 + j));
        let num = &gamma_checked(&top, &format!("Gamma(a+b+(n-1+j)c) at j={j}"))? * &gamma_c;
        let den_a = gamma_checked(&a.add(&jc), &format!("Gamma(a+jc) at j={j}"))?;
        let den_c = gamma_checked(&c.add(&jc), &format!("Gamma(c+jc) at j={j}"))?;
        let den_b = gamma_checked(&b.add(&jc).add(&one), &format!("Gamma(b+jc+1) at j={j}"))?;
        let den = &(&den_a * &den_c) * &den_b;
        acc = &acc * &(&num / &den);
    }
    Ok(acc)
}

/// 2^(n²) ∏_{k=1}^n Cat(k).
pub fn mm_rhs(n: u32) -> BigInt {
    let cats = (1..=u64::from(n)).fold(BigInt::one(), |acc, k| acc * catalan(k));
    cats << (n as usize * n as usize)
}

/// 2^(2cn(n-1) + 2(a-1)n) · S_n(a, -1/2, c).
pub fn fact_rhs(n: u32, a: u64, c: &HalfInt) -> Result<PiScalar, ScalarError> {
    if a == 0 {
        return Err(ScalarError::Precondition("a must be a positive integer".into()));
    }
    if !c.is_positive() {
        return Err(ScalarError::Precondition(format!("c must be positive, got {c}")));
    }
    let nn = i64::from(n);
    let a_big = i64::try_from(a)
        .map_err(|_| ScalarError::Precondition(format!("a = {a} too large")))?;
    // 2c is an integer, so 2c·n(n-1) is too.
    let exp = c.twice() * BigInt::from(nn * (nn - 1)) + BigInt::from(2 * (a_big - 1) * nn);
    let exp = exp
        .to_i64()
        .ok_or_else(|| ScalarError::Precondition("power-of-two exponent too large".into()))?;
    let s = selberg_morris(n, &HalfInt::from_int(a_big), &HalfInt::from_twice(-1), c)?;
    Ok(s.scale(&rat_pow(&Rational::from_integer(BigInt::from(2)), exp)))
}
