//! Iterated constant terms.
//!
//! `CT_v` is the coefficient of `v^0` in the Laurent expansion at `v = 0`,
//! with every variable not yet eliminated treated as a nonzero parameter.
//! Applying `CT_{x_1}` first therefore makes `x_1` "smaller" than every later
//! variable: `(x_j - x_1)^{-1}` expands in nonnegative powers of `x_1`.
//!
//! For a term `v^{-m} · h` where `h` has no pure-`v` factor, every `v`-form in
//! `h` has a nonzero restriction at `v = 0`, so `h` is a power series in `v`
//! and the constant term is its `m`-th Taylor coefficient
//! `(1/m!) · (∂_v^m h)|_{v=0}`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::linform::{
    differentiate_term_into, eval_at, substitute_zero_term, Expr, FactoredTerm, FormError,
    LinearForm, TermMap, VarId,
};
use crate::scalar::{factorial, HalfInt, PiScalar, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CtError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("duplicate variable {0} in constant-term order")]
    DuplicateVar(VarId),
    #[error("constant-term residue is not constant; variables left: {0}")]
    NonConstant(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("oracle disagreement at CT_{var}: engine {engine}, oracle {oracle}, point {point}")]
    OracleMismatch { var: VarId, engine: String, oracle: String, point: String },
    #[error("could not find a pole-free sample point for CT_{0}")]
    NoSamplePoint(VarId),
}

/// Variables to eliminate, innermost (first applied) first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtOrder {
    vars: Vec<VarId>,
}

impl CtOrder {
    pub fn new(vars: Vec<VarId>) -> Result<Self, CtError> {
        let mut seen = BTreeSet::new();
        for v in &vars {
            if !seen.insert(*v) {
                return Err(CtError::DuplicateVar(*v));
            }
        }
        Ok(CtOrder { vars })
    }

    /// `x_1, x_2, ..., x_n`.
    pub fn ascending(n: u32) -> Self {
        CtOrder { vars: (1..=n).map(VarId).collect() }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }
}

fn ct_term(term: &FactoredTerm, v: VarId) -> Result<TermMap, CtError> {
    let mut out = TermMap::new();
    let pure = term.pure_exponent(v);
    if pure > 0 {
        return Ok(out);
    }
    let h: Vec<_> = term
        .factors()
        .iter()
        .filter(|(f, _)| !f.is_pure_var(v))
        .cloned()
        .collect();
    let m = pure.unsigned_abs();

    // m-fold derivative of h, merged after every step.
    let mut current = TermMap::new();
    current.add(h, term.coeff().clone());
    for _ in 0..m {
        let mut next = TermMap::new();
        for (factors, coeff) in current.iter() {
            differentiate_term_into(coeff, factors, v, &mut next);
        }
        current = next;
    }

    let inv_fact = Rational::new(BigInt::one(), factorial(m));
    for (factors, coeff) in current.iter() {
        if let Some((c, f)) = substitute_zero_term(coeff, factors, v)? {
            out.add(f, c * &inv_fact);
        }
    }
    Ok(out)
}

/// `CT_v e`, treating every other variable as a nonzero parameter.
pub fn ct_once(e: &Expr, v: VarId) -> Result<Expr, CtError> {
    let merged = e
        .terms()
        .par_iter()
        .map(|t| ct_term(t, v))
        .try_reduce(TermMap::new, |mut a, b| {
            a.absorb(b);
            Ok(a)
        })?;
    Ok(merged.into_expr())
}

/// Result of an iterated extraction with its growth statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtOutcome {
    pub value: PiScalar,
    /// Term count of the input followed by the count after each step.
    pub step_terms: Vec<usize>,
}

impl CtOutcome {
    pub fn peak_terms(&self) -> usize {
        self.step_terms.iter().copied().max().unwrap_or(0)
    }
}

/// Folds `ct_once` over `order`; the residue must be constant.
pub fn ct_iterated(e: &Expr, order: &CtOrder) -> Result<PiScalar, CtError> {
    ct_iterated_with(e, order, |_, _, _| Ok(())).map(|o| o.value)
}

/// Like [`ct_iterated`], calling `check(before, v, after)` after each step.
pub fn ct_iterated_with<F>(e: &Expr, order: &CtOrder, mut check: F) -> Result<CtOutcome, CtError>
where
    F: FnMut(&Expr, VarId, &Expr) -> Result<(), CtError>,
{
    let mut current = e.clone();
    let mut step_terms = vec![current.num_terms()];
    for &v in order.vars() {
        let next = ct_once(&current, v)?;
        check(&current, v, &next)?;
        step_terms.push(next.num_terms());
        current = next;
    }
    let value = current.as_constant().ok_or_else(|| {
        let left: Vec<String> = current.vars().iter().map(|v| v.to_string()).collect();
        CtError::NonConstant(left.join(","))
    })?;
    Ok(CtOutcome { value: PiScalar::rational(value), step_terms })
}

fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// `x_i^{pure} (1 - x_i)^{shifted}` for each i, and
/// `(x_j - x_i)^{cross} (1 - x_j - x_i)^{cross}` for each i < j.
fn product_integrand(n: u32, pure: i64, shifted: i64, diff: i64, sum: i64) -> Result<Expr, CtError> {
    let mut e = Expr::one();
    for i in 1..=n {
        let xi = VarId(i);
        e = e.mul(&Expr::linear_power(&int(0), &[(xi, int(1))], pure)?);
        e = e.mul(&Expr::linear_power(&int(1), &[(xi, int(-1))], shifted)?);
    }
    for j in 1..=n {
        for i in 1..j {
            let (xi, xj) = (VarId(i), VarId(j));
            e = e.mul(&Expr::linear_power(&int(0), &[(xj, int(1)), (xi, int(-1))], diff)?);
            e = e.mul(&Expr::linear_power(&int(1), &[(xj, int(-1)), (xi, int(-1))], sum)?);
        }
    }
    Ok(e)
}

fn require_n(n: u32) -> Result<(), CtError> {
    if n == 0 {
        return Err(CtError::Precondition("n must be positive".into()));
    }
    Ok(())
}

/// Twice a positive half-integer, as an exponent.
fn twice_positive(c: &HalfInt) -> Result<i64, CtError> {
    if !c.is_positive() {
        return Err(CtError::Precondition(format!("c must be positive, got {c}")));
    }
    c.twice()
        .to_i64()
        .ok_or_else(|| CtError::Precondition(format!("c = {c} too large")))
}

/// ∏ x_i^{-1}(1-x_i)^{-2} ∏_{i<j} (x_j-x_i)^{-1}(1-x_j-x_i)^{-1}, order x_1 first.
pub fn build_mm(n: u32) -> Result<(Expr, CtOrder), CtError> {
    require_n(n)?;
    Ok((product_integrand(n, -1, -2, -1, -1)?, CtOrder::ascending(n)))
}

/// ∏ x_i^{-(a-1)}(1-x_i)^{-a} ∏_{i<j} (x_j-x_i)^{-2c}(1-x_j-x_i)^{-2c}.
pub fn build_fact(n: u32, a: u64, c: &HalfInt) -> Result<(Expr, CtOrder), CtError> {
    require_n(n)?;
    let a = i64::try_from(a)
        .ok()
        .filter(|a| *a >= 1)
        .ok_or_else(|| CtError::Precondition(format!("a must be a positive integer, got {a}")))?;
    let two_c = twice_positive(c)?;
    Ok((product_integrand(n, -(a - 1), -a, -two_c, -two_c)?, CtOrder::ascending(n)))
}

/// ∏ (1-x_i)^{-a} x_i^{-b} ∏_{i<j} (x_j-x_i)^{-2c}.
pub fn build_morris(n: u32, a: u64, b: u64, c: &HalfInt) -> Result<(Expr, CtOrder), CtError> {
    require_n(n)?;
    let too_large = |what: &str| CtError::Precondition(format!("{what} too large"));
    let a = i64::try_from(a).map_err(|_| too_large("a"))?;
    let b = i64::try_from(b).map_err(|_| too_large("b"))?;
    if a < 1 {
        return Err(CtError::Precondition("a must be a positive integer".into()));
    }
    let two_c = twice_positive(c)?;
    Ok((product_integrand(n, -b, -a, -two_c, 0)?, CtOrder::ascending(n)))
}

// Univariate polynomial helpers for the oracle; index = power of v.

fn poly_mul_trunc(p: &[Rational], q: &[Rational], len: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); len.min(p.len() + q.len() - 1)];
    for (i, a) in p.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in q.iter().enumerate() {
            if i + j >= out.len() {
                break;
            }
            out[i + j] += a * b;
        }
    }
    out
}

/// First `len` coefficients of `1 / d` for `d(0) != 0`.
fn series_inverse(d: &[Rational], len: usize) -> Vec<Rational> {
    let d0_inv = d[0].recip();
    let mut inv: Vec<Rational> = Vec::with_capacity(len);
    for k in 0..len {
        if k == 0 {
            inv.push(d0_inv.clone());
            continue;
        }
        let mut acc = Rational::zero();
        for i in 1..=k.min(d.len() - 1) {
            acc += &d[i] * &inv[k - i];
        }
        inv.push(-acc * &d0_inv);
    }
    inv
}

/// Independent check of `ct_once`: specializes every variable except `v` to
/// `point`, then reads the `v^0` Laurent coefficient at `v = 0` of the
/// resulting univariate rational function by truncated series arithmetic.
pub fn ct_oracle_specialized(
    e: &Expr,
    v: VarId,
    point: &BTreeMap<VarId, Rational>,
) -> Result<Rational, CtError> {
    let mut total = Rational::zero();
    'terms: for t in e.terms() {
        let mut scale = t.coeff().clone();
        let mut v_power: i64 = 0;
        let mut numer = vec![Rational::one()];
        let mut denom = vec![Rational::one()];
        let mut linear: Vec<(Vec<Rational>, i64)> = Vec::new();
        for (form, exp) in t.factors() {
            if form.is_pure_var(v) {
                v_power += exp;
                continue;
            }
            let slope = form.coeff_of(v).cloned().map(Rational::from_integer);
            let mut at_zero = point.clone();
            at_zero.insert(v, Rational::zero());
            let r = form.eval(&at_zero)?;
            match slope {
                None => {
                    if r.is_zero() {
                        if *exp < 0 {
                            return Err(FormError::Pole(form.to_string()).into());
                        }
                        continue 'terms;
                    }
                    scale *= crate::scalar::rat_pow(&r, *exp);
                }
                Some(s) => {
                    if r.is_zero() {
                        return Err(FormError::Pole(form.to_string()).into());
                    }
                    linear.push((vec![r, s], *exp));
                }
            }
        }
        if v_power > 0 {
            continue;
        }
        let m = v_power.unsigned_abs() as usize;
        let len = m + 1;
        for (lin, exp) in &linear {
            for _ in 0..exp.unsigned_abs() {
                if *exp > 0 {
                    numer = poly_mul_trunc(&numer, lin, len);
                } else {
                    denom = poly_mul_trunc(&denom, lin, len);
                }
            }
        }
        let series = poly_mul_trunc(&numer, &series_inverse(&denom, len), len);
        if let Some(c) = series.get(m) {
            total += c * scale;
        }
    }
    Ok(total)
}

/// A random rational with small numerator and denominator.
pub fn random_rational<R: Rng>(rng: &mut R) -> Rational {
    let num: i64 = rng.gen_range(-9..=9);
    let den: i64 = rng.gen_range(1..=5);
    Rational::new(num.into(), den.into())
}

/// Compares `after = CT_v before` against the specialization oracle at
/// `points` random pole-free points.
pub fn oracle_check<R: Rng>(
    before: &Expr,
    v: VarId,
    after: &Expr,
    points: usize,
    rng: &mut R,
) -> Result<(), CtError> {
    let others: Vec<VarId> = before.vars().into_iter().filter(|w| *w != v).collect();
    let mut done = 0;
    let mut attempts = 0;
    while done < points {
        attempts += 1;
        if attempts > 200 * points.max(1) {
            return Err(CtError::NoSamplePoint(v));
        }
        let point: BTreeMap<VarId, Rational> =
            others.iter().map(|w| (*w, random_rational(rng))).collect();
        let oracle = match ct_oracle_specialized(before, v, &point) {
            Ok(x) => x,
            Err(CtError::Form(FormError::Pole(_))) => continue,
            Err(other) => return Err(other),
        };
        let engine = match eval_at(after, &point) {
            Ok(x) => x,
            Err(FormError::Pole(_)) => continue,
            Err(other) => return Err(other.into()),
        };
        if engine != oracle {
            let shown: Vec<String> = point
                .iter()
                .map(|(w, x)| format!("{w}={}", crate::scalar::fmt_rational(x)))
                .collect();
            return Err(CtError::OracleMismatch {
                var: v,
                engine: crate::scalar::fmt_rational(&engine),
                oracle: crate::scalar::fmt_rational(&oracle),
                point: shown.join(","),
            });
        }
        done += 1;
    }
    Ok(())
}

/// Convenience for callers holding canonical forms.
pub fn pure(v: VarId, exp: i64) -> Expr {
    Expr::term(Rational::one(), [(LinearForm::var(v), exp)])
}
