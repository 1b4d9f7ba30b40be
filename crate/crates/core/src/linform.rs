//! Sums of factored terms `coeff · ∏ L_k^{e_k}` where every `L_k` is an
//! affine-linear form with integer coefficients.
//!
//! The class is closed under multiplication, partial differentiation and
//! setting a variable to zero, which is everything constant-term extraction
//! needs. Every value is kept canonical: forms are primitive with a positive
//! leading entry, factors are sorted and merged, like terms are combined.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::scalar::{fmt_rational, rat_pow, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("linear form is identically zero")]
    ZeroForm,
    #[error("pure form {0} cannot be evaluated at {0} = 0")]
    PureVariable(VarId),
    #[error("pole at evaluation point: factor ({0}) vanishes with negative exponent")]
    Pole(String),
    #[error("no value supplied for variable {0}")]
    Unassigned(VarId),
}

/// Variable `x_i`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Primitive integer linear form `constant + Σ coeff_i x_i`.
///
/// Invariants: not all entries zero; gcd of all entries is 1; the first
/// nonzero entry of `(constant, x_1, x_2, ...)` is positive; `coeffs` is
/// sorted by variable and holds no zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearForm {
    constant: BigInt,
    coeffs: Vec<(VarId, BigInt)>,
}

/// Shared handle to a canonical form; terms clone these freely.
pub type Form = Arc<LinearForm>;

/// Result of deleting one variable from a canonical form.
enum Restriction {
    /// The form was a multiple of the deleted variable.
    Zero,
    /// A nonzero integer constant.
    Constant(BigInt),
    /// `scale · form` with `form` canonical.
    Form(BigInt, LinearForm),
}

impl LinearForm {
    /// The form `x_v`.
    pub fn var(v: VarId) -> LinearForm {
        LinearForm { constant: BigInt::zero(), coeffs: vec![(v, BigInt::one())] }
    }

    pub fn constant(&self) -> &BigInt {
        &self.constant
    }

    pub fn coeffs(&self) -> &[(VarId, BigInt)] {
        &self.coeffs
    }

    pub fn coeff_of(&self, v: VarId) -> Option<&BigInt> {
        self.coeffs
            .binary_search_by_key(&v, |(w, _)| *w)
            .ok()
            .map(|i| &self.coeffs[i].1)
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.coeff_of(v).is_some()
    }

    pub fn is_pure_var(&self, v: VarId) -> bool {
        self.constant.is_zero()
            && self.coeffs.len() == 1
            && self.coeffs[0].0 == v
            && self.coeffs[0].1.is_one()
    }

    /// A form with no variables is the unit form `1`.
    pub fn is_unit(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.coeffs.iter().map(|(v, _)| *v)
    }

    /// Splits integer data into `(scale, primitive form)`.
    fn from_integers(constant: BigInt, mut coeffs: Vec<(VarId, BigInt)>) -> Option<(BigInt, Self)> {
        coeffs.retain(|(_, c)| !c.is_zero());
        coeffs.sort_by_key(|(v, _)| *v);
        let mut g = constant.abs();
        for (_, c) in &coeffs {
            g = g.gcd(c);
        }
        if g.is_zero() {
            return None;
        }
        let lead_negative = if constant.is_zero() {
            coeffs[0].1.is_negative()
        } else {
            constant.is_negative()
        };
        if lead_negative {
            g = -g;
        }
        let form = LinearForm {
            constant: constant / &g,
            coeffs: coeffs.into_iter().map(|(v, c)| (v, c / &g)).collect(),
        };
        Some((g, form))
    }

    fn restrict(&self, v: VarId) -> Restriction {
        if !self.contains(v) {
            return Restriction::Form(BigInt::one(), self.clone());
        }
        let rest: Vec<(VarId, BigInt)> =
            self.coeffs.iter().filter(|(w, _)| *w != v).cloned().collect();
        match LinearForm::from_integers(self.constant.clone(), rest) {
            None => Restriction::Zero,
            Some((g, form)) if form.is_unit() => Restriction::Constant(g),
            Some((g, form)) => Restriction::Form(g, form),
        }
    }

    /// Exact value at a point; every variable of the form must be assigned.
    pub fn eval(&self, point: &BTreeMap<VarId, Rational>) -> Result<Rational, FormError> {
        let mut acc = Rational::from_integer(self.constant.clone());
        for (v, c) in &self.coeffs {
            let x = point.get(v).ok_or(FormError::Unassigned(*v))?;
            acc += x * Rational::from_integer(c.clone());
        }
        Ok(acc)
    }
}

/// Canonicalizes `constant + Σ coeffs`, returning `(s, L)` with `s·L` equal
/// to the input.
pub fn make_form(
    constant: &Rational,
    coeffs: &[(VarId, Rational)],
) -> Result<(Rational, LinearForm), FormError> {
    let mut lcm = constant.denom().clone();
    for (_, c) in coeffs {
        lcm = lcm.lcm(c.denom());
    }
    let scale_up = |r: &Rational| (r * Rational::from_integer(lcm.clone())).to_integer();
    let mut merged: BTreeMap<VarId, BigInt> = BTreeMap::new();
    for (v, c) in coeffs {
        *merged.entry(*v).or_default() += scale_up(c);
    }
    let (g, form) = LinearForm::from_integers(scale_up(constant), merged.into_iter().collect())
        .ok_or(FormError::ZeroForm)?;
    Ok((Rational::new(g, lcm), form))
}

impl Ord for LinearForm {
    /// Lexicographic on the dense vector `(constant, c_1, c_2, ...)`.
    fn cmp(&self, other: &Self) -> Ordering {
        let ord = self.constant.cmp(&other.constant);
        if ord != Ordering::Equal {
            return ord;
        }
        let zero = BigInt::zero();
        let (mut i, mut j) = (0, 0);
        loop {
            let (a, b) = match (self.coeffs.get(i), other.coeffs.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some((_, a)), None) => {
                    i += 1;
                    (a, &zero)
                }
                (None, Some((_, b))) => {
                    j += 1;
                    (&zero, b)
                }
                (Some((va, a)), Some((vb, b))) => match va.cmp(vb) {
                    Ordering::Less => {
                        i += 1;
                        (a, &zero)
                    }
                    Ordering::Greater => {
                        j += 1;
                        (&zero, b)
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        (a, b)
                    }
                },
            };
            let ord = a.cmp(b);
            if ord != Ordering::Equal {
                return ord;
            }
        }
    }
}

impl PartialOrd for LinearForm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut entry = |f: &mut fmt::Formatter<'_>, c: &BigInt, var: Option<VarId>| {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            first = false;
            match var {
                None => write!(f, "{mag}"),
                Some(v) if mag.is_one() => write!(f, "{v}"),
                Some(v) => write!(f, "{mag}*{v}"),
            }
        };
        if !self.constant.is_zero() || self.coeffs.is_empty() {
            entry(f, &self.constant, None)?;
        }
        for (v, c) in &self.coeffs {
            entry(f, c, Some(*v))?;
        }
        Ok(())
    }
}

/// Factor list of a term: sorted by form, exponents nonzero.
pub type Factors = Vec<(Form, i64)>;

/// `coeff · ∏ form^exp`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoredTerm {
    coeff: Rational,
    factors: Factors,
}

impl FactoredTerm {
    pub fn coeff(&self) -> &Rational {
        &self.coeff
    }

    pub fn factors(&self) -> &[(Form, i64)] {
        &self.factors
    }

    /// Exponent of the pure form `x_v` (0 when absent).
    pub fn pure_exponent(&self, v: VarId) -> i64 {
        self.factors
            .iter()
            .find(|(f, _)| f.is_pure_var(v))
            .map_or(0, |(_, e)| *e)
    }

    pub fn into_parts(self) -> (Rational, Factors) {
        (self.coeff, self.factors)
    }
}

impl fmt::Display for FactoredTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_rational(&self.coeff))?;
        for (form, e) in &self.factors {
            write!(f, " * ({form})^{e}")?;
        }
        Ok(())
    }
}

/// Sorts and merges a factor list in place, dropping zero exponents and
/// unit forms.
fn normalize_factors(factors: &mut Factors) {
    factors.retain(|(f, e)| *e != 0 && !f.is_unit());
    factors.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Factors = Vec::with_capacity(factors.len());
    for (f, e) in factors.drain(..) {
        match out.last_mut() {
            Some((g, acc)) if **g == *f => *acc += e,
            _ => out.push((f, e)),
        }
    }
    out.retain(|(_, e)| *e != 0);
    *factors = out;
}

/// Accumulates terms keyed by factor list.
#[derive(Debug, Default, Clone)]
pub struct TermMap {
    map: HashMap<Factors, Rational>,
}

impl TermMap {
    pub fn new() -> Self {
        TermMap::default()
    }

    /// Adds `coeff · ∏ factors`; the factor list must already be normalized.
    pub fn add(&mut self, factors: Factors, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        match self.map.get_mut(&factors) {
            Some(c) => *c += coeff,
            None => {
                self.map.insert(factors, coeff);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Factors, &Rational)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn absorb(&mut self, other: TermMap) {
        if self.map.len() < other.map.len() {
            let mine = std::mem::replace(&mut self.map, other.map);
            for (k, c) in mine {
                self.add(k, c);
            }
        } else {
            for (k, c) in other.map {
                self.add(k, c);
            }
        }
    }

    pub fn into_expr(self) -> Expr {
        let mut terms: Vec<FactoredTerm> = self
            .map
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(factors, coeff)| FactoredTerm { coeff, factors })
            .collect();
        terms.sort_by(|a, b| a.factors.cmp(&b.factors));
        Expr { terms }
    }
}

/// Formal sum of factored terms, canonical: no two terms share a factor
/// list, no zero coefficients, terms sorted by factor list. Empty is 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Expr {
    terms: Vec<FactoredTerm>,
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::default()
    }

    pub fn constant(c: Rational) -> Expr {
        Expr::term(c, Vec::new())
    }

    pub fn one() -> Expr {
        Expr::constant(Rational::one())
    }

    /// Single term `coeff · ∏ form^exp` from canonical forms in any order.
    pub fn term(coeff: Rational, factors: impl IntoIterator<Item = (LinearForm, i64)>) -> Expr {
        if coeff.is_zero() {
            return Expr::zero();
        }
        let mut factors: Factors = factors.into_iter().map(|(f, e)| (Arc::new(f), e)).collect();
        normalize_factors(&mut factors);
        Expr { terms: vec![FactoredTerm { coeff, factors }] }
    }

    /// `(constant + Σ coeffs)^exp` for an arbitrary (non-canonical) form.
    pub fn linear_power(
        constant: &Rational,
        coeffs: &[(VarId, Rational)],
        exp: i64,
    ) -> Result<Expr, FormError> {
        let (s, form) = make_form(constant, coeffs)?;
        Ok(Expr::term(rat_pow(&s, exp), [(form, exp)]))
    }

    /// Canonical sum of arbitrary terms.
    pub fn from_terms(terms: impl IntoIterator<Item = FactoredTerm>) -> Expr {
        let mut map = TermMap::new();
        for t in terms {
            let mut factors = t.factors;
            normalize_factors(&mut factors);
            map.add(factors, t.coeff);
        }
        map.into_expr()
    }

    pub fn terms(&self) -> &[FactoredTerm] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<FactoredTerm> {
        self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value, if the expression has no factors at all.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::zero()),
            [t] if t.factors.is_empty() => Some(t.coeff.clone()),
            _ => None,
        }
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().flat_map(|(f, _)| f.vars()))
            .collect()
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::from_terms(self.terms.iter().chain(other.terms.iter()).cloned())
    }

    pub fn scale(&self, r: &Rational) -> Expr {
        if r.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: self
                .terms
                .iter()
                .map(|t| FactoredTerm { coeff: &t.coeff * r, factors: t.factors.clone() })
                .collect(),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        expr_mul(self, other)
    }
}

/// Distributive product; exponents of shared forms add.
pub fn expr_mul(e1: &Expr, e2: &Expr) -> Expr {
    let mut map = TermMap::new();
    for s in &e1.terms {
        for t in &e2.terms {
            let mut factors: Factors = s.factors.iter().chain(t.factors.iter()).cloned().collect();
            normalize_factors(&mut factors);
            map.add(factors, &s.coeff * &t.coeff);
        }
    }
    map.into_expr()
}

/// Adds ∂/∂v of one term into `out`.
pub(crate) fn differentiate_term_into(coeff: &Rational, factors: &Factors, v: VarId, out: &mut TermMap) {
    for (k, (form, e)) in factors.iter().enumerate() {
        let Some(s) = form.coeff_of(v) else { continue };
        let c = coeff * Rational::from_integer(s * BigInt::from(*e));
        let mut next = factors.clone();
        if *e == 1 {
            next.remove(k);
        } else {
            next[k].1 = e - 1;
        }
        out.add(next, c);
    }
}

/// Exact partial derivative with respect to `v`.
pub fn differentiate(e: &Expr, v: VarId) -> Expr {
    let mut map = TermMap::new();
    for t in &e.terms {
        differentiate_term_into(&t.coeff, &t.factors, v, &mut map);
    }
    map.into_expr()
}

/// Restricts one term to `v = 0`, returning the new coefficient and
/// normalized factor list, or `None` when the term vanishes.
pub(crate) fn substitute_zero_term(
    coeff: &Rational,
    factors: &Factors,
    v: VarId,
) -> Result<Option<(Rational, Factors)>, FormError> {
    let mut coeff = coeff.clone();
    let mut out: Factors = Vec::with_capacity(factors.len());
    let mut changed = false;
    for (form, e) in factors {
        if !form.contains(v) {
            out.push((form.clone(), *e));
            continue;
        }
        changed = true;
        match form.restrict(v) {
            Restriction::Zero => return Err(FormError::PureVariable(v)),
            Restriction::Constant(k) => {
                coeff *= rat_pow(&Rational::from_integer(k), *e);
            }
            Restriction::Form(k, f) => {
                if !k.is_one() {
                    coeff *= rat_pow(&Rational::from_integer(k), *e);
                }
                out.push((Arc::new(f), *e));
            }
        }
    }
    if changed {
        normalize_factors(&mut out);
    }
    Ok((!coeff.is_zero()).then_some((coeff, out)))
}

/// Sets `v = 0` in every form. No term may contain the pure form `x_v`.
pub fn substitute_zero(e: &Expr, v: VarId) -> Result<Expr, FormError> {
    let mut map = TermMap::new();
    for t in &e.terms {
        if let Some((c, f)) = substitute_zero_term(&t.coeff, &t.factors, v)? {
            map.add(f, c);
        }
    }
    Ok(map.into_expr())
}

/// Exact value of `e` at a rational point.
pub fn eval_at(e: &Expr, point: &BTreeMap<VarId, Rational>) -> Result<Rational, FormError> {
    let mut total = Rational::zero();
    for t in &e.terms {
        let mut value = t.coeff.clone();
        for (form, exp) in &t.factors {
            let x = form.eval(point)?;
            if x.is_zero() {
                if *exp < 0 {
                    return Err(FormError::Pole(form.to_string()));
                }
                value = Rational::zero();
            } else {
                value *= rat_pow(&x, *exp);
            }
        }
        total += value;
    }
    Ok(total)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}
