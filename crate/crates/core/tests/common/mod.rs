//! Shared generators, independent oracles and property checks for the
//! integration test targets.
#![allow(dead_code)]

use std::cell::Cell;
use std::collections::BTreeMap;

use ctverify::cli::parse_integrand;
use ctverify::ct::{build_fact, build_mm, build_morris, ct_once, ct_oracle_specialized, CtError};
use ctverify::linform::{differentiate, eval_at, expr_mul, substitute_zero, FormError};
use ctverify::scalar::{
    factorial, gamma_half, parse_rational, selberg_morris, HalfInt, PiScalar, Rational,
};
use ctverify::{Expr, VarId};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

pub fn half(twice: i64) -> HalfInt {
    HalfInt::from_twice(twice)
}

// ---------------------------------------------------------------------------
// Strategies

/// A nonzero linear form over x1..x3 with small integer entries.
pub fn arb_linear() -> impl Strategy<Value = (Rational, Vec<(VarId, Rational)>)> {
    (-2i64..=2, prop::collection::vec((1u32..=3, -2i64..=2), 0..=3))
        .prop_filter("nonzero form", |(c, cs)| {
            let mut dense = [*c, 0, 0, 0];
            for (v, k) in cs {
                dense[*v as usize] += k;
            }
            dense.iter().any(|x| *x != 0)
        })
        .prop_map(|(c, cs)| (int(c), cs.into_iter().map(|(v, k)| (VarId(v), int(k))).collect()))
}

pub fn arb_rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

pub fn arb_nonzero_rational() -> impl Strategy<Value = Rational> {
    arb_rational().prop_filter("nonzero", |r| !r.is_zero())
}

/// Single term: coefficient times up to `max_factors` powers with exponents
/// in [-3, 3].
pub fn arb_term(max_factors: usize) -> impl Strategy<Value = Expr> {
    (
        arb_nonzero_rational(),
        prop::collection::vec((arb_linear(), -3i64..=3), 0..=max_factors),
    )
        .prop_map(|(c, factors)| {
            factors.into_iter().fold(Expr::constant(c), |acc, ((k, cs), e)| {
                acc.mul(&Expr::linear_power(&k, &cs, e).expect("nonzero form"))
            })
        })
}

/// Sum of one to three terms over at most three variables.
pub fn arb_expr() -> impl Strategy<Value = Expr> {
    prop::collection::vec(arb_term(4), 1..=3)
        .prop_map(|ts| ts.iter().fold(Expr::zero(), |acc, t| acc.add(t)))
}

/// Terms with no pure `x_v` factor: analytic in `v` at 0.
pub fn arb_analytic_in(v: VarId) -> impl Strategy<Value = Expr> {
    arb_expr().prop_map(move |e| {
        Expr::from_terms(e.into_terms().into_iter().filter(|t| t.pure_exponent(v) == 0))
    })
}

pub fn arb_var() -> impl Strategy<Value = VarId> {
    (1u32..=3).prop_map(VarId)
}

fn random_point(rng: &mut ChaCha8Rng, vars: impl IntoIterator<Item = VarId>) -> BTreeMap<VarId, Rational> {
    vars.into_iter().map(|v| (v, ctverify::ct::random_rational(rng))).collect()
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn finish(result: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Check {
    result.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Univariate rational-function arithmetic (index = power of t)

type Poly = Vec<Rational>;

fn poly_mul(p: &Poly, q: &Poly) -> Poly {
    let mut out = vec![Rational::zero(); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn poly_deriv(p: &Poly) -> Poly {
    if p.len() <= 1 {
        return vec![Rational::zero()];
    }
    p.iter().enumerate().skip(1).map(|(i, c)| c * int(i as i64)).collect()
}

fn poly_eval(p: &Poly, t: &Rational) -> Rational {
    p.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
}

/// d/dv of `e` at `point`, computed by specializing every other variable and
/// applying the quotient rule to the resulting univariate N(t)/D(t).
pub fn specialized_derivative(
    e: &Expr,
    v: VarId,
    point: &BTreeMap<VarId, Rational>,
) -> Option<Rational> {
    let t0 = point.get(&v).cloned().unwrap_or_else(Rational::zero);
    let mut total = Rational::zero();
    for term in e.terms() {
        let mut num: Poly = vec![term.coeff().clone()];
        let mut den: Poly = vec![Rational::one()];
        for (form, exp) in term.factors() {
            let mut at = point.clone();
            at.insert(v, Rational::zero());
            let r = form.eval(&at).ok()?;
            let s = form.coeff_of(v).cloned().map_or_else(Rational::zero, Rational::from_integer);
            let lin = vec![r, s];
            for _ in 0..exp.unsigned_abs() {
                if *exp > 0 {
                    num = poly_mul(&num, &lin);
                } else {
                    den = poly_mul(&den, &lin);
                }
            }
        }
        let d = poly_eval(&den, &t0);
        if d.is_zero() {
            return None;
        }
        let top = poly_eval(&poly_deriv(&num), &t0) * &d - poly_eval(&num, &t0) * poly_eval(&poly_deriv(&den), &t0);
        total += top / (&d * &d);
    }
    Some(total)
}

// ---------------------------------------------------------------------------
// Property checks

pub fn check_rational_canonical() -> Check {
    finish(runner(256).run(&(-1000i64..1000, -1000i64..1000), |(p, q)| {
        prop_assume!(q != 0);
        let r = Rational::new(p.into(), q.into());
        prop_assert!(r.denom().is_positive());
        prop_assert!(r.numer().gcd(r.denom()).is_one());
        if p == 0 {
            prop_assert_eq!(r.denom(), &BigInt::one());
        }
        let s = &r * &r + &r - Rational::new(3.into(), 7.into());
        prop_assert!(s.denom().is_positive() && s.numer().gcd(s.denom()).is_one());
        let text = ctverify::scalar::fmt_rational(&r);
        prop_assert_eq!(parse_rational(&text).unwrap(), r);
        Ok(())
    }))
}

/// Γ(h+1) = h·Γ(h) for every half-integer h in (0, 40].
pub fn check_gamma_recurrence() -> Check {
    for twice in 1..=80 {
        let h = half(twice);
        let lhs = gamma_half(&h.add(&half(2))).map_err(|e| e.to_string())?;
        let rhs = gamma_half(&h).map_err(|e| e.to_string())?.scale(&h.to_rational());
        if lhs != rhs {
            return Err(format!("Gamma({h}+1) = {lhs} but {h}*Gamma({h}) = {rhs}"));
        }
    }
    Ok(())
}

/// S_1(a,b,c) = (a+b-1)! / ((a-1)! b!) for positive integers a, b.
pub fn check_selberg_n1_binomial() -> Check {
    for a in 1..=7u64 {
        for b in 1..=7u64 {
            let want = Rational::new(
                factorial(a + b - 1),
                factorial(a - 1) * factorial(b),
            );
            for twice_c in 1..=6 {
                let got = selberg_morris(1, &HalfInt::from_int(a), &HalfInt::from_int(b), &half(twice_c))
                    .map_err(|e| e.to_string())?;
                if got != PiScalar::rational(want.clone()) {
                    return Err(format!("S_1({a},{b},{}) = {got}, want {want}", half(twice_c)));
                }
            }
        }
    }
    Ok(())
}

pub fn check_pi_scalar_algebra() -> Check {
    let arb = || (arb_rational(), -3i64..=3).prop_map(|(r, k)| PiScalar::new(r, k));
    finish(runner(256).run(&(arb(), arb(), arb()), |(x, y, z)| {
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert!(!(&x * &y).is_zero() || (&x * &y).sqrtpi_pow() == 0);
        Ok(())
    }))
}

pub fn check_canonical_idempotence() -> Check {
    finish(runner(256).run(&arb_expr(), |e| {
        let again = Expr::from_terms(e.terms().iter().cloned());
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), e.to_string());
        Ok(())
    }))
}

/// The same product assembled in a different factor order, with some forms
/// supplied scaled, canonicalizes identically.
pub fn check_representation_independence() -> Check {
    let factors = prop::collection::vec((arb_linear(), -3i64..=3, 1i64..=3), 0..=5);
    finish(runner(256).run(&(arb_nonzero_rational(), factors, any::<u64>()), |(c, fs, seed)| {
        let forward = fs.iter().fold(Expr::constant(c.clone()), |acc, ((k, cs), e, _)| {
            acc.mul(&Expr::linear_power(k, cs, *e).unwrap())
        });
        let mut shuffled = fs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        // (m·L)^e = m^e · L^e: feed the scaled form and divide the scale back out.
        let backward = shuffled.iter().fold(Expr::constant(c), |acc, ((k, cs), e, m)| {
            let m = int(*m);
            let scaled: Vec<_> = cs.iter().map(|(v, x)| (*v, x * &m)).collect();
            let p = Expr::linear_power(&(k * &m), &scaled, *e).unwrap();
            acc.mul(&p.scale(&ctverify::scalar::rat_pow(&m, -*e)))
        });
        prop_assert_eq!(&forward, &backward);
        let by_terms = Expr::from_terms(backward.terms().iter().rev().cloned());
        prop_assert_eq!(forward, by_terms);
        Ok(())
    }))
}

pub fn check_derivative_by_specialization() -> Check {
    finish(runner(200).run(&(arb_expr(), arb_var(), any::<u64>()), |(e, v, seed)| {
        let d = differentiate(&e, v);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vars = e.vars();
        vars.insert(v);
        let mut checked = 0;
        for _ in 0..50 {
            let point = random_point(&mut rng, vars.iter().copied());
            let engine = match eval_at(&d, &point) {
                Ok(x) => x,
                Err(FormError::Pole(_)) => continue,
                Err(other) => return Err(TestCaseError::fail(other.to_string())),
            };
            let Some(oracle) = specialized_derivative(&e, v, &point) else { continue };
            prop_assert_eq!(engine, oracle);
            checked += 1;
            if checked == 3 {
                break;
            }
        }
        Ok(())
    }))
}

pub fn check_ring_axioms() -> Check {
    finish(runner(128).run(&(arb_expr(), arb_expr(), arb_expr()), |(a, b, c)| {
        prop_assert_eq!(expr_mul(&a, &b), expr_mul(&b, &a));
        prop_assert_eq!(expr_mul(&expr_mul(&a, &b), &c), expr_mul(&a, &expr_mul(&b, &c)));
        prop_assert_eq!(expr_mul(&a, &b.add(&c)), expr_mul(&a, &b).add(&expr_mul(&a, &c)));
        prop_assert_eq!(expr_mul(&a, &Expr::one()), a.clone());
        prop_assert!(expr_mul(&a, &Expr::zero()).is_zero());
        Ok(())
    }))
}

pub fn check_substitute_zero_multiplicative() -> Check {
    finish(runner(256).run(&(arb_var(), arb_expr(), arb_expr()), |(v, a, b)| {
        let no_pure = |e: &Expr| Expr::from_terms(e.terms().iter().filter(|t| !t.factors().iter().any(|(f, _)| f.is_pure_var(v))).cloned());
        let (a, b) = (no_pure(&a), no_pure(&b));
        let product = expr_mul(&a, &b);
        // The product may cancel a pure factor into existence only if one
        // side had it, which was filtered out above.
        let lhs = substitute_zero(&product, v).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let rhs = expr_mul(
            &substitute_zero(&a, v).map_err(|e| TestCaseError::fail(e.to_string()))?,
            &substitute_zero(&b, v).map_err(|e| TestCaseError::fail(e.to_string()))?,
        );
        prop_assert_eq!(lhs, rhs);
        Ok(())
    }))
}

pub fn check_ct_linearity() -> Check {
    let strat = (arb_expr(), arb_expr(), arb_rational(), arb_rational(), arb_var());
    finish(runner(128).run(&strat, |(e1, e2, alpha, beta, v)| {
        let combined = e1.scale(&alpha).add(&e2.scale(&beta));
        let lhs = ct_once(&combined, v).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let rhs = ct_once(&e1, v)
            .map_err(|e| TestCaseError::fail(e.to_string()))?
            .scale(&alpha)
            .add(&ct_once(&e2, v).map_err(|e| TestCaseError::fail(e.to_string()))?.scale(&beta));
        prop_assert_eq!(lhs, rhs);
        Ok(())
    }))
}

pub fn check_ct_vanishing() -> Check {
    let strat = arb_var().prop_flat_map(|v| (Just(v), arb_analytic_in(v), 1i64..=4));
    finish(runner(128).run(&strat, |(v, e, k)| {
        let shifted = expr_mul(&ctverify::ct::pure(v, k), &e);
        let got = ct_once(&shifted, v).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(got.is_zero(), "CT_{} of {} = {}", v, shifted, got);
        Ok(())
    }))
}

pub fn check_ct_absent_variable() -> Check {
    finish(runner(128).run(&arb_expr(), |e| {
        let v = VarId(7);
        prop_assert_eq!(ct_once(&e, v).map_err(|e| TestCaseError::fail(e.to_string()))?, e);
        Ok(())
    }))
}

/// Every builder output for n <= 4 survives render -> parse unchanged.
pub fn check_builder_round_trip() -> Check {
    let mut outputs: Vec<(String, Expr)> = Vec::new();
    for n in 1..=4u32 {
        outputs.push((format!("mm n={n}"), build_mm(n).map_err(|e| e.to_string())?.0));
        for a in 1..=3u64 {
            for twice_c in 1..=3 {
                let c = half(twice_c);
                outputs.push((format!("fact n={n} a={a} c={c}"), build_fact(n, a, &c).map_err(|e| e.to_string())?.0));
                for b in 0..=2u64 {
                    outputs.push((
                        format!("morris n={n} a={a} b={b} c={c}"),
                        build_morris(n, a, b, &c).map_err(|e| e.to_string())?.0,
                    ));
                }
            }
        }
    }
    for (name, e) in outputs {
        let text = e.to_string();
        let back = parse_integrand(&text).map_err(|err| format!("{name}: {err} in {text}"))?;
        if back != e {
            return Err(format!("{name}: round trip changed {text} into {back}"));
        }
    }
    Ok(())
}

pub fn check_random_round_trip() -> Check {
    finish(runner(256).run(&arb_expr(), |e| {
        let text = e.to_string();
        let back = parse_integrand(&text).map_err(|err| TestCaseError::fail(format!("{err} in {text}")))?;
        prop_assert_eq!(back, e);
        Ok(())
    }))
}

/// Randomized ct_once vs specialization oracle. Returns the number of
/// expressions checked, each at `points` pole-free points.
pub fn oracle_agreement(cases: u32, points: usize) -> Result<usize, String> {
    let checked = Cell::new(0usize);
    let strat = (arb_expr(), arb_var(), any::<u64>());
    let result = runner(cases).run(&strat, |(e, v, seed)| {
        let after = ct_once(&e, v).map_err(|err| TestCaseError::fail(err.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let others: Vec<VarId> = e.vars().into_iter().filter(|w| *w != v).collect();
        let mut done = 0;
        for _ in 0..500 {
            let point = random_point(&mut rng, others.iter().copied());
            let oracle = match ct_oracle_specialized(&e, v, &point) {
                Ok(x) => x,
                Err(CtError::Form(FormError::Pole(_))) => continue,
                Err(other) => return Err(TestCaseError::fail(other.to_string())),
            };
            let engine = match eval_at(&after, &point) {
                Ok(x) => x,
                Err(FormError::Pole(_)) => continue,
                Err(other) => return Err(TestCaseError::fail(other.to_string())),
            };
            prop_assert_eq!(&engine, &oracle, "CT_{} of {} at {:?}", v, e, point);
            done += 1;
            if done == points {
                break;
            }
        }
        if done < points {
            return Err(TestCaseError::reject("no pole-free points"));
        }
        checked.set(checked.get() + 1);
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(checked.get())
}

// ---------------------------------------------------------------------------
// Report schema

/// Validates one JSON report against the subset of JSON Schema used by
/// `schema/report.schema.json` (type, enum, pattern, minimum, required,
/// additionalProperties).
pub fn validate_report(value: &serde_json::Value) -> Check {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../schema/report.schema.json")).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("report is not an object")?;
    let props = schema["properties"].as_object().ok_or("schema has no properties")?;
    for req in schema["required"].as_array().ok_or("schema has no required list")? {
        let key = req.as_str().unwrap();
        if !obj.contains_key(key) {
            return Err(format!("missing key {key}"));
        }
    }
    for (key, v) in obj {
        let rule = props.get(key).ok_or_else(|| format!("unexpected key {key}"))?;
        let types: Vec<&str> = match &rule["type"] {
            serde_json::Value::String(s) => vec![s.as_str()],
            serde_json::Value::Array(a) => a.iter().filter_map(|t| t.as_str()).collect(),
            _ => vec![],
        };
        let type_ok = types.iter().any(|t| match *t {
            "string" => v.is_string(),
            "null" => v.is_null(),
            "boolean" => v.is_boolean(),
            "integer" => v.is_i64() || v.is_u64(),
            "object" => v.is_object(),
            _ => false,
        });
        if !type_ok {
            return Err(format!("{key}: {v} has the wrong type (want {types:?})"));
        }
        if let Some(allowed) = rule["enum"].as_array() {
            if !allowed.contains(v) {
                return Err(format!("{key}: {v} not in {allowed:?}"));
            }
        }
        if let (Some(pat), Some(s)) = (rule["pattern"].as_str(), v.as_str()) {
            let re = regex::Regex::new(pat).map_err(|e| e.to_string())?;
            if !re.is_match(s) {
                return Err(format!("{key}: {s:?} does not match {pat}"));
            }
        }
        if let (Some(min), Some(x)) = (rule["minimum"].as_i64(), v.as_i64()) {
            if x < min {
                return Err(format!("{key}: {x} below minimum {min}"));
            }
        }
    }
    Ok(())
}
