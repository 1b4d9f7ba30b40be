//! LHS-vs-RHS comparisons over parameter grids.
//!
//! Both a signed and an absolute comparison are recorded for every point;
//! the ratio of the two sides' signs is reported as measured.

use std::time::Instant;

use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ct::{self, CtError, CtOrder};
use crate::linform::Expr;
use crate::scalar::{self, fmt_rational, HalfInt, PiScalar, Rational, ScalarError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("{family} {params}: {source}")]
    Ct { family: Family, params: String, source: CtError },
    #[error("{family} {params}: {source}")]
    Scalar { family: Family, params: String, source: ScalarError },
    #[error("{family}: missing or invalid parameter: {message}")]
    Params { family: Family, message: String },
}

impl VerifyError {
    /// Whether the failure is a mathematical domain error (as opposed to a
    /// malformed request).
    pub fn is_domain(&self) -> bool {
        !matches!(self, VerifyError::Params { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Mm,
    Fact,
    Morris,
    Custom,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Mm => "mm",
            Family::Fact => "fact",
            Family::Morris => "morris",
            Family::Custom => "custom",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mm" => Ok(Family::Mm),
            "fact" => Ok(Family::Fact),
            "morris" => Ok(Family::Morris),
            "custom" => Ok(Family::Custom),
            other => Err(format!("unknown family {other:?} (expected mm, fact, morris or custom)")),
        }
    }
}

/// A user-supplied integrand with its elimination order and an optional
/// expected value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CustomIntegrand {
    pub expr: Expr,
    pub order: CtOrder,
    pub expected: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilySpec {
    pub family: Family,
    pub n: u32,
    pub a: Option<HalfInt>,
    pub b: Option<HalfInt>,
    pub c: Option<HalfInt>,
    pub custom: Option<CustomIntegrand>,
}

impl FamilySpec {
    pub fn mm(n: u32) -> Self {
        FamilySpec { family: Family::Mm, n, a: None, b: None, c: None, custom: None }
    }

    pub fn fact(n: u32, a: HalfInt, c: HalfInt) -> Self {
        FamilySpec { family: Family::Fact, n, a: Some(a), b: None, c: Some(c), custom: None }
    }

    pub fn morris(n: u32, a: HalfInt, b: HalfInt, c: HalfInt) -> Self {
        FamilySpec { family: Family::Morris, n, a: Some(a), b: Some(b), c: Some(c), custom: None }
    }

    pub fn custom(integrand: CustomIntegrand) -> Self {
        let n = integrand.order.vars().len() as u32;
        FamilySpec { family: Family::Custom, n, a: None, b: None, c: None, custom: Some(integrand) }
    }

    fn params(&self) -> String {
        let mut s = format!("n={}", self.n);
        for (name, v) in [("a", &self.a), ("b", &self.b), ("c", &self.c)] {
            if let Some(v) = v {
                s.push_str(&format!(" {name}={v}"));
            }
        }
        s
    }

    fn spec_err(&self, message: impl Into<String>) -> VerifyError {
        VerifyError::Params { family: self.family, message: message.into() }
    }

    fn ct_err(&self, source: CtError) -> VerifyError {
        VerifyError::Ct { family: self.family, params: self.params(), source }
    }

    fn scalar_err(&self, source: ScalarError) -> VerifyError {
        VerifyError::Scalar { family: self.family, params: self.params(), source }
    }

    fn require(&self, name: &str, v: &Option<HalfInt>) -> Result<HalfInt, VerifyError> {
        v.clone().ok_or_else(|| self.spec_err(format!("--{name} is required")))
    }

    fn require_nonneg_int(&self, name: &str, v: &Option<HalfInt>) -> Result<u64, VerifyError> {
        let h = self.require(name, v)?;
        h.to_integer()
            .and_then(|i| i.to_u64())
            .ok_or_else(|| self.scalar_err(ScalarError::Precondition(format!(
                "{name} must be a nonnegative integer, got {h}"
            ))))
    }

    /// Builds the integrand and the closed-form right-hand side.
    fn sides(&self) -> Result<(Expr, CtOrder, Option<PiScalar>), VerifyError> {
        if self.n == 0 && self.family != Family::Custom {
            return Err(self.spec_err("n must be positive"));
        }
        match self.family {
            Family::Mm => {
                let rhs = PiScalar::integer(scalar::mm_rhs(self.n));
                let (e, order) = ct::build_mm(self.n).map_err(|e| self.ct_err(e))?;
                Ok((e, order, Some(rhs)))
            }
            Family::Fact => {
                let a = self.require_nonneg_int("a", &self.a)?;
                let c = self.require("c", &self.c)?;
                let rhs = scalar::fact_rhs(self.n, a, &c).map_err(|e| self.scalar_err(e))?;
                let (e, order) = ct::build_fact(self.n, a, &c).map_err(|e| self.ct_err(e))?;
                Ok((e, order, Some(rhs)))
            }
            Family::Morris => {
                let (a, b, c) = (
                    self.require("a", &self.a)?,
                    self.require("b", &self.b)?,
                    self.require("c", &self.c)?,
                );
                // RHS first so Gamma-domain problems are reported as such.
                let rhs = scalar::selberg_morris(self.n, &a, &b, &c).map_err(|e| self.scalar_err(e))?;
                let a = self.require_nonneg_int("a", &self.a)?;
                let b = self.require_nonneg_int("b", &self.b)?;
                let (e, order) = ct::build_morris(self.n, a, b, &c).map_err(|e| self.ct_err(e))?;
                Ok((e, order, Some(rhs)))
            }
            Family::Custom => {
                let custom = self
                    .custom
                    .as_ref()
                    .ok_or_else(|| self.spec_err("custom family needs an expression and order"))?;
                let rhs = custom.expected.clone().map(PiScalar::rational);
                Ok((custom.expr.clone(), custom.order.clone(), rhs))
            }
        }
    }
}

/// Execution options for [`verify`] and [`sweep`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Random points per CT step checked against the specialization oracle;
    /// 0 disables the cross-check.
    pub oracle_points: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { oracle_points: 0, seed: 0x5eed }
    }
}

/// One verification record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub spec: FamilySpec,
    pub lhs: Option<PiScalar>,
    pub rhs: Option<PiScalar>,
    pub equal: Option<bool>,
    pub abs_equal: Option<bool>,
    /// `lhs / rhs` when `|lhs| = |rhs| != 0`.
    pub sign_ratio: Option<i32>,
    pub elapsed_ms: u64,
    pub peak_terms: usize,
    pub error: Option<VerifyError>,
}

impl Report {
    /// A comparison was made and failed.
    pub fn is_mismatch(&self) -> bool {
        self.equal == Some(false)
    }

    fn failed(spec: FamilySpec, error: VerifyError, elapsed_ms: u64) -> Report {
        Report {
            spec,
            lhs: None,
            rhs: None,
            equal: None,
            abs_equal: None,
            sign_ratio: None,
            elapsed_ms,
            peak_terms: 0,
            error: Some(error),
        }
    }

    pub fn row(&self) -> ReportRow {
        let opt = |v: &Option<HalfInt>| v.as_ref().map(|h| fmt_rational(&h.to_rational()));
        ReportRow {
            family: self.spec.family.to_string(),
            n: self.spec.n,
            a: opt(&self.spec.a),
            b: opt(&self.spec.b),
            c: opt(&self.spec.c),
            lhs: self.lhs.as_ref().map(|s| s.to_string()),
            rhs: self.rhs.as_ref().map(|s| s.to_string()),
            equal: self.equal,
            abs_equal: self.abs_equal,
            sign_ratio: self.sign_ratio,
            elapsed_ms: self.elapsed_ms,
            peak_terms: self.peak_terms,
            error: self.error.as_ref().map(|e| e.to_string()),
        }
    }

    /// One-line `key=value` rendering.
    pub fn to_text(&self) -> String {
        let r = self.row();
        let mut parts = vec![format!("family={}", r.family), format!("n={}", r.n)];
        for (k, v) in [("a", &r.a), ("b", &r.b), ("c", &r.c)] {
            if let Some(v) = v {
                parts.push(format!("{k}={v}"));
            }
        }
        let show = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        parts.push(format!("lhs={}", show(r.lhs)));
        parts.push(format!("rhs={}", show(r.rhs)));
        parts.push(format!("equal={}", show(r.equal.map(|b| b.to_string()))));
        parts.push(format!("abs_equal={}", show(r.abs_equal.map(|b| b.to_string()))));
        parts.push(format!("sign_ratio={}", show(r.sign_ratio.map(|s| s.to_string()))));
        parts.push(format!("peak_terms={}", r.peak_terms));
        parts.push(format!("elapsed_ms={}", r.elapsed_ms));
        if let Some(e) = r.error {
            parts.push(format!("error={e:?}"));
        }
        parts.join(" ")
    }
}

/// Flat serialized report. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: String,
    pub n: u32,
    pub a: Option<String>,
    pub b: Option<String>,
    pub c: Option<String>,
    pub lhs: Option<String>,
    pub rhs: Option<String>,
    pub equal: Option<bool>,
    pub abs_equal: Option<bool>,
    pub sign_ratio: Option<i32>,
    pub elapsed_ms: u64,
    pub peak_terms: usize,
    pub error: Option<String>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "family", "n", "a", "b", "c", "lhs", "rhs", "equal", "abs_equal", "sign_ratio", "elapsed_ms",
    "peak_terms", "error",
];

pub fn compare(lhs: &PiScalar, rhs: &PiScalar) -> (bool, bool, Option<i32>) {
    let equal = lhs == rhs;
    let abs_equal = lhs.abs() == rhs.abs();
    let sign = (abs_equal && !lhs.is_zero()).then(|| lhs.signum() * rhs.signum());
    (equal, abs_equal, sign)
}

/// Computes both sides for one parameter point.
pub fn verify(spec: &FamilySpec, opts: &VerifyOptions) -> Report {
    let start = Instant::now();
    let elapsed = |start: Instant| start.elapsed().as_millis().to_u64().unwrap_or(u64::MAX);
    let (expr, order, rhs) = match spec.sides() {
        Ok(s) => s,
        Err(e) => return Report::failed(spec.clone(), e, elapsed(start)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let outcome = ct::ct_iterated_with(&expr, &order, |before, v, after| {
        if opts.oracle_points > 0 {
            ct::oracle_check(before, v, after, opts.oracle_points, &mut rng)
        } else {
            Ok(())
        }
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => return Report::failed(spec.clone(), spec.ct_err(e), elapsed(start)),
    };
    let (equal, abs_equal, sign_ratio) = match &rhs {
        Some(rhs) => {
            let (eq, abs_eq, sign) = compare(&outcome.value, rhs);
            (Some(eq), Some(abs_eq), sign)
        }
        None => (None, None, None),
    };
    Report {
        spec: spec.clone(),
        peak_terms: outcome.peak_terms(),
        lhs: Some(outcome.value),
        rhs,
        equal,
        abs_equal,
        sign_ratio,
        elapsed_ms: elapsed(start),
        error: None,
    }
}

/// Parameter ranges for a sweep; only the lists relevant to the family are
/// used.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SweepGrid {
    pub n: Vec<u32>,
    pub a: Vec<HalfInt>,
    pub b: Vec<HalfInt>,
    pub c: Vec<HalfInt>,
}

impl SweepGrid {
    /// Grid points in `n`, `a`, `b`, `c` nesting order.
    pub fn points(&self, family: Family) -> Vec<FamilySpec> {
        let mut out = Vec::new();
        for &n in &self.n {
            match family {
                Family::Mm => out.push(FamilySpec::mm(n)),
                Family::Fact => {
                    for a in &self.a {
                        for c in &self.c {
                            out.push(FamilySpec::fact(n, a.clone(), c.clone()));
                        }
                    }
                }
                Family::Morris => {
                    for a in &self.a {
                        for b in &self.b {
                            for c in &self.c {
                                out.push(FamilySpec::morris(n, a.clone(), b.clone(), c.clone()));
                            }
                        }
                    }
                }
                Family::Custom => {}
            }
        }
        out
    }
}

/// Verifies every grid point with up to `threads` workers; reports come back
/// in grid order. Per-point failures are recorded in the report.
pub fn sweep(family: Family, grid: &SweepGrid, threads: usize, opts: &VerifyOptions) -> Vec<Report> {
    let points = grid.points(family);
    let run = || {
        use rayon::prelude::*;
        points.par_iter().map(|p| verify(p, opts)).collect::<Vec<_>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => points.iter().map(|p| verify(p, opts)).collect(),
    }
}

/// Candidate sign `(-1)^(n + n(n-1)c)` for the fact family.
/// `n(n-1)` is even, so the exponent is an integer for half-integer `c`.
pub fn candidate_sign(n: u32, c: &HalfInt) -> i32 {
    let n = num_bigint::BigInt::from(n);
    let exp = &n + (&n * (&n - 1u32) / 2u32) * c.twice();
    if exp.is_odd() {
        -1
    } else {
        1
    }
}

/// Fixed-width table of measured sign ratios next to `(-1)^(n+n(n-1)c)`.
pub fn sign_table(reports: &[Report]) -> String {
    let mut out = String::from("family  n  a    c    lhs/rhs sign  (-1)^(n+n(n-1)c)  abs_equal\n");
    for r in reports {
        let show = |v: &Option<HalfInt>| v.as_ref().map_or("-".to_string(), |h| h.to_string());
        let sign = r.sign_ratio.map_or("undef".to_string(), |s| format!("{s:+}"));
        let candidate = r
            .spec
            .c
            .as_ref()
            .map_or("-".to_string(), |c| format!("{:+}", candidate_sign(r.spec.n, c)));
        let abs_eq = r.abs_equal.map_or("-".to_string(), |b| b.to_string());
        out.push_str(&format!(
            "{:<7} {:<2} {:<4} {:<4} {:<13} {:<17} {}\n",
            r.spec.family.to_string(),
            r.spec.n,
            show(&r.spec.a),
            show(&r.spec.c),
            sign,
            candidate,
            abs_eq
        ));
    }
    out
}

pub fn to_json_line(report: &Report) -> String {
    serde_json::to_string(&report.row()).expect("report rows always serialize")
}

/// CSV with a header row; columns as in [`CSV_COLUMNS`].
pub fn to_csv(reports: &[Report]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(r.row())?;
    }
    if reports.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
