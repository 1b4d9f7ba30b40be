//! Command-line front end.
//!
//! Exit codes: 0 every comparison held, 1 some comparison failed, 2 usage or
//! parse error, 3 domain error.

pub mod parser;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ct;
use crate::scalar::{self, parse_rational, HalfInt};
use crate::verify::{self, CustomIntegrand, Family, FamilySpec, Report, SweepGrid, VerifyOptions};

pub use parser::{parse_integrand, parse_order, ParseError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ctverify", version, about = "Exact iterated constant terms and identity verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare both sides of an identity at the given parameters.
    Verify(Opts),
    /// Verify every point of a parameter grid.
    Sweep(Opts),
    /// Print the iterated constant term of a custom integrand.
    Ct(Opts),
    /// Print S_n(a,b,c).
    Selberg(Opts),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Mm,
    Fact,
    Morris,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Mm => Family::Mm,
            FamilyArg::Fact => Family::Fact,
            FamilyArg::Morris => Family::Morris,
        }
    }
}

#[derive(Args, Debug)]
struct Opts {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// INT, A..B or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// p/q; half-integers only.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    /// Integrand, e.g. "x1^-1 * (1-x1)^-2".
    #[arg(long, allow_hyphen_values = true)]
    expr: Option<String>,
    /// Elimination order, innermost first, e.g. x1,x2.
    #[arg(long)]
    order: Option<String>,
    /// Expected value for a custom integrand.
    #[arg(long, allow_hyphen_values = true)]
    rhs: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Cross-check every CT step against the specialization oracle.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 3)]
    oracle_points: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

fn parse_u32_list(flag: &str, text: &str) -> Result<Vec<u32>, Usage> {
    let bad = || Usage(format!("--{flag}: expected INT, A..B or a comma list, got {text:?}"));
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

fn parse_half_list(flag: &str, text: &str) -> Result<Vec<HalfInt>, Usage> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once("..") {
            let parse = |s: &str| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|_| Usage(format!("--{flag}: ranges take integers, got {part:?}")))
            };
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                return Err(Usage(format!("--{flag}: empty range {part:?}")));
            }
            out.extend((lo..=hi).map(HalfInt::from_int));
        } else {
            out.push(part.parse::<HalfInt>().map_err(|e| Usage(format!("--{flag}: {e}")))?);
        }
    }
    Ok(out)
}

fn single_half(flag: &str, text: &Option<String>) -> Result<Option<HalfInt>, Usage> {
    match text {
        None => Ok(None),
        Some(t) => match parse_half_list(flag, t)?.as_slice() {
            [one] => Ok(Some(one.clone())),
            _ => Err(Usage(format!("--{flag} takes a single value here; use `sweep` for grids"))),
        },
    }
}

fn options(opts: &Opts) -> VerifyOptions {
    VerifyOptions { oracle_points: if opts.oracle { opts.oracle_points.max(1) } else { 0 }, seed: opts.seed }
}

fn custom_integrand(opts: &Opts) -> Result<CustomIntegrand, Usage> {
    let text = opts.expr.as_deref().ok_or_else(|| Usage("--expr is required".into()))?;
    let order_text = opts
        .order
        .as_deref()
        .ok_or_else(|| Usage("--order is required with --expr (CT order changes the answer)".into()))?;
    let expr = parse_integrand(text).map_err(|e| Usage(format!("--expr: {e}")))?;
    let order = parse_order(order_text).map_err(|e| Usage(format!("--order: {e}")))?;
    let in_text = expr.vars();
    let in_order: std::collections::BTreeSet<_> = order.vars().iter().copied().collect();
    if in_text != in_order {
        return Err(Usage(format!(
            "--order must list exactly the variables of --expr ({})",
            in_text.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        )));
    }
    let expected = match &opts.rhs {
        Some(r) => Some(parse_rational(r).map_err(|e| Usage(format!("--rhs: {e}")))?),
        None => None,
    };
    Ok(CustomIntegrand { expr, order, expected })
}

fn require<'a>(flag: &str, v: &'a Option<String>) -> Result<&'a str, Usage> {
    v.as_deref().ok_or_else(|| Usage(format!("--{flag} is required")))
}

/// Parameter points for `verify`/`sweep`.
fn grid_specs(opts: &Opts, allow_grid: bool) -> Result<Vec<FamilySpec>, Usage> {
    if opts.expr.is_some() {
        if opts.family.is_some() {
            return Err(Usage("--expr and --family are mutually exclusive".into()));
        }
        return Ok(vec![FamilySpec::custom(custom_integrand(opts)?)]);
    }
    let family: Family = opts
        .family
        .ok_or_else(|| Usage("--family (mm|fact|morris) or --expr is required".into()))?
        .into();
    let n = parse_u32_list("n", require("n", &opts.n)?)?;
    if n.contains(&0) {
        return Err(Usage("--n must be positive".into()));
    }
    let needs: &[&str] = match family {
        Family::Mm => &[],
        Family::Fact => &["a", "c"],
        Family::Morris => &["a", "b", "c"],
        Family::Custom => unreachable!("custom comes from --expr"),
    };
    let value = |flag: &str| match flag {
        "a" => &opts.a,
        "b" => &opts.b,
        _ => &opts.c,
    };
    for flag in needs {
        require(flag, value(flag))?;
    }
    let list = |flag: &str| -> Result<Vec<HalfInt>, Usage> {
        if !needs.contains(&flag) {
            return Ok(Vec::new());
        }
        let text = require(flag, value(flag))?;
        if allow_grid {
            parse_half_list(flag, text)
        } else {
            Ok(single_half(flag, &Some(text.to_string()))?.into_iter().collect())
        }
    };
    let grid = SweepGrid { n, a: list("a")?, b: list("b")?, c: list("c")? };
    Ok(grid.points(family))
}

fn exit_code(reports: &[Report]) -> i32 {
    if reports.iter().any(|r| r.is_mismatch()) {
        EXIT_MISMATCH
    } else if reports.iter().any(|r| r.error.as_ref().is_some_and(|e| e.is_domain())) {
        EXIT_DOMAIN
    } else if reports.iter().any(|r| r.error.is_some()) {
        EXIT_USAGE
    } else {
        EXIT_OK
    }
}

fn render_reports(reports: &[Report], format: Format, sign_table: bool) -> Result<String, Usage> {
    Ok(match format {
        Format::Text => {
            let mut s: String = reports.iter().map(|r| r.to_text() + "\n").collect();
            if sign_table {
                s.push('\n');
                s.push_str(&verify::sign_table(reports));
            }
            s
        }
        Format::Json => reports.iter().map(|r| verify::to_json_line(r) + "\n").collect(),
        Format::Csv => verify::to_csv(reports)?,
    })
}

fn render_value(value: &str, format: Format) -> String {
    match format {
        Format::Json => format!("{}\n", serde_json::json!({ "value": value })),
        Format::Csv => format!("value\n{value}\n"),
        Format::Text => format!("{value}\n"),
    }
}

/// Executes one command; returns the exit code and the text to emit.
fn execute(command: &Command) -> Result<(i32, String), Usage> {
    match command {
        Command::Verify(opts) | Command::Sweep(opts) => {
            let is_sweep = matches!(command, Command::Sweep(_));
            let specs = grid_specs(opts, is_sweep)?;
            let vopts = options(opts);
            let reports: Vec<Report> = if is_sweep {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.threads.max(1)).build()?;
                pool.install(|| {
                    use rayon::prelude::*;
                    specs.par_iter().map(|s| verify::verify(s, &vopts)).collect()
                })
            } else {
                specs.iter().map(|s| verify::verify(s, &vopts)).collect()
            };
            let table = is_sweep && reports.iter().any(|r| r.spec.family == Family::Fact);
            Ok((exit_code(&reports), render_reports(&reports, opts.format, table)?))
        }
        Command::Ct(opts) => {
            let custom = custom_integrand(opts)?;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let points = options(opts).oracle_points;
            let outcome = ct::ct_iterated_with(&custom.expr, &custom.order, |before, v, after| {
                if points > 0 {
                    ct::oracle_check(before, v, after, points, &mut rng)
                } else {
                    Ok(())
                }
            });
            match outcome {
                Ok(o) => Ok((EXIT_OK, render_value(&o.value.to_string(), opts.format))),
                Err(e) => Ok((EXIT_DOMAIN, format!("error: {e}\n"))),
            }
        }
        Command::Selberg(opts) => {
            let n = require("n", &opts.n)?
                .trim()
                .parse::<u32>()
                .map_err(|_| Usage("--n must be a positive integer".into()))?;
            let get = |flag: &str, v: &Option<String>| -> Result<HalfInt, Usage> {
                single_half(flag, v)?.ok_or_else(|| Usage(format!("--{flag} is required")))
            };
            let (a, b, c) = (get("a", &opts.a)?, get("b", &opts.b)?, get("c", &opts.c)?);
            match scalar::selberg_morris(n, &a, &b, &c) {
                Ok(s) => Ok((EXIT_OK, render_value(&s.to_string(), opts.format))),
                Err(e) => Ok((EXIT_DOMAIN, format!("error: {e}\n"))),
            }
        }
    }
}

fn out_path(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Verify(o) | Command::Sweep(o) | Command::Ct(o) | Command::Selberg(o) => o.out.as_ref(),
    }
}

/// Runs the CLI against explicit output streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let (code, text) = match execute(&cli.command) {
        Ok(r) => r,
        Err(Usage(msg)) => {
            let _ = writeln!(stderr, "usage error: {msg}");
            return EXIT_USAGE;
        }
    };
    if code == EXIT_DOMAIN && text.starts_with("error: ") {
        let _ = write!(stderr, "{text}");
        return code;
    }
    let written = match out_path(&cli.command) {
        Some(path) => File::create(path).and_then(|mut f| f.write_all(text.as_bytes())),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "cannot write output: {e}");
        return EXIT_USAGE;
    }
    code
}

/// Runs the CLI on the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}
