//! Batch front end shared by the `lp-isoforge` binary and the tests.
//!
//! Exit codes: 0 success, 1 failed check or partial result, 2 usage error,
//! 3 certificate schema error.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rug::{Float, Rational};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::analysis::{
    build_projection, isometry_check, projection_norm_lower_bound, uncomplemented_certificate, Divergence,
    FiniteSpan, NormSearch, PROJECTION_ATOM_CAP,
};
use crate::certificate::ConstructionCertificate;
use crate::error::{Error, Result};
use crate::moments::{convolve, even_moment_of_sum, IndependentSum, SymmetricAtom};
use crate::p4::{build_p4_table, discrepancy_report, table_text};
use crate::scalar::{parse_rational, real_to_string, Precision};
use crate::solver::{construct_pair, default_base_point, ConstructOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Even exponent p = 2k >= 4.
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long = "j-max", default_value_t = 20)]
    pub j_max: u64,
    /// Table size for `p4`, number of generators for `project`.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, env = "LP_ISOFORGE_PRECISION", default_value_t = 256)]
    pub precision: u32,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random coefficient vectors (`verify`) or random starts (`project`).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long = "nu-fraction", default_value = "3/4")]
    pub nu_fraction: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Parser)]
#[command(name = "lp-isoforge", version, about = "Isometric subspace pairs of L_p for even p")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the moment-matching system for j = 1..=j-max and emit a certificate.
    Construct(RunConfig),
    /// Re-check a certificate and run the isometry and series checks.
    Verify {
        certificate: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Table of the explicit p = 4 pair.
    P4(RunConfig),
    /// Even moments of an independent sum, by formula and by enumeration.
    Moments {
        spec: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Projection onto a span of base-point generators and a norm lower bound.
    Project(RunConfig),
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    /// Written to `--out` when given, otherwise to stdout.
    pub primary: String,
    /// Human-readable summary; goes to stdout when `primary` is written to a file.
    pub summary: String,
    pub exit_code: i32,
}

impl RunConfig {
    fn even_p(&self) -> Result<u32> {
        let p = self.p.ok_or_else(|| Error::invalid("p", "--p is required"))?;
        if p < 4 || p % 2 == 1 {
            return Err(Error::invalid("p", format!("{p} is not an even integer >= 4")));
        }
        Ok(p)
    }

    fn precision(&self) -> Result<Precision> {
        Precision::new(self.precision)
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Schema(_) => EXIT_SCHEMA,
        Error::InvalidOrder(_) | Error::InvalidInput { .. } | Error::Parse(_) => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

pub fn cmd_construct(config: &RunConfig) -> Result<CommandOutput> {
    let p = config.even_p()?;
    let mut opts = ConstructOptions::new(p, config.j_max);
    opts.precision = config.precision()?;
    opts.nu_fraction = parse_rational(&config.nu_fraction)?;
    opts.seed = config.seed;
    let cert = construct_pair(&opts)?;
    let violations = cert.validate();
    let mut summary = format!(
        "p = {p}, k = {}, j_max = {}, delta = {}, entries = {}",
        cert.k,
        config.j_max,
        cert.ball.delta,
        cert.entries.len()
    );
    if !cert.failed_j.is_empty() {
        write!(summary, ", failed j = {:?}", cert.failed_j).ok();
    }
    for v in &violations {
        write!(summary, "\nFAIL {v}").ok();
    }
    summary.push('\n');
    let code = if violations.is_empty() { EXIT_OK } else { EXIT_FAIL };
    Ok(CommandOutput { primary: cert.to_json_string()?, summary, exit_code: code })
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported but outside the automated checks.
    Note,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Note => "NOTE",
        }
    }
}

fn check(name: &str, ok: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

/// Runs every certificate check.
pub fn verify_certificate(cert: &ConstructionCertificate, trials: usize, seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    checks.push(check(
        "complete",
        cert.is_complete(),
        if cert.is_complete() {
            format!("{} entries", cert.entries.len())
        } else {
            format!("no solution for j = {:?}", cert.failed_j)
        },
    ));
    let joined = |v: Vec<crate::certificate::Violation>| {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
    };
    let bracket = cert.bracket_violations();
    checks.push(check("nu bracket", bracket.is_empty(), joined(bracket)));
    let ordering = cert.ordering_violations();
    checks.push(check("mass ordering", ordering.is_empty(), joined(ordering)));
    let recomputed = cert.recomputation_violations()?;
    checks.push(check("residuals and jacobians", recomputed.is_empty(), joined(recomputed)));

    if cert.entries.is_empty() {
        checks.push(check("isometry", false, "no entries".into()));
    } else {
        let iso = isometry_check(cert, trials, seed)?;
        checks.push(check(
            "isometry",
            iso.within_bound(),
            format!(
                "{} trials, max relative residual {:.3e}, propagation bound {:.3e}",
                iso.trials,
                iso.max_relative_residual.to_f64(),
                iso.propagation_bound.to_f64()
            ),
        ));
    }

    let up = uncomplemented_certificate(cert)?;
    let offending = up.violations();
    checks.push(check(
        "w_j bounds",
        up.bracket_ok && up.w_bounds_ok,
        if offending.is_empty() { String::new() } else { format!("violated at j = {offending:?}") },
    ));
    checks.push(check(
        "sum nu_j converges",
        up.convergence_certified,
        format!(
            "partial sum {:.6e}, tail bound {:.6e}",
            up.nu_partial_sum.to_f64(),
            up.nu_tail_bound.to_f64()
        ),
    ));
    match &up.divergence {
        Divergence::Certified { comparator_constant, terms, partial_sum, comparator_sum, growth, .. } => {
            checks.push(check(
                "sum w_j^(2p/(p-2)) diverges",
                partial_sum > comparator_sum && comparator_sum > growth,
                format!(
                    "c = {:.6}, N = {terms}: partial sum {partial_sum:.6}, comparator {comparator_sum:.6}, growth {growth:.6}",
                    comparator_constant.to_f64()
                ),
            ));
        }
        Divergence::NotCertified { reason, .. } => checks.push(Check {
            name: "sum w_j^(2p/(p-2)) diverges".into(),
            status: Status::Note,
            detail: reason.clone(),
        }),
    }
    for note in &up.notes {
        checks.push(Check { name: "note".into(), status: Status::Note, detail: note.clone() });
    }
    Ok(checks)
}

fn render_checks(checks: &[Check], format: Format) -> Result<String> {
    Ok(match format {
        Format::Text => {
            let mut out = String::new();
            for c in checks {
                if c.detail.is_empty() {
                    writeln!(out, "{} {}", c.status.label(), c.name).ok();
                } else {
                    writeln!(out, "{} {}: {}", c.status.label(), c.name, c.detail).ok();
                }
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = checks
                .iter()
                .map(|c| json!({"check": c.name, "status": c.status.label(), "detail": c.detail}))
                .collect();
            let mut s = serde_json::to_string_pretty(&json!({ "checks": rows }))?;
            s.push('\n');
            s
        }
    })
}

pub fn cmd_verify(certificate: &str, config: &RunConfig) -> Result<CommandOutput> {
    let cert = ConstructionCertificate::from_json_str(certificate)?;
    let checks = verify_certificate(&cert, config.trials.unwrap_or(100), config.seed.unwrap_or(0))?;
    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    let summary = if failed == 0 {
        "all checks PASS\n".to_string()
    } else {
        format!("{failed} check(s) FAIL\n")
    };
    Ok(CommandOutput {
        primary: render_checks(&checks, config.format)?,
        summary,
        exit_code: if failed == 0 { EXIT_OK } else { EXIT_FAIL },
    })
}

pub fn cmd_p4(config: &RunConfig) -> Result<CommandOutput> {
    let n = config.n.unwrap_or(50);
    let rows = build_p4_table(n, config.precision()?)?;
    let report = discrepancy_report(&rows);
    let primary = match config.format {
        Format::Text => format!("{}\n{}", table_text(&rows), report),
        Format::Json => {
            let value = json!({
                "rows": rows.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
                "report": report,
            });
            let mut s = serde_json::to_string_pretty(&value)?;
            s.push('\n');
            s
        }
    };
    Ok(CommandOutput {
        primary,
        summary: format!("{} rows\n", rows.len()),
        exit_code: EXIT_OK,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentSpec {
    variables: Vec<MomentVariable>,
    orders: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentVariable {
    #[serde(default = "unit_scale")]
    scale: String,
    mass: String,
}

fn unit_scale() -> String {
    "1".to_string()
}

/// `spec` is JSON: `{"variables": [{"scale": "1", "mass": "1/2"}, ...], "orders": [2, 4]}`.
pub fn cmd_moments(spec: &str, config: &RunConfig) -> Result<CommandOutput> {
    let parsed: MomentSpec = serde_json::from_str(spec).map_err(|e| Error::invalid("moment spec", e.to_string()))?;
    let terms = parsed
        .variables
        .iter()
        .map(|v| SymmetricAtom::new(parse_rational(&v.scale)?, parse_rational(&v.mass)?))
        .collect::<Result<Vec<_>>>()?;
    let sum = IndependentSum::new(terms)?;
    let oracle = match convolve(&sum) {
        Ok(d) => Some(d),
        Err(Error::ProductSpaceTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut rows = Vec::new();
    for &order in &parsed.orders {
        let formula = even_moment_of_sum(&sum, order)?;
        let brute = oracle.as_ref().map(|d| d.raw_moment(order));
        rows.push((order, formula, brute));
    }
    let agree = rows.iter().all(|(_, f, b)| b.as_ref().is_none_or(|b| b == f));
    let primary = match config.format {
        Format::Text => {
            let mut out = String::new();
            for (order, f, b) in &rows {
                match b {
                    Some(b) => writeln!(out, "order {order}: formula {f}, oracle {b}").ok(),
                    None => writeln!(out, "order {order}: formula {f}, oracle skipped (product space too large)").ok(),
                };
            }
            out
        }
        Format::Json => {
            let values: Vec<Value> = rows
                .iter()
                .map(|(order, f, b)| {
                    json!({"order": order, "formula": f.to_string(), "oracle": b.as_ref().map(|b| b.to_string())})
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&json!({ "moments": values }))?;
            s.push('\n');
            s
        }
    };
    Ok(CommandOutput {
        primary,
        summary: if agree { "formula and oracle agree\n".into() } else { "formula and oracle DISAGREE\n".into() },
        exit_code: if agree { EXIT_OK } else { EXIT_FAIL },
    })
}

pub fn cmd_project(config: &RunConfig) -> Result<CommandOutput> {
    let p = config.even_p()?;
    let n = config.n.unwrap_or(2);
    if n == 0 {
        return Err(Error::invalid("n", "at least one generator"));
    }
    let mu = default_base_point(p / 2)?;
    let gens = (0..n)
        .map(|_| IndependentSum::unit_sum(mu.values()))
        .collect::<Result<Vec<_>>>()?;
    let span = FiniteSpan::new(p, gens)?;
    let op = build_projection(&span, PROJECTION_ATOM_CAP)?;
    let search = NormSearch {
        random_starts: config.trials.unwrap_or(16),
        seed: config.seed.unwrap_or(0),
        ..NormSearch::default()
    };
    let bound = projection_norm_lower_bound(&op, p, &search)?;
    let fixed = (0..op.rank()).all(|i| op.apply(op.generator(i)).map(|v| v == op.generator(i)).unwrap_or(false));
    let ones = vec![Rational::from(1); op.atoms()];
    let kills_constants = op.apply(&ones)?.iter().all(|x| x.cmp0().is_eq());
    let primary = match config.format {
        Format::Text => format!(
            "generators: {n} (masses {:?})\natoms: {}\nfixes generators: {fixed}\nannihilates constants: {kills_constants}\n\
             ||P||_{p} >= {:.12}\n",
            mu.values().iter().map(|m| m.to_string()).collect::<Vec<_>>(),
            op.atoms(),
            bound.to_f64()
        ),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json!({
                "p": p,
                "generators": n,
                "atoms": op.atoms(),
                "fixes_generators": fixed,
                "annihilates_constants": kills_constants,
                "norm_lower_bound": real_to_string(&bound),
                "seed": search.seed,
                "random_starts": search.random_starts,
            }))?;
            s.push('\n');
            s
        }
    };
    let ok = fixed && kills_constants && bound >= Float::with_val(bound.prec(), 1);
    Ok(CommandOutput {
        primary,
        summary: format!("norm lower bound {:.6}\n", bound.to_f64()),
        exit_code: if ok { EXIT_OK } else { EXIT_FAIL },
    })
}

fn read_input(path: &PathBuf) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

/// Dispatches a parsed command.
pub fn execute(command: &Command) -> Result<(CommandOutput, Option<PathBuf>)> {
    Ok(match command {
        Command::Construct(c) => (cmd_construct(c)?, c.out.clone()),
        Command::Verify { certificate, config } => (cmd_verify(&read_input(certificate)?, config)?, config.out.clone()),
        Command::P4(c) => (cmd_p4(c)?, c.out.clone()),
        Command::Moments { spec, config } => (cmd_moments(&read_input(spec)?, config)?, config.out.clone()),
        Command::Project(c) => (cmd_project(c)?, c.out.clone()),
    })
}

/// Parses `args`, runs the command, writes its output and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            e.print().ok();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok((output, out_path)) => {
            match out_path {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &output.primary) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return EXIT_FAIL;
                    }
                    print!("{}", output.summary);
                }
                None => {
                    print!("{}", output.primary);
                    eprint!("{}", output.summary);
                }
            }
            output.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
