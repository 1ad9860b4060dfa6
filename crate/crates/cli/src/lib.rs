//! Command-line surface of the solver.
//!
//! Every subcommand prints one JSON document on standard output and a short
//! human-readable summary on standard error, and maps its result to an exit
//! status:
//!
//! | code | meaning                                             |
//! |------|-----------------------------------------------------|
//! | 0    | success / verified                                  |
//! | 1    | verified negative (insoluble, or verification fails) |
//! | 2    | unresolved                                          |
//! | 3    | invalid input                                       |
//! | 4    | search budget exceeded                              |

use clap::{Parser, Subcommand, ValueEnum};
use padic_diaglin::driver::{budget_from_env, verify_counterexample, BUDGET_REASON};
use padic_diaglin::normalize::normalize;
use padic_diaglin::{
    find_nonsingular, gamma_star_bruteforce, solve, stats, verify, Certificate, CertificateKind, CongruenceQuery,
    DiagLinSystem, EngineChoice, Error, PadicContext, SolveInput, SolveOptions,
};
use serde::Serialize;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Success or a positive verification.
pub const EXIT_OK: i32 = 0;
/// A verified negative answer: insolubility, or a certificate that fails.
pub const EXIT_NEGATIVE: i32 = 1;
/// No claim could be made.
pub const EXIT_UNRESOLVED: i32 = 2;
/// Malformed or unsupported input.
pub const EXIT_INVALID: i32 = 3;
/// A search budget ran out.
pub const EXIT_BUDGET: i32 = 4;

/// Top-level arguments.
#[derive(Debug, Parser)]
#[command(
    name = "padic-diaglin",
    version,
    about = "Exact p-adic solubility of a diagonal form paired with a linear form"
)]
pub struct Cli {
    /// The request to run.
    #[command(subcommand)]
    pub command: Command,
}

/// Engine selection on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    /// Follow the dispatcher.
    Auto,
    /// The contraction pipeline.
    Contract,
    /// The `k = p − 1` engine.
    Pm1,
    /// The `k = p(p − 1)` engine.
    Ppm1,
    /// The `p = 2` engine.
    Pow2,
}

impl From<EngineArg> for EngineChoice {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Auto => EngineChoice::Auto,
            EngineArg::Contract => EngineChoice::Contract,
            EngineArg::Pm1 => EngineChoice::Pm1,
            EngineArg::Ppm1 => EngineChoice::Ppm1,
            EngineArg::Pow2 => EngineChoice::Pow2,
        }
    }
}

/// Subcommands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a system and print its certificate.
    Solve {
        /// Input JSON: `{"k": 4, "p": "5", "a": ["1", …], "b": ["1", …]}`.
        input: PathBuf,
        /// Precision `M` of the lifted demonstration (0 skips it).
        #[arg(long, default_value_t = 10)]
        precision: u32,
        /// Search budget (defaults to `PADIC_WITNESS_BUDGET` or the built-in value).
        #[arg(long)]
        budget: Option<u64>,
        /// Engine override.
        #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
        engine: EngineArg,
    },
    /// Re-check a certificate against the original input.
    Verify {
        /// Certificate JSON as printed by `solve`.
        cert: PathBuf,
        /// The input JSON the certificate claims to answer.
        input: PathBuf,
    },
    /// Print the normalized (preconditioned and conditioned) system.
    Normalize {
        /// Input JSON.
        input: PathBuf,
    },
    /// Search the congruence pair for a non-singular solution.
    Oracle {
        /// Input JSON.
        input: PathBuf,
        /// Exponent `g` of the degree-`k` congruence (defaults to the witness exponent).
        #[arg(long)]
        modulus_exp: Option<u32>,
        /// State budget.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Compute γ*(k, p^l) by exhaustive enumeration.
    GammaStar {
        /// Degree.
        k: u32,
        /// Prime.
        p: u64,
        /// Exponent of the modulus.
        l: u32,
        /// Enumeration budget.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Build and check the insolubility proof of the `k = p − 1` counterexample.
    Counterexample {
        /// An odd prime `p ≥ 5`.
        p: u64,
    },
}

/// The result of one request before it is printed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Exit status.
    pub code: i32,
    /// Document for standard output.
    pub json: Value,
    /// Line for standard error.
    pub summary: String,
}

impl Outcome {
    fn new(code: i32, json: Value, summary: impl Into<String>) -> Self {
        Outcome { code, json, summary: summary.into() }
    }

    fn invalid(msg: impl Into<String>) -> Self {
        let msg = msg.into();
        Outcome::new(EXIT_INVALID, json!({ "error": "invalid_input", "message": msg }), format!("invalid input: {msg}"))
    }

    fn from_error(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::ContextNotApplicable
            | Error::NotApplicable(_)
            | Error::PreconditionViolated(_) => Outcome::invalid(e.to_string()),
            Error::BudgetExceeded(_) => Outcome::new(
                EXIT_BUDGET,
                json!({ "error": "budget_exceeded", "message": e.to_string() }),
                e.to_string(),
            ),
            _ => {
                Outcome::new(EXIT_UNRESOLVED, json!({ "error": "unresolved", "message": e.to_string() }), e.to_string())
            }
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Outcome> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Outcome::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Outcome::invalid(format!("cannot parse {}: {e}", path.display())))
}

fn read_input(path: &Path) -> std::result::Result<(DiagLinSystem, PadicContext), Outcome> {
    let input: SolveInput = read_json(path)?;
    input.into_parts().map_err(|e| Outcome::from_error(&e))
}

fn run_solve(input: &Path, precision: u32, budget: Option<u64>, engine: EngineArg) -> Outcome {
    let (sys, ctx) = match read_input(input) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let opts = SolveOptions {
        precision,
        budget: budget.unwrap_or_else(budget_from_env),
        engine: engine.into(),
        ..SolveOptions::default()
    };
    let cert = match solve(&sys, &ctx, &opts) {
        Ok(c) => c,
        Err(e) => return Outcome::from_error(&e),
    };
    let route = cert.route.join(" > ");
    let (code, what) = match cert.kind {
        CertificateKind::ExactRational | CertificateKind::HenselWitness | CertificateKind::NewtonWitness => {
            (EXIT_OK, "soluble")
        }
        CertificateKind::InsolubilityDescent => (EXIT_NEGATIVE, "insoluble"),
        CertificateKind::Unresolved => {
            let budget_hit = matches!(&cert.payload, padic_diaglin::Payload::Unresolved { reason } if reason.starts_with(BUDGET_REASON));
            if budget_hit {
                (EXIT_BUDGET, "unresolved (budget exceeded)")
            } else {
                (EXIT_UNRESOLVED, "unresolved")
            }
        }
    };
    let mut summary = format!("{what}: {:?} via {route}", cert.kind);
    if let Some(d) = &cert.precision_demo {
        summary.push_str(&format!(
            "; lifted to M = {} with v_p(A) = {}, v_p(B) = {}",
            d.precision, d.residual_a, d.residual_b
        ));
    }
    Outcome::new(code, to_value(&cert), summary)
}

fn run_verify(cert_path: &Path, input: &Path) -> Outcome {
    let cert: Certificate = match read_json(cert_path) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let (sys, ctx) = match read_input(input) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let report = if cert.p != ctx.p || cert.k != ctx.k {
        padic_diaglin::VerifyReport {
            ok: false,
            failure: Some(format!(
                "context mismatch: certificate is for (p, k) = ({}, {}), input is ({}, {})",
                cert.p, cert.k, ctx.p, ctx.k
            )),
            residual_a: None,
            residual_b: None,
        }
    } else {
        verify(&cert, &sys)
    };
    let summary = match &report.failure {
        None => format!("verified {:?} certificate", cert.kind),
        Some(f) => format!("verification failed: {f}"),
    };
    let code = if report.ok { EXIT_OK } else { EXIT_NEGATIVE };
    Outcome::new(code, to_value(&report), summary)
}

fn run_normalize(input: &Path) -> Outcome {
    let (sys, ctx) = match read_input(input) {
        Ok(v) => v,
        Err(o) => return o,
    };
    match normalize(&sys, &ctx) {
        Ok((report, perturbation)) => {
            let derived = report.transcript.derived.clone();
            let st = stats(&derived, &ctx);
            let summary = format!(
                "conditioned: s = {}, block counts {:?}, shift {}",
                derived.s(),
                report.upsilon_after,
                report.shift
            );
            Outcome::new(
                EXIT_OK,
                json!({
                    "system": to_value(&derived),
                    "stats": to_value(&st),
                    "conditioning": to_value(&report),
                    "perturbation": to_value(&perturbation),
                }),
                summary,
            )
        }
        Err(e) => Outcome::from_error(&e),
    }
}

fn run_oracle(input: &Path, modulus_exp: Option<u32>, budget: Option<u64>) -> Outcome {
    let (sys, ctx) = match read_input(input) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let mut q = CongruenceQuery::new(sys, ctx);
    if let Some(g) = modulus_exp {
        q.modulus_exponent = g;
    }
    q.budget = budget.unwrap_or_else(budget_from_env);
    match find_nonsingular(&q) {
        Ok(r) => {
            let (code, summary) = if r.found {
                (EXIT_OK, format!("non-singular solution found after {} states", r.states))
            } else if r.exhausted {
                (EXIT_NEGATIVE, format!("no non-singular solution ({} states, exhaustive)", r.states))
            } else {
                (EXIT_BUDGET, format!("search stopped after {} states without a verdict", r.states))
            };
            Outcome::new(code, to_value(&r), summary)
        }
        Err(e) => Outcome::from_error(&e),
    }
}

fn run_gamma_star(k: u32, p: u64, l: u32, budget: Option<u64>) -> Outcome {
    match gamma_star_bruteforce(k, p, l, budget.unwrap_or_else(budget_from_env)) {
        Ok(r) => {
            let mut summary = if r.exhausted {
                format!("gamma*({k}, {p}^{l}) = {}", r.gamma_star)
            } else {
                format!("gamma*({k}, {p}^{l}) >= {} (budget exhausted)", r.gamma_star)
            };
            if let Some(obs) = &r.obstruction {
                summary.push_str(&format!("; insoluble tuple of length {}: {obs:?}", obs.len()));
            }
            let code = if r.exhausted { EXIT_OK } else { EXIT_BUDGET };
            Outcome::new(code, json!({ "gamma_star": r.gamma_star, "exhausted": r.exhausted }), summary)
        }
        Err(e) => Outcome::from_error(&e),
    }
}

fn run_counterexample(p: u64) -> Outcome {
    match verify_counterexample(p) {
        Ok(r) => {
            let summary = format!(
                "{} variables, {} descent levels, proof {}; solve returned {:?}",
                r.system.s(),
                r.trace.levels.len(),
                if r.verified { "verified" } else { "REJECTED" },
                r.solve_kind
            );
            let code = if r.verified { EXIT_OK } else { EXIT_NEGATIVE };
            Outcome::new(code, to_value(&r), summary)
        }
        Err(e) => Outcome::from_error(&e),
    }
}

/// Executes a parsed command.
pub fn execute(cmd: &Command) -> Outcome {
    match cmd {
        Command::Solve { input, precision, budget, engine } => run_solve(input, *precision, *budget, *engine),
        Command::Verify { cert, input } => run_verify(cert, input),
        Command::Normalize { input } => run_normalize(input),
        Command::Oracle { input, modulus_exp, budget } => run_oracle(input, *modulus_exp, *budget),
        Command::GammaStar { k, p, l, budget } => run_gamma_star(*k, *p, *l, *budget),
        Command::Counterexample { p } => run_counterexample(*p),
    }
}

/// Parses `args`, runs the request, prints its output and returns the exit
/// status.  Usage errors map to the invalid-input status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = execute(&cli.command);
    // A closed pipe on either stream must not turn a result into a panic.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&out.json).expect("JSON values print"));
    let _ = writeln!(std::io::stderr(), "{}", out.summary);
    out.code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_names_map_to_choices() {
        assert_eq!(EngineChoice::from(EngineArg::Pow2), EngineChoice::Pow2);
        assert_eq!(EngineChoice::from(EngineArg::Auto), EngineChoice::Auto);
    }

    #[test]
    fn gamma_star_small_case() {
        let out = execute(&Command::GammaStar { k: 4, p: 5, l: 1, budget: None });
        assert_eq!(out.code, EXIT_OK);
        assert_eq!(out.json, json!({ "gamma_star": 5, "exhausted": true }));
    }

    #[test]
    fn low_primes_are_invalid_for_the_counterexample() {
        assert_eq!(execute(&Command::Counterexample { p: 3 }).code, EXIT_INVALID);
    }

    #[test]
    fn missing_file_is_invalid() {
        let out = execute(&Command::Normalize { input: PathBuf::from("/nonexistent/input.json") });
        assert_eq!(out.code, EXIT_INVALID);
    }

    #[test]
    fn usage_errors_are_invalid_input() {
        assert_eq!(run(["padic-diaglin", "solve"]), EXIT_INVALID);
        assert_eq!(run(["padic-diaglin", "solve", "x.json", "--engine", "bogus"]), EXIT_INVALID);
    }
}
