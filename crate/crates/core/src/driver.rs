//! Orchestration: input parsing, the solve pipeline (shortcuts, conditioning,
//! dispatch, engine, verification, fallbacks), and the counterexample
//! verifier.
//!
//! `solve` only ever returns certificates that [`verify`] accepts; anything
//! else degrades to an `Unresolved` certificate with the reason recorded.

use crate::arith::{ipow, vp, Int, Valuation};
use crate::certificate::{precision_demo, verify, Certificate, DescentTrace, EngineOutcome, Payload, VerifyReport};
use crate::descent::{build_descent, counterexample_system, is_counterexample};
use crate::engine_contract::{dispatch_case, search_diagonal, solve_contract, EngineTag};
use crate::error::{Error, Result};
use crate::hensel::{check_newton_witness, NewtonWitness};
use crate::normalize::normalize;
use crate::oracle::{find_nonsingular, CongruenceQuery, DEFAULT_BUDGET};
use crate::system::{DiagLinSystem, PadicContext};
use crate::transform::Transcript;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// Environment variable overriding the default search budget.
pub const BUDGET_ENV: &str = "PADIC_WITNESS_BUDGET";

/// Prefix of the `Unresolved` reason when a search budget ran out.
pub const BUDGET_REASON: &str = "budget exceeded";

/// The JSON input format: all integers as decimal strings except `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveInput {
    /// Degree.
    pub k: u32,
    /// Prime.
    #[serde(with = "crate::serde_util::int_str")]
    pub p: Int,
    /// Degree-`k` coefficients.
    #[serde(with = "crate::serde_util::int_vec")]
    pub a: Vec<Int>,
    /// Linear coefficients.
    #[serde(with = "crate::serde_util::int_vec")]
    pub b: Vec<Int>,
}

impl SolveInput {
    /// Builds the input record of a system.
    pub fn from_system(sys: &DiagLinSystem, ctx: &PadicContext) -> Self {
        SolveInput { k: ctx.k, p: ctx.p.clone(), a: sys.a.clone(), b: sys.b.clone() }
    }

    /// Validates the record and splits it into system and context.
    pub fn into_parts(self) -> Result<(DiagLinSystem, PadicContext)> {
        let ctx = PadicContext::new(self.p, self.k)?;
        let sys = DiagLinSystem::new(self.a, self.b)?;
        Ok((sys, ctx))
    }
}

/// Which engine `solve` should use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    /// Follow [`dispatch_case`].
    #[default]
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

/// Knobs of [`solve`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Precision of the lifted demonstration (`0` skips it).
    pub precision: u32,
    /// Search budget for enumerative fallbacks.
    pub budget: u64,
    /// Engine selection.
    pub engine: EngineChoice,
    /// Allow the generic contraction and oracle fallbacks.
    pub fallbacks: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { precision: 10, budget: budget_from_env(), engine: EngineChoice::Auto, fallbacks: true }
    }
}

/// The search budget: `PADIC_WITNESS_BUDGET` if set and valid, else the default.
pub fn budget_from_env() -> u64 {
    std::env::var(BUDGET_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

fn finish(cert: Certificate, sys: &DiagLinSystem, opts: &SolveOptions) -> Option<Certificate> {
    let mut cert = cert;
    if opts.precision > 0 && cert.is_solution() {
        cert.precision_demo = Some(precision_demo(&cert, opts.precision).ok()?);
    }
    if verify(&cert, sys).ok {
        Some(cert)
    } else {
        None
    }
}

/// Small-height exact search on supports of size one and two.
fn trivial_shortcut(sys: &DiagLinSystem, ctx: &PadicContext) -> Option<Vec<Int>> {
    let s = sys.s();
    for i in 0..s {
        if sys.a[i].is_zero() && sys.b[i].is_zero() {
            let mut x = vec![Int::zero(); s];
            x[i] = Int::one();
            return Some(x);
        }
    }
    for i in 0..s {
        for j in i + 1..s {
            for u in 1i64..=2 {
                for v in -2i64..=2 {
                    if v == 0 {
                        continue;
                    }
                    let (u, v) = (Int::from(u), Int::from(v));
                    let a = &sys.a[i] * ipow(&u, ctx.k) + &sys.a[j] * ipow(&v, ctx.k);
                    let b = &sys.b[i] * &u + &sys.b[j] * &v;
                    if a.is_zero() && b.is_zero() {
                        let mut x = vec![Int::zero(); s];
                        x[i] = u;
                        x[j] = v;
                        return Some(x);
                    }
                }
            }
        }
    }
    None
}

/// Newton point on a slice where the linear form is either identically zero
/// (`eliminated = None`) or solved for a variable absent from the degree form.
fn diagonal_slice(
    sys: &DiagLinSystem,
    ctx: &PadicContext,
    eliminated: Option<usize>,
    budget: u64,
) -> Result<Option<Payload>> {
    let idx: Vec<usize> = (0..sys.s()).filter(|&j| Some(j) != eliminated).collect();
    let c: Vec<Int> = idx.iter().map(|&j| sys.a[j].clone()).collect();
    let Some((y, f)) = search_diagonal(&c, ctx, budget)? else { return Ok(None) };
    let mut x = vec![Int::zero(); sys.s()];
    for (pos, &j) in idx.iter().enumerate() {
        x[j] = y[pos].clone();
    }
    let free = idx[f];
    if let Some(e) = eliminated {
        if sys.eval_a(ctx.k, &x).is_zero() {
            // Exact: scale by b_e and solve the linear equation for x_e.
            let be = sys.b[e].clone();
            let mut xe: Vec<Int> = x.iter().map(|v| v * &be).collect();
            xe[e] = -sys.eval_b(&x);
            return Ok(Some(Payload::Exact { x: xe }));
        }
    } else if sys.eval_a(ctx.k, &x).is_zero() {
        return Ok(Some(Payload::Exact { x }));
    }
    let w = NewtonWitness { x: x.clone(), free, eliminated, context: ctx.clone(), system: sys.clone() };
    if !check_newton_witness(&w).ok {
        return Err(Error::Internal("slice point fails the Newton check".into()));
    }
    Ok(Some(Payload::Newton { x, free, eliminated }))
}

fn run_engine(tag: EngineChoice, sys: &DiagLinSystem, ctx: &PadicContext, budget: u64) -> Result<EngineOutcome> {
    match tag {
        EngineChoice::Contract => solve_contract(sys, ctx, budget),
        EngineChoice::Pm1 => crate::engine_pm1::solve_pm1(sys, ctx),
        EngineChoice::Ppm1 => crate::engine_ppm1::solve_ppm1(sys, ctx),
        EngineChoice::Pow2 => crate::engine_pow2::solve_pow2(sys, ctx),
        EngineChoice::Auto => unreachable!("resolved before dispatch"),
    }
}

/// Chains an engine outcome onto a transcript from the original input.
fn chain(base: &Transcript, out: &EngineOutcome) -> Result<Transcript> {
    let mut t = base.clone();
    for st in &out.transcript.steps {
        t.push(st.clone())?;
    }
    Ok(t)
}

fn unresolved(ctx: &PadicContext, sys: &DiagLinSystem, reason: String, route: Vec<String>) -> Certificate {
    Certificate::new(ctx, Transcript::new(sys.clone(), ctx.k), Payload::Unresolved { reason }, route)
}

/// Solves `sys` over `Q_p`, returning a verified certificate or an
/// `Unresolved` one.
pub fn solve(sys: &DiagLinSystem, ctx: &PadicContext, opts: &SolveOptions) -> Result<Certificate> {
    if sys.s() < 2 {
        return Err(Error::InvalidInput("at least two variables are required".into()));
    }
    let k = ctx.k;
    let here = Transcript::new(sys.clone(), k);
    let mut notes: Vec<String> = Vec::new();
    let mut budget_hit = false;

    if is_counterexample(sys, ctx.p_u64(), k) {
        let trace = build_descent(ctx.p_u64())?;
        let cert = Certificate::new(ctx, here.clone(), Payload::Descent(trace), vec!["descent".into()]);
        if verify(&cert, sys).ok {
            return Ok(cert);
        }
    }
    if let Some(x) = trivial_shortcut(sys, ctx) {
        let cert = Certificate::new(ctx, here.clone(), Payload::Exact { x }, vec!["small-height".into()]);
        if let Some(c) = finish(cert, sys, opts) {
            return Ok(c);
        }
    }
    // Degenerate linear structure: the form vanishes, or a variable is absent
    // from the degree form and absorbs the linear equation.
    let all_b_zero = sys.b.iter().all(|b| b.is_zero());
    let free_slot =
        (0..sys.s()).filter(|&i| sys.a[i].is_zero() && !sys.b[i].is_zero()).min_by_key(|&i| vp(&sys.b[i], &ctx.p));
    if all_b_zero || free_slot.is_some() {
        let tag = if all_b_zero { "pure-diagonal" } else { "free-linear-slot" };
        match diagonal_slice(sys, ctx, free_slot, opts.budget) {
            Ok(Some(payload)) => {
                let cert = Certificate::new(ctx, here.clone(), payload, vec![tag.into()]);
                if let Some(c) = finish(cert, sys, opts) {
                    return Ok(c);
                }
                notes.push(format!("{tag}: certificate rejected"));
            }
            Ok(None) => notes.push(format!("{tag}: no Newton point")),
            Err(Error::BudgetExceeded(_)) => {
                budget_hit = true;
                notes.push(format!("{tag}: {BUDGET_REASON}"));
            }
            Err(e) => notes.push(format!("{tag}: {e}")),
        }
        if all_b_zero {
            let reason = if budget_hit { BUDGET_REASON.to_string() } else { notes.join("; ") };
            return Ok(unresolved(ctx, sys, reason, vec![tag.into()]));
        }
    }

    // Main pipeline on the conditioned system.
    let (rep, pert) = normalize(sys, ctx)?;
    let base = {
        let mut t = here.clone();
        let mut ok = true;
        for st in &rep.transcript.steps {
            if t.push(st.clone()).is_err() {
                ok = false;
                break;
            }
        }
        ok.then_some(t)
    };
    if pert.is_some() {
        notes.push("zero coefficients perturbed".into());
    }
    let conditioned = rep.transcript.derived.clone();
    let chosen = match opts.engine {
        EngineChoice::Auto => match dispatch_case(ctx) {
            EngineTag::Pow2 => EngineChoice::Pow2,
            EngineTag::Pm1 => EngineChoice::Pm1,
            EngineTag::Ppm1 => EngineChoice::Ppm1,
            EngineTag::Contract { .. } => EngineChoice::Contract,
        },
        e => e,
    };
    let mut attempts = vec![chosen];
    if opts.fallbacks && chosen != EngineChoice::Contract {
        attempts.push(EngineChoice::Contract);
    }
    if let Some(base) = &base {
        for tag in attempts {
            let name = format!("{tag:?}").to_lowercase();
            match run_engine(tag, &conditioned, ctx, opts.budget) {
                Ok(out) => {
                    let Ok(t) = chain(base, &out) else {
                        notes.push(format!("{name}: transcript does not replay on the input"));
                        continue;
                    };
                    let cert = Certificate::new(ctx, t, out.payload, out.route);
                    match finish(cert, sys, opts) {
                        Some(c) => return Ok(c),
                        None => notes.push(format!("{name}: certificate rejected by the verifier")),
                    }
                }
                Err(Error::BudgetExceeded(_)) => {
                    budget_hit = true;
                    notes.push(format!("{name}: {BUDGET_REASON}"));
                }
                Err(e) => notes.push(format!("{name}: {e}")),
            }
        }
    }
    if opts.fallbacks {
        let (target, t0) = match &base {
            Some(b) => (b.derived.clone(), b.clone()),
            None => (sys.clone(), here.clone()),
        };
        let mut q = CongruenceQuery::new(target, ctx.clone());
        q.budget = opts.budget;
        match find_nonsingular(&q) {
            Ok(r) if r.found => {
                let payload = Payload::Pair { x: r.witness.unwrap(), pivot: r.nonsingular_pivot.unwrap() };
                let cert = Certificate::new(ctx, t0, payload, vec!["oracle".into()]);
                if let Some(c) = finish(cert, sys, opts) {
                    return Ok(c);
                }
                notes.push("oracle: certificate rejected".into());
            }
            Ok(r) => {
                if !r.exhausted {
                    budget_hit = true;
                }
                notes.push(format!(
                    "oracle: no witness ({} states{})",
                    r.states,
                    if r.exhausted { ", exhausted" } else { "" }
                ));
            }
            Err(Error::BudgetExceeded(n)) => {
                budget_hit = true;
                notes.push(format!("oracle: {BUDGET_REASON} after {n} states"));
            }
            Err(e) => notes.push(format!("oracle: {e}")),
        }
    }
    let reason = if budget_hit { format!("{BUDGET_REASON}: {}", notes.join("; ")) } else { notes.join("; ") };
    Ok(unresolved(ctx, sys, reason, vec!["unresolved".into()]))
}

/// Result of [`verify_counterexample`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    /// The system.
    pub system: DiagLinSystem,
    /// The descent proof.
    pub trace: DescentTrace,
    /// The descent certificate passed the verifier.
    pub verified: bool,
    /// What `solve` returned on the same system.
    pub solve_kind: crate::certificate::CertificateKind,
}

/// Builds and checks the insolubility proof for the `k = p − 1`
/// counterexample, and confirms `solve` claims no solution for it.
pub fn verify_counterexample(p: u64) -> Result<CounterexampleReport> {
    let system = counterexample_system(p)?;
    let ctx = PadicContext::small(p, (p - 1) as u32);
    let trace = build_descent(p)?;
    let cert = Certificate::new(&ctx, Transcript::new(system.clone(), ctx.k), Payload::Descent(trace.clone()), vec![]);
    let verified = verify(&cert, &system).ok;
    let solved = solve(&system, &ctx, &SolveOptions { precision: 0, ..SolveOptions::default() })?;
    if solved.is_solution() {
        return Err(Error::Internal("solve claimed a solution of the counterexample".into()));
    }
    Ok(CounterexampleReport { system, trace, verified, solve_kind: solved.kind })
}

/// Convenience wrapper over [`verify`] for the CLI.
pub fn verify_certificate(cert: &Certificate, input: &DiagLinSystem) -> VerifyReport {
    verify(cert, input)
}

/// `v_p` helper exposed for reports.
pub fn valuation(n: &Int, p: &Int) -> Valuation {
    vp(n, p)
}
