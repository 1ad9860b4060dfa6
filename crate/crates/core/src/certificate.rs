//! Certificates: the payload an engine produces, the transcript tying it to
//! the original input, and the exact verifier that is the trust root of the
//! crate.

use crate::arith::{rat, rpow, vp, Int, Rat, Valuation};
use crate::error::{Error, Result};
use crate::hensel::{
    check_newton_witness, check_witness, solve_from_newton, solve_from_witness, HenselWitness, LiftedSolution,
    NewtonWitness,
};
use crate::system::{DiagLinSystem, PadicContext};
use crate::transform::Transcript;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// What a certificate claims.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    /// An exact rational solution.
    ExactRational,
    /// A residue vector with a unit Jacobian minor.
    HenselWitness,
    /// A one-parameter slice with a Newton-liftable root.
    NewtonWitness,
    /// A replayable proof that no nontrivial solution exists.
    InsolubilityDescent,
    /// No claim.
    Unresolved,
}

/// One level of the insolubility descent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentLevel {
    /// Index of the level (the variables `x_{jk+1}, …, x_{jk+k}` scaled by `p^j`).
    pub level: usize,
    /// Variable indices of the block.
    pub indices: Vec<usize>,
    /// Unit counts `n ∈ 0..=k` whose sum `n · 1` vanishes modulo `p`.
    pub vanishing_unit_counts: Vec<usize>,
    /// Number of residue vectors mod `p` enumerated for the block claim.
    pub states: u64,
}

/// A finite proof that the counterexample system has only the trivial
/// solution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentTrace {
    /// The prime.
    pub p: u64,
    /// The degree `k = p − 1`.
    pub k: u32,
    /// Number of variables `k² + 1`.
    pub s: usize,
    /// One record per level.
    pub levels: Vec<DescentLevel>,
    /// The last variable is forced to `≡ 0 mod p` by the linear equation.
    pub linear_forcing: String,
    /// The final contradiction with primitivity.
    pub conclusion: String,
}

/// The engine-specific evidence carried by a certificate, expressed on the
/// derived system of the transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    /// An exact integer solution of the derived system.
    Exact {
        /// The solution.
        #[serde(with = "crate::serde_util::int_vec")]
        x: Vec<Int>,
    },
    /// A pair witness on the derived system.
    Pair {
        /// Residue vector.
        #[serde(with = "crate::serde_util::int_vec")]
        x: Vec<Int>,
        /// Pivot pair.
        pivot: (usize, usize),
    },
    /// A Newton slice witness on the derived system.
    Newton {
        /// Frozen point.
        #[serde(with = "crate::serde_util::int_vec")]
        x: Vec<Int>,
        /// Varying coordinate.
        free: usize,
        /// Coordinate solved from the linear equation.
        eliminated: Option<usize>,
    },
    /// An insolubility proof.
    Descent(DescentTrace),
    /// No evidence.
    Unresolved {
        /// Why nothing was certified.
        reason: String,
    },
}

impl Payload {
    /// The certificate kind this payload supports.
    pub fn kind(&self) -> CertificateKind {
        match self {
            Payload::Exact { .. } => CertificateKind::ExactRational,
            Payload::Pair { .. } => CertificateKind::HenselWitness,
            Payload::Newton { .. } => CertificateKind::NewtonWitness,
            Payload::Descent(_) => CertificateKind::InsolubilityDescent,
            Payload::Unresolved { .. } => CertificateKind::Unresolved,
        }
    }
}

/// What an engine returns: steps from its input to a derived system and the
/// evidence on that derived system, plus the branch tags it went through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineOutcome {
    /// Transcript starting at the engine's input.
    pub transcript: Transcript,
    /// Evidence on `transcript.derived`.
    pub payload: Payload,
    /// Branch tags, outermost first.
    pub route: Vec<String>,
}

impl EngineOutcome {
    /// An outcome with no transform steps.
    pub fn direct(sys: &DiagLinSystem, k: u32, payload: Payload, route: &[&str]) -> Self {
        EngineOutcome {
            transcript: Transcript::new(sys.clone(), k),
            payload,
            route: route.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// A lifted solution, on the derived system and pulled back to the input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionDemo {
    /// Target precision `M`.
    pub precision: u32,
    /// The lift on the derived system, residues mod `p^{lift_precision}`.
    #[serde(with = "crate::serde_util::int_vec")]
    pub derived_x: Vec<Int>,
    /// Precision used on the derived system (at least `M`).
    pub lift_precision: u32,
    /// Primitive integer vector on the original system (pull-back of `derived_x`).
    #[serde(with = "crate::serde_util::int_vec")]
    pub original_x: Vec<Int>,
    /// `v_p(A(original_x))`.
    pub residual_a: Valuation,
    /// `v_p(B(original_x))`.
    pub residual_b: Valuation,
}

/// A self-contained, independently checkable answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    /// What is claimed.
    pub kind: CertificateKind,
    /// The prime.
    #[serde(with = "crate::serde_util::int_str")]
    pub p: Int,
    /// The degree.
    pub k: u32,
    /// Steps from the original input to the derived system.
    pub transcript: Transcript,
    /// Evidence on the derived system.
    pub payload: Payload,
    /// Engine and branch tags.
    pub route: Vec<String>,
    /// Optional lifted solution.
    pub precision_demo: Option<PrecisionDemo>,
}

impl Certificate {
    /// Builds a certificate (kind taken from the payload).
    pub fn new(ctx: &PadicContext, transcript: Transcript, payload: Payload, route: Vec<String>) -> Self {
        Certificate {
            kind: payload.kind(),
            p: ctx.p.clone(),
            k: ctx.k,
            transcript,
            payload,
            route,
            precision_demo: None,
        }
    }

    /// True for the kinds that assert a nontrivial solution.
    pub fn is_solution(&self) -> bool {
        matches!(
            self.kind,
            CertificateKind::ExactRational | CertificateKind::HenselWitness | CertificateKind::NewtonWitness
        )
    }
}

/// Outcome of [`verify`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// True iff every check passed.
    pub ok: bool,
    /// The first failing check.
    pub failure: Option<String>,
    /// `v_p` of the residuals of the re-lifted solution on the derived system.
    pub residual_a: Option<Valuation>,
    /// Same for the linear form.
    pub residual_b: Option<Valuation>,
}

impl VerifyReport {
    fn fail(msg: impl Into<String>) -> Self {
        VerifyReport { ok: false, failure: Some(msg.into()), residual_a: None, residual_b: None }
    }
}

/// Lifts the payload of a solution certificate on `derived` to precision `m`.
pub fn lift_payload(payload: &Payload, ctx: &PadicContext, derived: &DiagLinSystem, m: u32) -> Result<LiftedSolution> {
    match payload {
        Payload::Pair { x, pivot } => solve_from_witness(
            &HenselWitness { x: x.clone(), pivot: *pivot, context: ctx.clone(), system: derived.clone() },
            m,
        ),
        Payload::Newton { x, free, eliminated } => solve_from_newton(
            &NewtonWitness {
                x: x.clone(),
                free: *free,
                eliminated: *eliminated,
                context: ctx.clone(),
                system: derived.clone(),
            },
            m,
        ),
        Payload::Exact { x } => {
            let unit_index = (0..x.len()).min_by_key(|&j| vp(&x[j], &ctx.p)).unwrap_or(0);
            Ok(LiftedSolution {
                x: x.clone(),
                unit_index,
                precision: m,
                residual_a: Valuation::Infinite,
                residual_b: Valuation::Infinite,
            })
        }
        _ => Err(Error::NotApplicable("payload carries no solution".into())),
    }
}

/// Scales a rational vector to a primitive integer vector (gcd 1).
pub fn primitive_integer(x: &[Rat]) -> Vec<Int> {
    let den = x.iter().fold(Int::one(), |acc, v| acc.lcm(v.denom()));
    let ints: Vec<Int> = x.iter().map(|v| (v * rat(&den)).to_integer()).collect();
    let g = ints.iter().fold(Int::zero(), |acc, v| acc.gcd(v));
    if g.is_zero() {
        return ints;
    }
    ints.iter().map(|v| v / &g).collect()
}

/// Pulls a derived-system vector back to the original system and makes it a
/// primitive integer vector.
pub fn pull_back_primitive(t: &Transcript, y: &[Int]) -> Vec<Int> {
    let yr: Vec<Rat> = y.iter().map(rat).collect();
    primitive_integer(&t.pull_back(&yr))
}

/// Builds a precision demonstration: lifts on the derived system until the
/// pulled-back primitive vector has residuals of valuation `≥ m` on the
/// original system.
pub fn precision_demo(cert: &Certificate, m: u32) -> Result<PrecisionDemo> {
    let ctx = PadicContext::new(cert.p.clone(), cert.k)?;
    let t = &cert.transcript;
    let mut lift = m;
    for _ in 0..16 {
        let sol = lift_payload(&cert.payload, &ctx, &t.derived, lift)?;
        let original_x = pull_back_primitive(t, &sol.x);
        let ra = vp(&t.source.eval_a(cert.k, &original_x), &ctx.p);
        let rb = vp(&t.source.eval_b(&original_x), &ctx.p);
        let worst = ra.min(rb);
        if worst.at_least(m as u64) {
            return Ok(PrecisionDemo {
                precision: m,
                derived_x: sol.x,
                lift_precision: lift,
                original_x,
                residual_a: ra,
                residual_b: rb,
            });
        }
        let deficit = m as u64 - worst.finite().unwrap();
        lift += deficit as u32 + 1;
    }
    Err(Error::Internal("could not reach the requested precision on the original system".into()))
}

/// Re-checks a certificate against the original input with exact arithmetic:
/// transcript replay, payload check, and a re-lift to `min(M, 10)`.
pub fn verify(cert: &Certificate, original: &DiagLinSystem) -> VerifyReport {
    let ctx = match PadicContext::new(cert.p.clone(), cert.k) {
        Ok(c) => c,
        Err(e) => return VerifyReport::fail(format!("bad context: {e}")),
    };
    let t = &cert.transcript;
    if t.k != cert.k {
        return VerifyReport::fail("transcript degree differs from the certificate degree");
    }
    if &t.source != original {
        return VerifyReport::fail("transcript source differs from the input system");
    }
    match t.replay_from(original) {
        Ok(d) if d == t.derived => {}
        Ok(_) => return VerifyReport::fail("replay does not reproduce the derived system"),
        Err(e) => return VerifyReport::fail(format!("invalid step: {e}")),
    }
    if cert.kind != cert.payload.kind() {
        return VerifyReport::fail("certificate kind does not match its payload");
    }
    let derived = &t.derived;
    match &cert.payload {
        Payload::Unresolved { reason } => return VerifyReport::fail(format!("unresolved: {reason}")),
        Payload::Descent(trace) => {
            return match crate::descent::check_descent(trace, original) {
                Ok(()) => VerifyReport { ok: true, failure: None, residual_a: None, residual_b: None },
                Err(e) => VerifyReport::fail(format!("descent trace rejected: {e}")),
            }
        }
        Payload::Exact { x } => {
            if x.len() != derived.s() || !derived.is_exact_solution(cert.k, x) {
                return VerifyReport::fail("exact solution does not solve the derived system");
            }
            let back = t.pull_back(&x.iter().map(rat).collect::<Vec<_>>());
            let a: Rat = original.a.iter().zip(&back).map(|(a, v)| rat(a) * rpow(v, cert.k)).sum();
            let b: Rat = original.b.iter().zip(&back).map(|(b, v)| rat(b) * v).sum();
            if !a.is_zero() || !b.is_zero() || back.iter().all(|v| v.is_zero()) {
                return VerifyReport::fail("pulled-back exact solution fails on the input");
            }
            return VerifyReport {
                ok: true,
                failure: None,
                residual_a: Some(Valuation::Infinite),
                residual_b: Some(Valuation::Infinite),
            };
        }
        Payload::Pair { x, pivot } => {
            let w = HenselWitness { x: x.clone(), pivot: *pivot, context: ctx.clone(), system: derived.clone() };
            let chk = check_witness(&w);
            if !chk.ok {
                return VerifyReport::fail(chk.failure.unwrap_or_default());
            }
        }
        Payload::Newton { x, free, eliminated } => {
            let w = NewtonWitness {
                x: x.clone(),
                free: *free,
                eliminated: *eliminated,
                context: ctx.clone(),
                system: derived.clone(),
            };
            let chk = check_newton_witness(&w);
            if !chk.ok {
                return VerifyReport::fail(chk.failure.unwrap_or_default());
            }
        }
    }
    let m = cert.precision_demo.as_ref().map_or(10, |d| d.precision.min(10));
    match lift_payload(&cert.payload, &ctx, derived, m) {
        Ok(sol) => {
            let back = pull_back_primitive(t, &sol.x);
            if back.iter().all(|v| v.is_zero()) {
                return VerifyReport::fail("lifted solution pulls back to zero");
            }
            if !sol.residual_a.at_least(m as u64) || !sol.residual_b.at_least(m as u64) {
                return VerifyReport::fail("lift residuals below the requested precision");
            }
            if let Some(demo) = &cert.precision_demo {
                let ra = vp(&original.eval_a(cert.k, &demo.original_x), &ctx.p);
                let rb = vp(&original.eval_b(&demo.original_x), &ctx.p);
                if !ra.at_least(demo.precision as u64)
                    || !rb.at_least(demo.precision as u64)
                    || demo.original_x.iter().all(|v| v.is_zero())
                {
                    return VerifyReport::fail("precision demonstration does not meet its precision");
                }
            }
            VerifyReport { ok: true, failure: None, residual_a: Some(sol.residual_a), residual_b: Some(sol.residual_b) }
        }
        Err(e) => VerifyReport::fail(format!("lift failed: {e}")),
    }
}
