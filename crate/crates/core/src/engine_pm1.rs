//! The engine for `k = p − 1` (so `p ≥ 5` and every unit has `u^k ≡ 1`).
//!
//! A conditioned system is first pushed through a reduction ladder: a low
//! variable at level 0, a long level-0 block, or a long higher block each
//! give a non-singular solution modulo `p` directly.  What survives has the
//! rigid *critical* shape: `s = k² + 2`, a level-0 block of `k + 2`
//! coordinates whose header pair reads `(a, −a; 1, −1)` and whose tail reads
//! `(1; 0)` modulo `p`, and one block of `k` coordinates with congruent unit
//! parts on every other level.  Critical systems are then solved by
//! case analysis on `θ = v_p(a_1 + a_2)` and the levels of the blocks:
//!
//! * a *low variable* below `θ` lifts through a contracted header pair
//!   (`aux:pair-lift`);
//! * a *balanced variable* (`ν = μ`) below `θ` lifts through a shifted pair
//!   (`aux:shifted-pair`);
//! * a *deep block* whose linear coefficients all sit above `θ − ⌊θ/k⌋`
//!   is rescaled and solved by a one-variable Newton slice;
//! * the boundary case `β = θ` splits four ways on `α ≡ −a′` and the number
//!   of unit linear coefficients (`aux:boundary-i` … `-iv`);
//! * for `θ ≥ k` a *sweep* rescales the blocks by growing powers of `p`
//!   until some coordinate stops being low-linear, then dispatches to one of
//!   the above.
//!
//! Every move is a transform step, so each answer is a certificate whose
//! transcript starts at the engine's input.

use crate::arith::{ipow, modp, ppow, ppow_rat, rat, vp, Int, Rat, Valuation};
use crate::certificate::{precision_demo, Certificate, EngineOutcome, Payload, PrecisionDemo};
use crate::combinat::{rooted_zero_subset, solve_unit_pair_mod_p, FpKind, FpSolution};
use crate::error::{Error, Result};
use crate::hensel::{check_newton_witness, check_witness, classic_hensel, HenselWitness, NewtonWitness};
use crate::system::{pow_mod_u64, DiagLinSystem, PadicContext};
use crate::transform::{apply_transform, Transcript, TransformStep};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

fn require_pm1(ctx: &PadicContext) -> Result<u64> {
    let p = ctx.p.to_u64().ok_or(Error::ContextNotApplicable)?;
    if p < 5 || ctx.k as u64 + 1 != p {
        return Err(Error::ContextNotApplicable);
    }
    Ok(p)
}

fn res(x: &Int, p: u64) -> u64 {
    modp(x, &Int::from(p)).to_u64().expect("residue fits")
}

fn inv(x: u64, p: u64) -> u64 {
    pow_mod_u64(x % p, p - 2, p)
}

fn nu_of(x: &Int, p: &Int) -> Option<u64> {
    vp(x, p).finite()
}

/// `x / p^e` when `p^e` divides `x`.
fn quot(x: &Int, p: &Int, e: u64) -> Option<Int> {
    let pe = ppow(p, e);
    let (q, r) = (x / &pe, x % &pe);
    r.is_zero().then_some(q)
}

fn embed(s: usize, idx: &[usize], vals: &[u64]) -> Vec<Int> {
    let mut x = vec![Int::zero(); s];
    for (i, v) in idx.iter().zip(vals) {
        x[*i] = Int::from(*v);
    }
    x
}

fn pre(msg: impl Into<String>) -> Error {
    Error::PreconditionViolated(msg.into())
}

/// Checks a payload against the system it speaks about.
fn check_payload(payload: &Payload, sys: &DiagLinSystem, ctx: &PadicContext) -> Result<()> {
    let failure = match payload {
        Payload::Pair { x, pivot } => {
            let w = HenselWitness { x: x.clone(), pivot: *pivot, context: ctx.clone(), system: sys.clone() };
            check_witness(&w).failure
        }
        Payload::Newton { x, free, eliminated } => {
            let w = NewtonWitness {
                x: x.clone(),
                free: *free,
                eliminated: *eliminated,
                context: ctx.clone(),
                system: sys.clone(),
            };
            check_newton_witness(&w).failure
        }
        Payload::Exact { x } => (!sys.is_exact_solution(ctx.k, x) || x.iter().all(|v| v.is_zero()))
            .then(|| "not an exact nonzero solution".into()),
        _ => Some("payload carries no solution".into()),
    };
    match failure {
        None => Ok(()),
        Some(f) => Err(Error::Internal(format!("constructed evidence fails its check: {f}"))),
    }
}

/// A transcript under construction together with the branch tags taken.
struct Run<'a> {
    ctx: &'a PadicContext,
    p: u64,
    t: Transcript,
    route: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(sys: &DiagLinSystem, ctx: &'a PadicContext, p: u64) -> Self {
        Run { ctx, p, t: Transcript::new(sys.clone(), ctx.k), route: Vec::new() }
    }

    fn sys(&self) -> &DiagLinSystem {
        &self.t.derived
    }

    fn pint(&self) -> &Int {
        &self.ctx.p
    }

    fn push(&mut self, st: TransformStep) -> Result<()> {
        self.t.push(st)
    }

    fn tag(&mut self, s: &str) {
        self.route.push(s.to_string());
    }

    fn finish(self, payload: Payload) -> Result<EngineOutcome> {
        check_payload(&payload, &self.t.derived, self.ctx)?;
        Ok(EngineOutcome { transcript: self.t, payload, route: self.route })
    }
}

// ---------------------------------------------------------------------------
// Critical profile
// ---------------------------------------------------------------------------

/// Which of the five defining conditions of a critical system hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalFlags {
    /// `b_1 = 1`, `b_2 = −1`, `a_1` a unit, `a_1 ≡ −a_2 mod p`, `a_1 + a_2 ≠ 0`.
    pub header: bool,
    /// `s = k² + 2`, `υ_0 = k + 2`, `υ_j = k` for `1 ≤ j < k`, and `ν_i < k`.
    pub block_counts: bool,
    /// The level-0 tail reads `(1; 0)` modulo `p`.
    pub level0_shape: bool,
    /// On each block `j ≥ 1` the unit parts of the degree coefficients agree mod `p`.
    pub block_classes: bool,
    /// No coordinate has `μ_i = 0 < ν_i`.
    pub no_low_level0: bool,
}

impl CriticalFlags {
    /// All five conditions.
    pub fn all(&self) -> bool {
        self.header && self.block_counts && self.level0_shape && self.block_classes && self.no_low_level0
    }
}

/// A system inspected for the critical shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalProfile {
    /// The inspected system; the header pair is coordinates 0 and 1.
    pub system: DiagLinSystem,
    /// `v_p(a_1 + a_2)`, or 0 when the sum vanishes.
    pub theta: u64,
    /// `blocks[j]` lists the coordinates `i ≥ 2` with `ν_i = j` (block 0 is
    /// the level-0 tail).
    pub blocks: Vec<Vec<usize>>,
    /// The condition flags.
    pub flags: CriticalFlags,
    /// `classes[j]`: the common residue of `a_i / p^j` on block `j` (0 when
    /// the block is not uniform).
    pub classes: Vec<u64>,
}

impl CriticalProfile {
    /// Computes the profile of `sys` (header assumed at coordinates 0, 1).
    pub fn inspect(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<Self> {
        let p = require_pm1(ctx)?;
        let pi = &ctx.p;
        let k = ctx.k as usize;
        let s = sys.s();
        if s < 2 {
            return Err(Error::InvalidInput("a critical system needs a header pair".into()));
        }
        let sum = &sys.a[0] + &sys.a[1];
        let theta = nu_of(&sum, pi).unwrap_or(0);
        let header = sys.b[0] == Int::one()
            && sys.b[1] == -Int::one()
            && !sum.is_zero()
            && nu_of(&sys.a[0], pi) == Some(0)
            && theta >= 1;
        let mut blocks = vec![Vec::new(); k];
        let mut in_range = true;
        for i in 2..s {
            match nu_of(&sys.a[i], pi) {
                Some(v) if (v as usize) < k => blocks[v as usize].push(i),
                _ => in_range = false,
            }
        }
        let block_counts = in_range && s == k * k + 2 && blocks.iter().all(|b| b.len() == k);
        let level0_shape = blocks[0].iter().all(|&i| res(&sys.a[i], p) == 1 && res(&sys.b[i], p) == 0);
        let mut classes = vec![0u64; k];
        let mut block_classes = true;
        for (j, blk) in blocks.iter().enumerate() {
            let rs: Vec<u64> = blk.iter().map(|&i| res(&quot(&sys.a[i], pi, j as u64).unwrap(), p)).collect();
            if let Some(&c0) = rs.first() {
                if rs.iter().all(|&c| c == c0) {
                    classes[j] = c0;
                } else if j >= 1 {
                    block_classes = false;
                }
            }
        }
        let no_low_level0 = (0..s).all(|i| {
            let nu = vp(&sys.a[i], pi);
            !(vp(&sys.b[i], pi) == Valuation::Finite(0) && nu > Valuation::Finite(0))
        });
        let flags = CriticalFlags { header, block_counts, level0_shape, block_classes, no_low_level0 };
        Ok(CriticalProfile { system: sys.clone(), theta, blocks, flags, classes })
    }

    /// True when every condition holds.
    pub fn is_critical(&self) -> bool {
        self.flags.all()
    }

    /// The block containing coordinate `i ≥ 2`.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&i))
    }
}

// ---------------------------------------------------------------------------
// Reduction ladder
// ---------------------------------------------------------------------------

/// Outcome of [`reduce_to_critical`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reduction {
    /// A shortcut applied; the certificate's transcript starts at the input.
    Solved(Certificate),
    /// The input is equivalent to a critical system.
    Critical {
        /// The critical system's profile.
        profile: CriticalProfile,
        /// Steps from the input to `profile.system`.
        transcript: Transcript,
        /// Tags of the ladder steps taken.
        route: Vec<String>,
    },
}

/// The rotation that moves block `j` to level 0: `x ↦ p x` on blocks below
/// `j`, then divide the degree equation by `p^j` and the linear one by `p`.
pub fn rotation_step(sys: &DiagLinSystem, ctx: &PadicContext, j: u64) -> TransformStep {
    let mults = sys
        .a
        .iter()
        .map(|a| match nu_of(a, &ctx.p) {
            Some(v) if v < j => rat(&ctx.p),
            _ => Rat::one(),
        })
        .collect();
    TransformStep::scaling("rotate-block", mults, ppow_rat(&ctx.p, -(j as i64)), ppow_rat(&ctx.p, -1))
}

fn pair_payload(s: usize, block: &[usize], extra: Option<usize>, sol: &FpSolution) -> Payload {
    let mut idx = block.to_vec();
    if let Some(e) = extra {
        idx.push(e);
    }
    let x = embed(s, &idx, &sol.values);
    let (i, j) = sol.pivot.expect("solved pair carries a pivot");
    Payload::Pair { x, pivot: (idx[i], idx[j]) }
}

fn residues(v: &[Int], idx: &[usize], p: u64) -> Vec<u64> {
    idx.iter().map(|&i| res(&v[i], p)).collect()
}

/// Runs the reduction ladder on a conditioned system.
///
/// Shortcuts, in order: a low variable at level 0; a level-0 block of at
/// least `k + 2` coordinates with a non-singular solution; a block rotated
/// to level 0 that has a zero subset against the now-low unit coordinate.
/// Otherwise the shape is normalized to `b_1 = −b_2 = 1` with tail class 1,
/// the rational point `(1, 1, 0, …)` is taken when `a_1 = −a_2`, and the
/// critical profile is returned.
pub fn reduce_to_critical(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<Reduction> {
    let p = require_pm1(ctx)?;
    let pi = ctx.p.clone();
    let k = ctx.k as usize;
    let s = sys.s();
    let mut nu = Vec::with_capacity(s);
    for a in &sys.a {
        match nu_of(a, &pi) {
            Some(v) if (v as usize) < k => nu.push(v),
            _ => return Err(Error::NotApplicable("needs nonzero degree coefficients with ν < k".into())),
        }
    }
    let mu: Vec<Valuation> = sys.b.iter().map(|b| vp(b, &pi)).collect();
    if !mu.contains(&Valuation::Finite(0)) {
        return Err(Error::NotApplicable("needs a unit linear coefficient".into()));
    }
    let block = |j: u64| (0..s).filter(|&i| nu[i] == j).collect::<Vec<_>>();
    let block0 = block(0);
    let mut run = Run::new(sys, ctx, p);
    let solved = |run: Run, payload: Payload| -> Result<Reduction> {
        let route = run.route.clone();
        let t = run.t.clone();
        check_payload(&payload, &t.derived, ctx)?;
        Ok(Reduction::Solved(Certificate::new(ctx, t, payload, route)))
    };

    // A low variable at level 0 absorbs the linear equation.
    if let Some(j) = (0..s).find(|&i| mu[i] == Valuation::Finite(0) && nu[i] > 0) {
        if block0.len() < p as usize {
            return Err(Error::NotApplicable("low level-0 variable with a short level-0 block".into()));
        }
        let sol = solve_unit_pair_mod_p(
            &residues(&sys.a, &block0, p),
            &residues(&sys.b, &block0, p),
            ctx,
            Some(res(&sys.b[j], p)),
        )?;
        if sol.kind != FpKind::Solved {
            return Err(Error::Internal("free-slot solver failed on a long level-0 block".into()));
        }
        run.tag("pm1:low-level0");
        return solved(run, pair_payload(s, &block0, Some(j), &sol));
    }

    // The level-0 block alone.
    let mut shape = None;
    if block0.len() >= k + 2 {
        let sol = solve_unit_pair_mod_p(&residues(&sys.a, &block0, p), &residues(&sys.b, &block0, p), ctx, None)?;
        match &sol.kind {
            FpKind::Solved => {
                run.tag(if block0.len() >= k + 3 { "pm1:many-level0" } else { "pm1:level0-pair" });
                return solved(run, pair_payload(s, &block0, None, &sol));
            }
            FpKind::CriticalShape { .. } => shape = Some(sol.kind.clone()),
            _ => return Err(Error::Internal("level-0 pair solver returned no shape".into())),
        }
    }

    // Rotations: block j moves to level 0 and a level-0 unit becomes low.
    let i0 = *block0
        .iter()
        .find(|&&i| mu[i] == Valuation::Finite(0))
        .ok_or_else(|| Error::Internal("unit linear coefficient outside level 0 went unnoticed".into()))?;
    let mut forced = true;
    for j in 1..k as u64 {
        let blk = block(j);
        if blk.len() < k {
            forced = false;
            continue;
        }
        let step = rotation_step(sys, ctx, j);
        let rotated = apply_transform(sys, ctx.k, &step)?;
        let sol = solve_unit_pair_mod_p(
            &residues(&rotated.a, &blk, p),
            &residues(&rotated.b, &blk, p),
            ctx,
            Some(res(&rotated.b[i0], p)),
        )?;
        match sol.kind {
            FpKind::Solved => {
                run.push(step)?;
                run.tag(if blk.len() > k { "pm1:rotate-block" } else { "pm1:forced-block" });
                return solved(run, pair_payload(s, &blk, Some(i0), &sol));
            }
            FpKind::AllEqual => {}
            _ => forced = false,
        }
    }
    let Some(FpKind::CriticalShape { permutation, a_prime, .. }) = shape else {
        return Err(Error::NotApplicable("system lies outside the reduction ladder".into()));
    };
    if !forced || s != k * k + 2 || block0.len() != k + 2 {
        return Err(Error::NotApplicable("system lies outside the reduction ladder".into()));
    }

    // Normalize: header first, then the level-0 tail, then blocks by level.
    let mut order: Vec<usize> = permutation.iter().map(|&q| block0[q]).collect();
    for j in 1..k as u64 {
        order.extend(block(j));
    }
    run.push(TransformStep::permutation("critical-order", &order))?;
    let (b1, b2) = (run.sys().b[0].clone(), run.sys().b[1].clone());
    let mut mults = vec![Rat::one(); s];
    mults[0] = Rat::new(Int::one(), b1.clone());
    mults[1] = Rat::new(-Int::one(), b2.clone());
    let a2inv = Int::from(inv(a_prime, p));
    let scale_a = rat(&(ipow(&b1, ctx.k) * ipow(&b2, ctx.k) * a2inv));
    run.push(TransformStep::scaling("critical-normalize", mults, scale_a, Rat::one()))?;
    if (&run.sys().a[0] + &run.sys().a[1]).is_zero() {
        let mut x = vec![Int::zero(); s];
        x[0] = Int::one();
        x[1] = Int::one();
        run.tag("pm1:rational-pair");
        return solved(run, Payload::Exact { x });
    }
    let profile = CriticalProfile::inspect(run.sys(), ctx)?;
    if !profile.is_critical() {
        return Err(Error::Internal(format!("normalized system is not critical: {:?}", profile.flags)));
    }
    run.tag("pm1:critical");
    Ok(Reduction::Critical { profile, transcript: run.t, route: run.route })
}

// ---------------------------------------------------------------------------
// Header pair with a prescribed offset
// ---------------------------------------------------------------------------

/// Integers `x_1, x_2, c′` from [`header_offset_pair`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeaderPair {
    /// First header value, `x_2 + p^l d`.
    pub x1: Int,
    /// Second header value, a unit in `1..p`.
    pub x2: Int,
    /// `(a_1 x_1^k + a_2 x_2^k) / p^l`, congruent to `c` modulo `p`.
    pub c_prime: Int,
}

/// Chooses `x_2 = x` with `k a_1 d x^{k−1} ≡ c (mod p)` and `x_1 = x + p^l d`,
/// so that `a_1 x_1^k + a_2 x_2^k = p^l c′` with `c′ ≡ c (mod p)` and
/// `x_1 − x_2 = p^l d`.
///
/// Requires `p ∤ a_1 c d` and `1 ≤ l < v_p(a_1 + a_2)`.
pub fn header_offset_pair(a1: &Int, a2: &Int, c: &Int, d: &Int, l: u64, ctx: &PadicContext) -> Result<HeaderPair> {
    let p = require_pm1(ctx)?;
    let pi = &ctx.p;
    let k = ctx.k;
    if res(c, p) == 0 || res(d, p) == 0 {
        return Err(pre("c and d must be units"));
    }
    if res(a1, p) == 0 {
        return Err(pre("a_1 must be a unit"));
    }
    let theta = vp(&(a1 + a2), pi);
    if l == 0 || theta <= Valuation::Finite(l) {
        return Err(pre("need 1 ≤ l < v_p(a_1 + a_2)"));
    }
    let lead = res(&(Int::from(k) * a1 * d), p);
    let target = res(c, p);
    let x = (1..p)
        .find(|&x| lead * pow_mod_u64(x, (k - 1) as u64, p) % p == target)
        .ok_or_else(|| Error::Internal("x^{k−1} misses a unit residue".into()))?;
    let x2 = Int::from(x);
    let x1 = &x2 + ppow(pi, l) * d;
    let total = a1 * ipow(&x1, k) + a2 * ipow(&x2, k);
    let c_prime = quot(&total, pi, l).ok_or_else(|| Error::Internal("header sum not divisible by p^l".into()))?;
    if res(&(&c_prime - c), p) != 0 {
        return Err(Error::Internal("header sum has the wrong residue".into()));
    }
    Ok(HeaderPair { x1, x2, c_prime })
}

// ---------------------------------------------------------------------------
// Reduced-form solvers on the current system of a run
// ---------------------------------------------------------------------------

/// `θ = v_p(a_1 + a_2)` of the header after checking `b = (1, −1)`.
fn header_theta(sys: &DiagLinSystem, p: &Int) -> Result<u64> {
    if sys.b[0] != Int::one() || sys.b[1] != -Int::one() {
        return Err(pre("header linear coefficients must be (1, −1)"));
    }
    nu_of(&(&sys.a[0] + &sys.a[1]), p).ok_or_else(|| pre("header degree coefficients cancel"))
}

/// Unit parts `c_i = a_i / p^β` of a block, all congruent modulo `p`.
fn block_classes(sys: &DiagLinSystem, ys: &[usize], beta: u64, p: u64) -> Result<Vec<Int>> {
    let pi = Int::from(p);
    let mut cs = Vec::with_capacity(ys.len());
    for &i in ys {
        if nu_of(&sys.a[i], &pi) != Some(beta) {
            return Err(pre(format!("coordinate {i} does not have ν = {beta}")));
        }
        cs.push(quot(&sys.a[i], &pi, beta).unwrap());
    }
    if cs.iter().any(|c| res(c, p) != res(&cs[0], p)) {
        return Err(pre("block degree coefficients are not congruent"));
    }
    Ok(cs)
}

/// `d_i = b_i / p^β` on a block.
fn block_linear(sys: &DiagLinSystem, ys: &[usize], beta: u64, p: u64) -> Result<Vec<Int>> {
    let pi = Int::from(p);
    ys.iter()
        .map(|&i| quot(&sys.b[i], &pi, beta).ok_or_else(|| pre(format!("coordinate {i} has μ < {beta}"))))
        .collect()
}

/// Contracts `x_1 = v_1 w`, `x_2 = v_2 w`, keeps `kept` (with multipliers),
/// zeroes the rest, and scales both equations by `p^{−e}`.
fn contract_header(run: &mut Run, label: &str, v: (&Int, &Int), kept: &[(usize, Int)], e: u64) -> Result<()> {
    let mut groups = vec![vec![(0usize, rat(v.0)), (1usize, rat(v.1))]];
    groups.extend(kept.iter().map(|(i, m)| vec![(*i, rat(m))]));
    let mut st = TransformStep::contraction(label, run.sys().s(), &groups);
    st.scale_a = ppow_rat(run.pint(), -(e as i64));
    st.scale_b = ppow_rat(run.pint(), -(e as i64));
    run.push(st)
}

/// Low-variable lift: header `(a_1, a_2; 1, −1)`, a block `ys` of `k`
/// coordinates with `a = p^β c_i` (congruent units) and `p^β | b`, and a
/// coordinate `z` with `p^{β+1} | a_z`, `b_z = p^β f`, `p ∤ f`, `β < θ`.
fn pair_lift(run: &mut Run, ys: &[usize], z: usize, beta: u64) -> Result<Payload> {
    let p = run.p;
    let pi = run.pint().clone();
    let k = run.ctx.k;
    let sys = run.sys().clone();
    if ys.len() != k as usize {
        return Err(pre("the block must have k coordinates"));
    }
    let theta = header_theta(&sys, &pi)?;
    if beta == 0 || beta >= theta {
        return Err(pre("need 1 ≤ β < θ"));
    }
    let cs = block_classes(&sys, ys, beta, p)?;
    let ds = block_linear(&sys, ys, beta, p)?;
    if !vp(&sys.a[z], &pi).at_least(beta + 1) {
        return Err(pre("the extra coordinate needs p^{β+1} | a_z"));
    }
    if nu_of(&sys.b[z], &pi) != Some(beta) {
        return Err(pre("the extra coordinate needs v_p(b_z) = β"));
    }
    let f = quot(&sys.b[z], &pi, beta).unwrap();
    let c = -(Int::from(k) * &cs[0]);
    let hp = header_offset_pair(&sys.a[0], &sys.a[1], &c, &Int::one(), beta, run.ctx)?;
    let mut kept: Vec<(usize, Int)> = ys.iter().map(|&i| (i, Int::one())).collect();
    kept.push((z, Int::one()));
    contract_header(run, "pair-contract", (&hp.x1, &hp.x2), &kept, beta)?;
    let dsum = ds.iter().fold(Int::one(), |acc, d| acc + d);
    let zval = (p - res(&dsum, p)) % p * inv(res(&f, p), p) % p;
    let mut x = vec![Int::one(); k as usize + 1];
    x.push(Int::from(zval));
    run.tag("aux:pair-lift");
    Ok(Payload::Pair { x, pivot: (k as usize, k as usize + 1) })
}

/// Shifted-pair lift for `β < θ`: a block with `a = p^β c_i` (congruent
/// units) and `p^β | b`, one of the `b/p^β` a unit.
fn shifted_pair(run: &mut Run, ys: &[usize], beta: u64) -> Result<Payload> {
    let p = run.p;
    let pi = run.pint().clone();
    let k = run.ctx.k;
    let sys = run.sys().clone();
    let theta = header_theta(&sys, &pi)?;
    if beta == 0 || beta >= theta {
        return Err(pre("need 1 ≤ β < θ"));
    }
    let cs = block_classes(&sys, ys, beta, p)?;
    let ds = block_linear(&sys, ys, beta, p)?;
    let first = ds.iter().position(|d| res(d, p) != 0).ok_or_else(|| pre("no unit linear coefficient in the block"))?;
    let second = (0..ys.len()).find(|&q| q != first).ok_or_else(|| pre("block needs two coordinates"))?;
    let (c1, c2, d1, d2) = (&cs[first], &cs[second], &ds[first], &ds[second]);
    let u = match nu_of(d2, &pi) {
        None => Int::one(),
        Some(m) => Int::one() - ppow(&pi, m),
    };
    let c = -c1 - ipow(&u, k) * c2;
    let hp = header_offset_pair(&sys.a[0], &sys.a[1], &c, &-d1, beta, run.ctx)?;
    let kept = [(ys[first], Int::one()), (ys[second], Int::one())];
    contract_header(run, "shifted-pair-contract", (&hp.x1, &hp.x2), &kept, beta)?;
    run.tag("aux:shifted-pair");
    Ok(Payload::Pair { x: vec![Int::one(), Int::one(), u], pivot: (1, 2) })
}

/// The boundary case `β = θ`: a block with `a = p^θ c_i` (congruent units)
/// and `p^θ | b`, not all `b/p^θ` divisible by `p`.
fn boundary(run: &mut Run, ys: &[usize], theta: u64) -> Result<Payload> {
    let p = run.p;
    let pi = run.pint().clone();
    let k = run.ctx.k;
    let sys0 = run.sys().clone();
    if header_theta(&sys0, &pi)? != theta {
        return Err(pre("boundary case needs v_p(a_1 + a_2) = β"));
    }
    let cs = block_classes(&sys0, ys, theta, p)?;
    let ds0 = block_linear(&sys0, ys, theta, p)?;
    if ds0.iter().all(|d| res(d, p) == 0) {
        return Err(pre("some block linear coefficient must be exactly divisible by p^β"));
    }
    // Make the block class 1 by scaling the degree equation.
    let cmul = inv(res(&cs[0], p), p);
    if cmul != 1 {
        let st = TransformStep::scaling(
            "unit-class",
            vec![Rat::one(); sys0.s()],
            Rat::from_integer(Int::from(cmul)),
            Rat::one(),
        );
        run.push(st)?;
    }
    let sys = run.sys().clone();
    let ds = block_linear(&sys, ys, theta, p)?;
    let mut order: Vec<usize> = (0..ys.len()).filter(|&q| res(&ds[q], p) != 0).collect();
    let i0 = order.len();
    order.extend((0..ys.len()).filter(|&q| res(&ds[q], p) == 0));
    let dr: Vec<u64> = order.iter().map(|&q| res(&ds[q], p)).collect();
    let a_prime = quot(&(&sys.a[0] + &sys.a[1]), &pi, theta).unwrap();
    let alpha = (p - res(&a_prime, p)) % p;
    // d with a′ + k a_1 d ≡ −2 (mod p), used when x_1 is offset.
    let offset_d = || {
        let num = (2 * p - 2 - res(&a_prime, p)) % p;
        num * inv(res(&(Int::from(k) * &sys.a[0]), p), p) % p
    };
    let one = Int::one();
    let (x1v, nkeep, z, pivot, tag): (Int, usize, Vec<u64>, (usize, usize), &str) = if i0 >= 2 && alpha >= 2 {
        let a = alpha as usize;
        let mut z = vec![1u64; a];
        let rest = (2..a).fold(0u64, |acc, q| (acc + dr[q] * z[q]) % p);
        let target = (p - rest) % p;
        let z1 = (1..p).find(|&v| !(target + p - dr[0] * v % p).is_multiple_of(p)).expect("p ≥ 5");
        z[0] = z1;
        z[1] = (target + p - dr[0] * z1 % p) % p * inv(dr[1], p) % p;
        let pv = (0..a)
            .flat_map(|i| (i + 1..a).map(move |j| (i, j)))
            .find(|&(i, j)| dr[i] * z[i] % p != dr[j] * z[j] % p)
            .ok_or_else(|| Error::Internal("all weighted values coincide".into()))?;
        (one.clone(), a, z, pv, "aux:boundary-i")
    } else if i0 >= 2 && alpha == 1 {
        let d = offset_d();
        let z1 = d * inv(dr[0], p) % p;
        let z2 = (p - 2 * d % p) % p * inv(dr[1], p) % p;
        (&one + ppow(&pi, theta) * Int::from(d), 2, vec![z1, z2], (0, 1), "aux:boundary-ii")
    } else if i0 == 1 && alpha <= p - 2 {
        let a = alpha as usize;
        let mut z = vec![1u64; a + 1];
        z[0] = 0;
        (one.clone(), a + 1, z, (0, 1), "aux:boundary-iii")
    } else {
        let d = offset_d();
        let z1 = (p - d) % p * inv(dr[0], p) % p;
        (&one + ppow(&pi, theta) * Int::from(d), 2, vec![z1, 1], (0, 1), "aux:boundary-iv")
    };
    let kept: Vec<(usize, Int)> = order[..nkeep].iter().map(|&q| (ys[q], Int::one())).collect();
    contract_header(run, "boundary-contract", (&x1v, &one), &kept, theta)?;
    let mut x = vec![Int::one()];
    x.extend(z.iter().map(|&v| Int::from(v)));
    run.tag(tag);
    Ok(Payload::Pair { x, pivot: (pivot.0 + 1, pivot.1 + 1) })
}

/// The deep-block route: with `θ = υk + r`, a block at level `r` whose
/// linear valuations all exceed `θ − υ` is rescaled by `p^υ`; the header is
/// solved along `x_2 = x`, `x_1 = x + h` by a simple root of a polynomial.
fn deep_block(run: &mut Run, ys: &[usize], theta: u64) -> Result<Payload> {
    let p = run.p;
    let pi = run.pint().clone();
    let k = run.ctx.k;
    let sys = run.sys().clone();
    if header_theta(&sys, &pi)? != theta {
        return Err(pre("θ does not match the header"));
    }
    let (ups, r) = (theta / k as u64, theta % k as u64);
    block_classes(&sys, ys, r, p)?;
    if ys.iter().any(|&i| !vp(&sys.b[i], &pi).at_least(theta - ups + 1)) {
        return Err(pre("a block linear valuation is not above θ − υ"));
    }
    let scale = ppow(&pi, ups);
    let groups: Vec<Vec<(usize, Rat)>> = [vec![(0usize, Rat::one())], vec![(1usize, Rat::one())]]
        .into_iter()
        .chain(ys.iter().map(|&i| vec![(i, rat(&scale))]))
        .collect();
    run.push(TransformStep::contraction("deep-block", sys.s(), &groups))?;
    let d = run.sys().clone();
    let zs: Vec<usize> = (2..d.s()).collect();
    let cs = block_classes(&d, &zs, theta, p)?;
    let a_prime = quot(&(&d.a[0] + &d.a[1]), &pi, theta).unwrap();
    let mut units = vec![res(&a_prime, p)];
    units.extend(cs.iter().map(|c| res(c, p)));
    let subset = rooted_zero_subset(&units, p).ok_or_else(|| Error::Internal("no zero subset through a′".into()))?;
    let mut z = vec![Int::zero(); zs.len()];
    for &q in subset.iter().skip(1) {
        z[q - 1] = Int::one();
    }
    let h: Int = -zs.iter().zip(&z).map(|(&i, v)| &d.b[i] * v).sum::<Int>();
    // φ(x) − c with φ(x) = p^{−θ}(a_1 (x + h)^k + a_2 x^k), c = −Σ c_i z_i^k.
    let mut phi = vec![Int::zero(); k as usize + 1];
    let mut binom = Int::one();
    for i in 0..=k {
        phi[i as usize] += &d.a[0] * &binom * ipow(&h, k - i);
        binom = binom * Int::from(k - i) / Int::from(i + 1);
    }
    phi[k as usize] += &d.a[1];
    let pt = ppow(&pi, theta);
    if phi.iter().any(|c| !(c % &pt).is_zero()) {
        return Err(Error::Internal("header polynomial not divisible by p^θ".into()));
    }
    let mut phi: Vec<Int> = phi.iter().map(|c| c / &pt).collect();
    let csum: Int = cs.iter().zip(&z).map(|(c, v)| c * ipow(v, k)).sum();
    phi[0] += csum;
    classic_hensel(&phi, &Int::one(), &pi, 2)?;
    let mut x = vec![&Int::one() + &h, Int::one()];
    x.extend(z);
    run.tag("critical:deep-block");
    Ok(Payload::Newton { x, free: 1, eliminated: Some(0) })
}

// ---------------------------------------------------------------------------
// Critical systems
// ---------------------------------------------------------------------------

/// Valuations `(ν^{(τ)}, μ^{(τ)})` of a block-`j` coordinate after the sweep
/// substitution for `τ = uk + ρ` (blocks `0..=ρ` scaled by `p^{u+1}`, the
/// rest by `p^u`).
pub fn sweep_valuations(j: u64, nu: u64, mu: Valuation, tau: u64, k: u64) -> (u64, Valuation) {
    let (u, rho) = (tau / k, tau % k);
    let w = if j <= rho { u + 1 } else { u };
    let mu = match mu {
        Valuation::Finite(m) => Valuation::Finite(m + w),
        Valuation::Infinite => Valuation::Infinite,
    };
    (nu + k * w, mu)
}

/// The sweep substitution for `τ` as a transform step.
pub fn sweep_step(profile: &CriticalProfile, ctx: &PadicContext, tau: u64) -> TransformStep {
    let k = ctx.k as u64;
    let (u, rho) = (tau / k, tau % k);
    let mut mults = vec![Rat::one(); profile.system.s()];
    for (j, blk) in profile.blocks.iter().enumerate() {
        let w = if j as u64 <= rho { u + 1 } else { u };
        for &i in blk {
            mults[i] = rat(&ppow(&ctx.p, w));
        }
    }
    TransformStep::scaling("sweep", mults, Rat::one(), Rat::one())
}

/// The smallest `τ` at which some coordinate `i ≥ 2` has `ν^{(τ)} ≥ μ^{(τ)}`,
/// scanning `τ` up to `2 max μ + 2k` (a coordinate of block `j` with
/// `μ > j` crosses by `τ = j + k(⌈(μ − j)/(k − 1)⌉ − 1) ≤ 2μ + 2k`); `None` when every linear coefficient
/// outside the header vanishes.
pub fn first_crossing(profile: &CriticalProfile, ctx: &PadicContext) -> Option<u64> {
    let k = ctx.k as u64;
    let sys = &profile.system;
    let entries: Vec<(u64, u64)> = profile
        .blocks
        .iter()
        .enumerate()
        .flat_map(|(j, blk)| blk.iter().map(move |&i| (j as u64, i)))
        .filter_map(|(j, i)| vp(&sys.b[i], &ctx.p).finite().map(|m| (j, m)))
        .collect();
    let max_mu = entries.iter().map(|e| e.1).max()?;
    (0..=2 * max_mu + 2 * k).find(|&tau| {
        entries.iter().any(|&(j, m)| {
            let (nt, mt) = sweep_valuations(j, j, Valuation::Finite(m), tau, k);
            mt <= Valuation::Finite(nt)
        })
    })
}

/// Closed form of [`first_crossing`]: the minimum over coordinates of
/// `j + k(⌈(μ − j)/(k − 1)⌉ − 1)`, or `0` when `μ ≤ j`.
pub fn first_crossing_closed(profile: &CriticalProfile, ctx: &PadicContext) -> Option<u64> {
    let k = ctx.k as u64;
    let sys = &profile.system;
    let mut best: Option<u64> = None;
    for (j, blk) in profile.blocks.iter().enumerate() {
        let j = j as u64;
        for &i in blk {
            let Some(m) = vp(&sys.b[i], &ctx.p).finite() else { continue };
            // After τ the block has w = ⌊(τ − j)/k⌋ + 1 wraps (0 for τ < j);
            // it crosses once w(k − 1) ≥ μ − j.
            let tau = if m <= j { 0 } else { j + k * ((m - j).div_ceil(k - 1) - 1) };
            best = Some(best.map_or(tau, |b| b.min(tau)));
        }
    }
    best
}

fn critical_payload(run: &mut Run, profile: &CriticalProfile) -> Result<Payload> {
    let pi = run.pint().clone();
    let k = run.ctx.k as u64;
    let theta = profile.theta;
    let sys = profile.system.clone();
    let s = sys.s();
    let nu = |i: usize| nu_of(&sys.a[i], &pi).unwrap();
    let mu = |i: usize| vp(&sys.b[i], &pi);
    // The low variable of least level (smallest index on ties).
    let lowest = (2..s).filter(|&i| mu(i) < Valuation::Finite(nu(i))).min_by_key(|&i| (mu(i), i));
    let low_variable = |run: &mut Run, t: usize| -> Result<Payload> {
        let beta = mu(t).finite().unwrap();
        run.tag("critical:low-variable");
        pair_lift(run, &profile.blocks[beta as usize], t, beta)
    };
    if theta < k {
        let ys = &profile.blocks[theta as usize];
        if ys.iter().all(|&i| mu(i) > Valuation::Finite(theta)) {
            return deep_block(run, ys, theta);
        }
        if ys.iter().any(|&i| mu(i) < Valuation::Finite(theta)) {
            let t = lowest.ok_or_else(|| Error::Internal("a low block coordinate was not found".into()))?;
            return low_variable(run, t);
        }
        run.tag("critical:boundary-block");
        return boundary(run, ys, theta);
    }
    if let Some(t) = lowest {
        return low_variable(run, t);
    }
    if let Some(t) = (2..s).find(|&i| nu(i) >= 1 && mu(i) == Valuation::Finite(nu(i))) {
        let beta = nu(t);
        let mut ys = vec![t];
        ys.extend(profile.blocks[beta as usize].iter().copied().filter(|&i| i != t));
        run.tag("critical:balanced-variable");
        return shifted_pair(run, &ys, beta);
    }
    run.tag("critical:sweep");
    let deep = |run: &mut Run| deep_block(run, &profile.blocks[(theta % k) as usize], theta);
    let t = match first_crossing(profile, run.ctx) {
        Some(t) if t + k <= theta => t,
        _ => return deep(run),
    };
    run.push(sweep_step(profile, run.ctx, t))?;
    let rho1 = (t % k) as usize;
    let ys = profile.blocks[rho1].clone();
    let cur = run.sys().clone();
    let beta = ys
        .iter()
        .filter_map(|&i| vp(&cur.b[i], &pi).finite())
        .min()
        .ok_or_else(|| Error::Internal("crossing block has no linear coefficient".into()))?;
    if beta < t + k {
        let z = *ys.iter().find(|&&i| vp(&cur.b[i], &pi) == Valuation::Finite(beta)).unwrap();
        run.tag("critical:sweep-pair");
        pair_lift(run, &profile.blocks[(beta % k) as usize], z, beta)
    } else if beta < theta {
        shifted_pair(run, &ys, beta)
    } else {
        boundary(run, &ys, theta)
    }
}

/// Solves a critical system; the outcome's transcript starts at
/// `profile.system`.
pub fn critical_outcome(profile: &CriticalProfile, ctx: &PadicContext) -> Result<EngineOutcome> {
    let p = require_pm1(ctx)?;
    if !profile.is_critical() {
        return Err(Error::PreconditionViolated(format!("not a critical system: {:?}", profile.flags)));
    }
    let mut run = Run::new(&profile.system, ctx, p);
    let payload = critical_payload(&mut run, profile)?;
    run.finish(payload)
}

/// Solves a critical system reached from an input by `reach`, returning a
/// certificate on that input with a lifted solution to precision `m`.
pub fn solve_critical(
    profile: &CriticalProfile,
    reach: &Transcript,
    ctx: &PadicContext,
    m: u32,
) -> Result<Certificate> {
    if reach.derived != profile.system {
        return Err(Error::InvalidInput("transcript does not end at the critical system".into()));
    }
    let out = critical_outcome(profile, ctx)?;
    let mut t = reach.clone();
    t.extend(&out.transcript)?;
    let mut cert = Certificate::new(ctx, t, out.payload, out.route);
    if m > 0 {
        cert.precision_demo = Some(precision_demo(&cert, m)?);
    }
    Ok(cert)
}

/// The engine entry point: the reduction ladder followed, when needed, by
/// the critical-system solver.
pub fn solve_pm1(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<EngineOutcome> {
    match reduce_to_critical(sys, ctx)? {
        Reduction::Solved(cert) => {
            Ok(EngineOutcome { transcript: cert.transcript, payload: cert.payload, route: cert.route })
        }
        Reduction::Critical { profile, transcript, mut route } => {
            let out = critical_outcome(&profile, ctx)?;
            let mut t = transcript;
            t.extend(&out.transcript)?;
            route.extend(out.route);
            Ok(EngineOutcome { transcript: t, payload: out.payload, route })
        }
    }
}

// ---------------------------------------------------------------------------
// Stand-alone reduced-form solvers
// ---------------------------------------------------------------------------

/// A lifted solution of a reduced header system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxSolution {
    /// The reduced system `(a_1, a_2, p^β c, …; 1, −1, p^β d, …)`.
    pub system: DiagLinSystem,
    /// The certificate the solution came from.
    pub certificate: Certificate,
    /// The lifted, pulled-back primitive solution.
    pub demo: PrecisionDemo,
}

fn aux_finish(run: Run, payload: Payload, ctx: &PadicContext, m: u32) -> Result<AuxSolution> {
    let system = run.t.source.clone();
    let out = run.finish(payload)?;
    let cert = Certificate::new(ctx, out.transcript, out.payload, out.route);
    let demo = precision_demo(&cert, m)?;
    Ok(AuxSolution { system, certificate: cert, demo })
}

fn header_system(a1: &Int, a2: &Int, blocks: &[(Int, Int)]) -> Result<DiagLinSystem> {
    let mut a = vec![a1.clone(), a2.clone()];
    let mut b = vec![Int::one(), -Int::one()];
    for (x, y) in blocks {
        a.push(x.clone());
        b.push(y.clone());
    }
    DiagLinSystem::new(a, b)
}

/// Solves `a_1x_1^k + a_2x_2^k + p^β Σ c_i y_i^k + p^{β+1} e z^k = 0`,
/// `x_1 − x_2 + p^β Σ d_i y_i + p^β f z = 0` to precision `m`.
///
/// Requires `k` congruent units `c_i`, `p ∤ f` and `1 ≤ β < v_p(a_1 + a_2)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_pair_lift(
    a1: &Int,
    a2: &Int,
    c: &[Int],
    d: &[Int],
    e: &Int,
    f: &Int,
    beta: u64,
    ctx: &PadicContext,
    m: u32,
) -> Result<AuxSolution> {
    let p = require_pm1(ctx)?;
    let k = ctx.k as usize;
    if c.len() != k || d.len() != k {
        return Err(pre("c and d must have k entries"));
    }
    if res(f, p) == 0 || res(&c[0], p) == 0 {
        return Err(pre("need p ∤ c_1 f"));
    }
    let pb = ppow(&ctx.p, beta);
    let mut cols: Vec<(Int, Int)> = c.iter().zip(d).map(|(ci, di)| (&pb * ci, &pb * di)).collect();
    cols.push((&pb * &ctx.p * e, &pb * f));
    let sys = header_system(a1, a2, &cols)?;
    let mut run = Run::new(&sys, ctx, p);
    let ys: Vec<usize> = (2..2 + k).collect();
    let payload = pair_lift(&mut run, &ys, 2 + k, beta)?;
    aux_finish(run, payload, ctx, m)
}

/// Solves `a_1x_1^k + a_2x_2^k + p^β Σ c_i y_i^k = 0`,
/// `x_1 − x_2 + p^β Σ d_i y_i = 0` to precision `m`, for `1 ≤ β ≤ θ`.
///
/// Requires congruent units `c_i` and `p ∤ d_1` (for `β = θ`: some
/// `p ∤ d_i`).  `β < θ` uses the shifted pair; `β = θ` the four-way
/// boundary analysis.
pub fn solve_shifted_pair(
    a1: &Int,
    a2: &Int,
    c: &[Int],
    d: &[Int],
    beta: u64,
    ctx: &PadicContext,
    m: u32,
) -> Result<AuxSolution> {
    let p = require_pm1(ctx)?;
    let k = ctx.k as usize;
    if c.len() != k || d.len() != k {
        return Err(pre("c and d must have k entries"));
    }
    let theta = nu_of(&(a1 + a2), &ctx.p).ok_or_else(|| pre("header degree coefficients cancel"))?;
    if beta == 0 || beta > theta {
        return Err(pre("need 1 ≤ β ≤ θ"));
    }
    if beta < theta && res(&d[0], p) == 0 {
        return Err(pre("need p ∤ d_1"));
    }
    let pb = ppow(&ctx.p, beta);
    let cols: Vec<(Int, Int)> = c.iter().zip(d).map(|(ci, di)| (&pb * ci, &pb * di)).collect();
    let sys = header_system(a1, a2, &cols)?;
    let mut run = Run::new(&sys, ctx, p);
    let ys: Vec<usize> = (2..2 + k).collect();
    let payload = if beta < theta { shifted_pair(&mut run, &ys, beta)? } else { boundary(&mut run, &ys, beta)? };
    aux_finish(run, payload, ctx, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use crate::certificate::verify;
    use crate::generators::{critical_branch_plans, critical_system, spread_system};
    use crate::normalize::normalize;
    use crate::oracle::{find_nonsingular, CongruenceQuery};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx5() -> PadicContext {
        PadicContext::small(5, 4)
    }

    fn example_critical() -> DiagLinSystem {
        let mut a = vec![6, 19, 1, 1, 1, 1];
        for e in [5, 25, 125] {
            a.extend([e; 4]);
        }
        let mut b = vec![0i64; 18];
        b[0] = 1;
        b[1] = -1;
        DiagLinSystem::from_i64(&a, &b)
    }

    fn certify(out: &EngineOutcome, ctx: &PadicContext) -> Certificate {
        let mut cert = Certificate::new(ctx, out.transcript.clone(), out.payload.clone(), out.route.clone());
        cert.precision_demo = Some(precision_demo(&cert, 10).unwrap());
        let rep = verify(&cert, &out.transcript.source);
        assert!(rep.ok, "{:?} on route {:?}", rep.failure, out.route);
        cert
    }

    #[test]
    fn example_is_critical_with_theta_two() {
        let ctx = ctx5();
        let sys = example_critical();
        let Reduction::Critical { profile, transcript, .. } = reduce_to_critical(&sys, &ctx).unwrap() else {
            panic!("expected a critical system")
        };
        assert_eq!(profile.theta, 2);
        let f = profile.flags;
        assert!(f.header && f.block_counts && f.level0_shape && f.block_classes && f.no_low_level0);
        assert_eq!(profile.classes, vec![1, 1, 1, 1]);
        assert_eq!(profile.blocks[2], vec![10, 11, 12, 13]);
        let cert = solve_critical(&profile, &transcript, &ctx, 10).unwrap();
        assert!(cert.route.contains(&"critical:deep-block".to_string()));
        assert!(verify(&cert, &sys).ok);
    }

    #[test]
    fn header_offset_pair_example() {
        let ctx = ctx5();
        let hp = header_offset_pair(&int(6), &int(19), &int(1), &int(1), 1, &ctx).unwrap();
        assert_eq!((hp.x1.clone(), hp.x2.clone()), (int(9), int(4)));
        // 6·9⁴ + 19·4⁴ = 39366 + 4864 = 44230 = 5 · 8846.
        assert_eq!(hp.c_prime, int(8846));
        let bad = header_offset_pair(&int(6), &int(19), &int(1), &int(5), 1, &ctx);
        assert!(matches!(bad, Err(Error::PreconditionViolated(_))));
        let too_deep = header_offset_pair(&int(6), &int(19), &int(1), &int(1), 2, &ctx);
        assert!(matches!(too_deep, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn pair_lift_example_and_preconditions() {
        let ctx = ctx5();
        let ones = vec![int(1); 4];
        let zeros = vec![int(0); 4];
        let sol = solve_pair_lift(&int(6), &int(19), &ones, &zeros, &int(0), &int(1), 1, &ctx, 8).unwrap();
        assert!(sol.demo.residual_a.at_least(8) && sol.demo.residual_b.at_least(8));
        assert!(sol.demo.original_x.iter().any(|v| !v.is_zero()));
        assert_eq!(sol.system.eval_b(&sol.demo.original_x) % ctx.pe(8), int(0));
        let f5 = solve_pair_lift(&int(6), &int(19), &ones, &zeros, &int(0), &int(5), 1, &ctx, 8);
        assert!(matches!(f5, Err(Error::PreconditionViolated(_))));
        let mixed = vec![int(1), int(2), int(1), int(1)];
        let c_bad = solve_pair_lift(&int(6), &int(19), &mixed, &zeros, &int(0), &int(1), 1, &ctx, 8);
        assert!(matches!(c_bad, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn shifted_pair_examples() {
        let ctx = ctx5();
        let ones = vec![int(1); 4];
        let sol = solve_shifted_pair(&int(6), &int(19), &ones, &ones, 1, &ctx, 8).unwrap();
        assert!(sol.demo.residual_a.at_least(8) && sol.demo.residual_b.at_least(8));
        assert!(sol.certificate.route.contains(&"aux:shifted-pair".to_string()));
        // β = θ = 2, α ≡ −1 ≡ 4, two unit d's: the first boundary case.
        let d = vec![int(1), int(1), int(0), int(0)];
        let sol = solve_shifted_pair(&int(6), &int(19), &ones, &d, 2, &ctx, 8).unwrap();
        assert!(sol.certificate.route.contains(&"aux:boundary-i".to_string()));
        // The witness is re-found by the oracle on the reduced congruence.
        let derived = sol.certificate.transcript.derived.clone();
        let rep = find_nonsingular(&CongruenceQuery::new(derived, ctx.clone())).unwrap();
        assert!(rep.found);
        let zero_d = vec![int(5), int(0), int(10), int(0)];
        let bad = solve_shifted_pair(&int(6), &int(19), &ones, &zero_d, 2, &ctx, 8);
        assert!(matches!(bad, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn ladder_shortcuts() {
        let ctx = ctx5();
        // Seven level-0 coordinates with a unit linear coefficient among them.
        let sys = DiagLinSystem::from_i64(&[1, 2, 3, 4, 1, 2, 3, 5, 10], &[1, 0, 2, 0, 0, 0, 0, 5, 5]);
        let Reduction::Solved(cert) = reduce_to_critical(&sys, &ctx).unwrap() else { panic!() };
        assert_eq!(cert.route, vec!["pm1:many-level0".to_string()]);
        assert!(find_nonsingular(&CongruenceQuery::new(sys.clone(), ctx.clone())).unwrap().found);
        // A unit linear coefficient on a coordinate with p | a.
        let sys = DiagLinSystem::from_i64(&[1, 1, 1, 1, 1, 5], &[0, 0, 0, 0, 0, 1]);
        let Reduction::Solved(cert) = reduce_to_critical(&sys, &ctx).unwrap() else { panic!() };
        assert_eq!(cert.route, vec!["pm1:low-level0".to_string()]);
        assert!(find_nonsingular(&CongruenceQuery::new(sys, ctx.clone())).unwrap().found);
        // Wrong degree for the prime.
        assert!(reduce_to_critical(&example_critical(), &PadicContext::small(7, 4)).is_err());
    }

    #[test]
    fn rational_pair_when_header_cancels() {
        let ctx = ctx5();
        let mut sys = example_critical();
        sys.a[1] = int(-6);
        let Reduction::Solved(cert) = reduce_to_critical(&sys, &ctx).unwrap() else { panic!() };
        assert!(cert.route.contains(&"pm1:rational-pair".to_string()));
    }

    #[test]
    fn planted_plans_reach_their_branches() {
        let ctx = ctx5();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (tag, plan) in critical_branch_plans() {
            for _ in 0..4 {
                let sys = critical_system(&plan, &mut rng);
                let profile = CriticalProfile::inspect(&sys, &ctx).unwrap();
                assert!(profile.is_critical(), "{tag}: {:?}", profile.flags);
                assert_eq!(profile.theta, plan.theta);
                let out = critical_outcome(&profile, &ctx).unwrap();
                assert!(out.route.iter().any(|r| r == tag), "{tag} not in {:?}", out.route);
                certify(&out, &ctx);
                // The whole engine on the same input reaches the same branch.
                let full = solve_pm1(&sys, &ctx).unwrap();
                assert!(full.route.iter().any(|r| r == tag));
            }
        }
    }

    #[test]
    fn crossing_scan_agrees_with_closed_form_on_large_mu() {
        let ctx = ctx5();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = critical_branch_plans().into_iter().find(|(t, _)| *t == "critical:deep-block").unwrap().1;
        let mut plan = plan;
        plan.mu = vec![vec![Some(100); 4]; 4];
        let sys = critical_system(&plan, &mut rng);
        let profile = CriticalProfile::inspect(&sys, &ctx).unwrap();
        // With μ = 100 everywhere, block 1 crosses first, at τ = 1 + 4·32:
        // well past max μ + k = 104.
        assert_eq!(first_crossing(&profile, &ctx), Some(129));
        assert_eq!(first_crossing_closed(&profile, &ctx), Some(129));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Sweep valuations: the closed form matches the valuations of the
        /// substituted system, and the scan matches the closed crossing.
        #[test]
        fn sweep_closed_form_matches_substitution(seed in any::<u64>(), tau in 0u64..30) {
            let ctx = ctx5();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu: Vec<Vec<Option<u64>>> = (0..4u64)
                .map(|j| (0..4).map(|_| if rand::Rng::gen_bool(&mut rng, 0.1) { None } else { Some(j + 1 + rand::Rng::gen_range(&mut rng, 0..9)) }).collect())
                .collect();
            let plan = crate::generators::CriticalPlan { p: 5, theta: 9, a_prime: 1, classes: vec![1, 2, 3, 4], mu };
            let sys = critical_system(&plan, &mut rng);
            let profile = CriticalProfile::inspect(&sys, &ctx).unwrap();
            let moved = apply_transform(&sys, 4, &sweep_step(&profile, &ctx, tau)).unwrap();
            for (j, blk) in profile.blocks.iter().enumerate() {
                for &i in blk {
                    let (nt, mt) = sweep_valuations(j as u64, j as u64, vp(&sys.b[i], &ctx.p), tau, 4);
                    prop_assert_eq!(vp(&moved.a[i], &ctx.p), Valuation::Finite(nt));
                    prop_assert_eq!(vp(&moved.b[i], &ctx.p), mt);
                }
            }
            prop_assert_eq!(first_crossing(&profile, &ctx), first_crossing_closed(&profile, &ctx));
        }

        /// Conditioned k = p − 1 systems with s = k² + 2 never hit an
        /// internal error, and every outcome checks.
        #[test]
        fn conditioned_systems_never_fail_internally(seed in any::<u64>(), p7 in any::<bool>()) {
            let ctx = if p7 { PadicContext::small(7, 6) } else { ctx5() };
            let k = ctx.k as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = spread_system(&ctx, k * k + 2, 1000, &mut rng);
            let (rep, _) = normalize(&sys, &ctx).unwrap();
            match solve_pm1(&rep.transcript.derived, &ctx) {
                Ok(out) => { certify(&out, &ctx); }
                Err(Error::Internal(m)) => prop_assert!(false, "internal error: {}", m),
                Err(_) => {}
            }
        }
    }
}
