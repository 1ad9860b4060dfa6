//! The contraction pipeline: eliminate the linear form by pairing variables,
//! then solve the resulting single diagonal equation by a residue-table
//! search for a Newton-liftable point.  Also hosts the dispatch predicate
//! that routes `(k, p)` to a specialised engine.

use crate::arith::{ppow_rat, rat, vp, Int, Rat, Valuation};
use crate::certificate::{EngineOutcome, Payload};
use crate::error::{Error, Result};
use crate::hensel::{check_newton_witness, NewtonWitness};
use crate::system::{pow_mod_u64, DiagLinSystem, PadicContext};
use crate::transform::{Transcript, TransformStep};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A single diagonal equation `c_1 y_1^k + … + c_t y_t^k = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalEquation {
    /// Coefficients.
    #[serde(with = "crate::serde_util::int_vec")]
    pub c: Vec<Int>,
    /// Degree.
    pub k: u32,
    /// Prime.
    #[serde(with = "crate::serde_util::int_str")]
    pub p: Int,
}

/// Which general argument covers a `(k, p)` pair sent to the contraction route.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractCoverage {
    /// `p = 2`, `k ≥ 5` outside `{8, 16, 32}`.
    TwoAdic,
    /// Odd `p` with `p ∤ k` and `k ≠ p − 1`.
    OddCoprime,
    /// Odd `p` with `p | k` and `k ≠ p(p − 1)`.
    OddDivisible,
    /// Not covered by the general arguments (odd or small degree); attempted anyway.
    Uncovered,
}

/// The engine a `(k, p)` pair is routed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum EngineTag {
    /// `p = 2`, `k ∈ {4, 8, 16, 32}`.
    Pow2,
    /// Odd `p`, `k = p − 1`.
    Pm1,
    /// Odd `p`, `k = p(p − 1)`.
    Ppm1,
    /// Everything else.
    Contract {
        /// Which argument covers the pair (metadata only).
        coverage: ContractCoverage,
        /// Odd degrees lie outside the even-degree theory.
        odd_degree: bool,
    },
}

/// Routes a context to an engine.
pub fn dispatch_case(ctx: &PadicContext) -> EngineTag {
    let p = ctx.p_u64();
    let k = ctx.k as u64;
    if p == 2 && matches!(k, 4 | 8 | 16 | 32) {
        return EngineTag::Pow2;
    }
    if p > 2 && k == p - 1 {
        return EngineTag::Pm1;
    }
    if p > 2 && p.checked_mul(p - 1) == Some(k) {
        return EngineTag::Ppm1;
    }
    let odd_degree = k % 2 == 1;
    let coverage = if odd_degree || k < 4 {
        ContractCoverage::Uncovered
    } else if p == 2 {
        if k >= 5 {
            ContractCoverage::TwoAdic
        } else {
            ContractCoverage::Uncovered
        }
    } else if !k.is_multiple_of(p) {
        ContractCoverage::OddCoprime
    } else if k >= 6 {
        ContractCoverage::OddDivisible
    } else {
        ContractCoverage::Uncovered
    };
    EngineTag::Contract { coverage, odd_degree }
}

/// Pairs variables (unit linear coefficients first, stable) and substitutes
/// `x_{first} = b_{second} y`, `x_{second} = −b_{first} y` (both `y` when both
/// linear coefficients vanish), which kills the linear form identically.
/// An unpaired last variable is zeroed.
pub fn contract_linear(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<(DiagonalEquation, Transcript)> {
    let s = sys.s();
    if s < 2 {
        return Err(Error::PreconditionViolated("contraction needs at least two variables".into()));
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by_key(|&i| vp(&sys.b[i], &ctx.p) != Valuation::Finite(0));
    let mut groups = Vec::new();
    for pair in order.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        let (ui, uj) = if sys.b[i].is_zero() && sys.b[j].is_zero() {
            (Int::one(), Int::one())
        } else {
            (sys.b[j].clone(), -sys.b[i].clone())
        };
        let mut g = Vec::new();
        if !ui.is_zero() {
            g.push((i, rat(&ui)));
        }
        if !uj.is_zero() {
            g.push((j, rat(&uj)));
        }
        groups.push(g);
    }
    let mut t = Transcript::new(sys.clone(), ctx.k);
    t.push(TransformStep::contraction("contract-linear", s, &groups))?;
    if t.derived.b.iter().any(|b| !b.is_zero()) {
        return Err(Error::Internal("contraction left a nonzero linear coefficient".into()));
    }
    Ok((DiagonalEquation { c: t.derived.a.clone(), k: ctx.k, p: ctx.p.clone() }, t))
}

/// The scaling that reduces every `v_p(c_l)` below `k` and rotates the most
/// populated valuation class to valuation zero.
pub fn condition_diagonal(c: &[Int], ctx: &PadicContext) -> TransformStep {
    let k = ctx.k as u64;
    let nus: Vec<Option<u64>> = c.iter().map(|v| vp(v, &ctx.p).finite()).collect();
    let mut counts = vec![0usize; k as usize];
    for n in nus.iter().flatten() {
        counts[(n % k) as usize] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    let r = counts.iter().position(|&n| n == best).unwrap_or(0) as u64;
    let mults = nus
        .iter()
        .map(|n| match n {
            Some(n) => ppow_rat(&ctx.p, -((n / k) as i64) + if n % k < r { 1 } else { 0 }),
            None => Rat::one(),
        })
        .collect();
    TransformStep::scaling("condition-diagonal", mults, ppow_rat(&ctx.p, -(r as i64)), Rat::one())
}

/// Distinct `x^k mod m` values with a representative `x`, split into the
/// values at units and the rest.
fn power_table(k: u32, p: u64, m: u64) -> (BTreeMap<u64, u64>, BTreeMap<u64, u64>) {
    let mut units = BTreeMap::new();
    let mut all = BTreeMap::new();
    for x in 0..m {
        let v = pow_mod_u64(x, k as u64, m);
        all.entry(v).or_insert(x);
        if x % p != 0 {
            units.entry(v).or_insert(x);
        }
    }
    (units, all)
}

/// Searches for `y` with `Σ c_l y_l^k ≡ 0 mod p^{2(v_p(k) + v_p(c_f)) + 1}`
/// and `y_f` a unit, for some index `f`; returns `(y, f)`.
///
/// Candidates `f` are tried in order of increasing `v_p(c_f)`.  The search is
/// a sumset walk with back-pointers over residues, bounded by `budget`.
pub fn search_diagonal(c: &[Int], ctx: &PadicContext, budget: u64) -> Result<Option<(Vec<Int>, usize)>> {
    let p = ctx.p_u64();
    // Dividing out the common content only strengthens the Newton condition
    // on the slice polynomial, whose own content is at least as large.
    let g = c.iter().filter_map(|v| vp(v, &ctx.p).finite()).min().unwrap_or(0);
    let pg = ctx.pe(g);
    let c: Vec<Int> = c.iter().map(|v| crate::arith::exact_div(v, &pg)).collect();
    let c = &c[..];
    let mut cands: Vec<(u64, usize)> =
        c.iter().enumerate().filter_map(|(i, v)| vp(v, &ctx.p).finite().map(|n| (n, i))).collect();
    cands.sort();
    let mut spent = 0u64;
    let mut over_budget = false;
    for (m, f) in cands {
        let e = 2 * (ctx.vpk as u64 + m) + 1;
        let modulus = match p.checked_pow(e as u32).filter(|v| *v <= (1u64 << 24)) {
            Some(v) => v,
            None => {
                over_budget = true;
                continue;
            }
        };
        let (units, all) = power_table(ctx.k, p, modulus);
        let cost = modulus * all.len() as u64 * c.len() as u64;
        if spent + cost > budget {
            over_budget = true;
            continue;
        }
        spent += cost;
        let cm: Vec<u64> = c.iter().map(|v| crate::arith::modp(v, &Int::from(modulus)).to_u64().unwrap()).collect();
        // Targets: −c_f u for unit k-th power residues u.
        let targets: BTreeMap<u64, u64> =
            units.iter().map(|(v, x)| ((modulus - cm[f] * v % modulus) % modulus, *x)).collect();
        const NONE: u32 = u32::MAX;
        let mut layer = vec![NONE; modulus as usize];
        let mut prev = vec![0u64; modulus as usize];
        let mut val = vec![0u64; modulus as usize];
        // Layer index l + 1 records reaching a residue by adding coefficient l.
        layer[0] = 0;
        let mut hit = targets.get(&0).map(|x| (0u64, *x));
        if hit.is_none() {
            for l in (0..c.len()).filter(|&l| l != f && cm[l] != 0) {
                let reached: Vec<u64> = (0..modulus).filter(|&r| layer[r as usize] != NONE).collect();
                for r in reached {
                    for (pw, x) in all.iter().filter(|(pw, _)| **pw != 0) {
                        let nr = ((r as u128 + cm[l] as u128 * *pw as u128) % modulus as u128) as u64;
                        if layer[nr as usize] == NONE {
                            layer[nr as usize] = l as u32 + 1;
                            prev[nr as usize] = r;
                            val[nr as usize] = *x;
                        }
                    }
                }
                if let Some((t, x)) = targets.iter().find(|(t, _)| layer[**t as usize] != NONE) {
                    hit = Some((*t, *x));
                    break;
                }
            }
        }
        if let Some((t, xf)) = hit {
            let mut y = vec![Int::zero(); c.len()];
            y[f] = Int::from(xf);
            let mut r = t;
            while layer[r as usize] != 0 {
                let l = (layer[r as usize] - 1) as usize;
                y[l] = Int::from(val[r as usize]);
                r = prev[r as usize];
            }
            return Ok(Some((y, f)));
        }
    }
    if over_budget {
        return Err(Error::BudgetExceeded(spent));
    }
    Ok(None)
}

/// Solves a diagonal equation: conditions it, searches, and returns the
/// conditioning step with a Newton point `(y, f)` on the conditioned equation.
pub fn solve_diagonal(
    eq: &DiagonalEquation,
    ctx: &PadicContext,
    budget: u64,
) -> Result<Option<(TransformStep, Vec<Int>, usize)>> {
    let step = condition_diagonal(&eq.c, ctx);
    let sys = DiagLinSystem::new(eq.c.clone(), vec![Int::zero(); eq.c.len()])?;
    let cond = crate::transform::apply_transform(&sys, ctx.k, &step)?;
    Ok(search_diagonal(&cond.a, ctx, budget)?.map(|(y, f)| (step, y, f)))
}

/// The full contraction engine on a system.
pub fn solve_contract(sys: &DiagLinSystem, ctx: &PadicContext, budget: u64) -> Result<EngineOutcome> {
    let (eq, mut t) = contract_linear(sys, ctx)?;
    let mut route = vec!["contract".to_string()];
    if let Some(l) = eq.c.iter().position(|c| c.is_zero()) {
        let mut x = vec![Int::zero(); eq.c.len()];
        x[l] = Int::one();
        route.push("vanishing-pair".into());
        return Ok(EngineOutcome { transcript: t, payload: Payload::Exact { x }, route });
    }
    match solve_diagonal(&eq, ctx, budget)? {
        Some((step, y, f)) => {
            t.push(step)?;
            let d = &t.derived;
            if d.eval_a(ctx.k, &y).is_zero() {
                route.push("exact-point".into());
                return Ok(EngineOutcome { transcript: t, payload: Payload::Exact { x: y }, route });
            }
            let w = NewtonWitness { x: y.clone(), free: f, eliminated: None, context: ctx.clone(), system: d.clone() };
            let chk = check_newton_witness(&w);
            if !chk.ok {
                return Err(Error::Internal(format!("diagonal point rejected: {:?}", chk.failure)));
            }
            route.push("newton-point".into());
            Ok(EngineOutcome { transcript: t, payload: Payload::Newton { x: y, free: f, eliminated: None }, route })
        }
        None => Err(Error::NotApplicable("the contracted diagonal equation has no Newton point".into())),
    }
}
