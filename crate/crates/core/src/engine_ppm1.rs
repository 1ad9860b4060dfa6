//! The engine for `k = p(p − 1)` with `p` odd, where the witness congruence
//! is taken modulo `p²` and every unit has `u^k ≡ 1 mod p²`.
//!
//! Only the coordinates at level 0 (`ν = 0`) and level 1 (`ν = 1`) of a
//! conditioned system matter; the rest are set to zero.  The system is of
//! *type A* when every unit linear coefficient sits at level 0, and of
//! *type B* otherwise.
//!
//! * A *wide* level 0 (at least `p² + 2` coordinates) is solved directly
//!   modulo `p²` by [`solve_mod_p2`].
//! * Otherwise a solution of the level-0 pair modulo `p` fixes an integer
//!   `c = Σ a_i x_i^k / p`.  The remaining congruence
//!   `c + Σ c_j y_j^k ≡ 0 mod p` over the level-1 coordinates is a unit
//!   diagonal.  Type A solves it directly.  Type B first removes the linear
//!   congruence by contracting pairs of unit linear coefficients.
//! * For `p = 3` with three or four level-1 coordinates, all with unit
//!   linear coefficients, the sextic exceptional solver
//!   [`sextic_exceptional`] handles the whole congruence pair at once.
//!
//! Every answer is a pair witness on the engine's input (no transform
//! steps).  Its pivot pairs a coordinate with a unit value at level 0 with
//! either a zeroed unit-linear coordinate (type A) or a low variable
//! (type B).

use crate::arith::{exact_div, ipow, modp, Int};
use crate::certificate::{precision_demo, Certificate, EngineOutcome, Payload};
use crate::combinat::{
    olson_zero_sum, pair_with_nonzero_sum, solve_unit_diagonal_mod_p, solve_unit_pair_mod_p, zero_subset_sum,
};
use crate::error::{Error, Result};
use crate::hensel::{check_witness, HenselWitness};
use crate::system::{pow_mod_u64, stats, DiagLinSystem, PadicContext, SystemType};
use crate::transform::Transcript;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

fn require_ppm1(ctx: &PadicContext) -> Result<u64> {
    let p = ctx.p.to_u64().ok_or(Error::ContextNotApplicable)?;
    if p < 3 || ctx.k as u64 != p * (p - 1) {
        return Err(Error::ContextNotApplicable);
    }
    Ok(p)
}

fn rm(x: &Int, m: u64) -> u64 {
    modp(x, &Int::from(m)).to_u64().expect("residue fits")
}

fn inv(x: u64, p: u64) -> u64 {
    pow_mod_u64(x % p, p - 2, p)
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pre(msg: impl Into<String>) -> Error {
    Error::PreconditionViolated(msg.into())
}

// ---------------------------------------------------------------------------
// The mod-p² pair solver
// ---------------------------------------------------------------------------

/// The pair `Σ c_i x_i^k ≡ 0 mod p²`, `Σ_{i<t} d_i x_i ≡ 0 mod p` with
/// `k = p(p − 1)`, unit `c_i` (`u` of them) and unit `d_i` (`t ≤ u` of them;
/// the linear form only involves the first `t` variables).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModP2Instance {
    /// The odd prime.
    pub p: u64,
    /// Degree coefficients, residues modulo `p²`.
    pub c: Vec<u64>,
    /// Linear coefficients of the first `t` variables, residues modulo `p`.
    pub d: Vec<u64>,
}

/// Which construction [`solve_mod_p2`] used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModP2Branch {
    /// `t ≤ 2`: the first variable is zeroed and a zero subset of the
    /// coefficients from the third on vanishes modulo `p²`.
    SingleLinear,
    /// `t ≥ 3`: a pair of unit-linear variables with a unit coefficient sum
    /// is completed by a subset hitting minus that sum.
    UnitPair,
}

/// A non-singular solution of a [`ModP2Instance`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModP2Solution {
    /// Values in `[0, p)`.
    pub x: Vec<u64>,
    /// A pair whose minor `d_i c_j x_j^{k−1} − d_j c_i x_i^{k−1}` is a unit.
    pub pivot: (usize, usize),
    /// The construction used.
    pub branch: ModP2Branch,
}

impl ModP2Instance {
    fn k(&self) -> u64 {
        self.p * (self.p - 1)
    }

    fn d_at(&self, i: usize) -> u64 {
        self.d.get(i).copied().unwrap_or(0)
    }

    /// Checks the hypotheses of the guaranteed branch.
    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if p < 3 || !crate::arith::is_prime_u64(p) {
            return Err(pre(format!("{p} is not an odd prime")));
        }
        let (u, t) = (self.c.len(), self.d.len());
        if t == 0 || t > u {
            return Err(pre(format!("need 1 ≤ t ≤ u, got t = {t}, u = {u}")));
        }
        if (u as u64) < p * p + 2 {
            return Err(pre(format!("need u ≥ p² + 2 = {}, got {u}", p * p + 2)));
        }
        if self.c.iter().chain(&self.d).any(|v| v % p == 0) {
            return Err(pre("all coefficients must be units"));
        }
        Ok(())
    }

    /// Evaluates both congruences and the pivot minor directly.
    pub fn is_nonsingular_solution(&self, x: &[u64], pivot: (usize, usize)) -> bool {
        let (p, q, k) = (self.p, self.p * self.p, self.k());
        if x.len() != self.c.len() || pivot.0 == pivot.1 || pivot.0 >= x.len() || pivot.1 >= x.len() {
            return false;
        }
        let sa = x.iter().zip(&self.c).fold(0u64, |acc, (xi, ci)| (acc + mulmod(*ci, pow_mod_u64(*xi, k, q), q)) % q);
        let sb = (0..self.d.len()).fold(0u64, |acc, i| (acc + mulmod(self.d[i], x[i], p)) % p);
        let (i, j) = pivot;
        let term = |t: usize| mulmod(self.c[t] % p, pow_mod_u64(x[t] % p, k - 1, p), p);
        let minor = (mulmod(self.d_at(i), term(j), p) + p - mulmod(self.d_at(j), term(i), p)) % p;
        sa == 0 && sb == 0 && minor != 0
    }
}

/// Finds a non-singular solution of the mod-`p²` pair.
///
/// With at most two linear coefficients, `x_1 = 0` and a zero subset (modulo
/// `p²`) of `c_3, c_4, …` gives the solution, pivoted on `x_1` and the first
/// member of the subset.  With three or more, the first three are reordered
/// so that `c_2 + c_3` is a unit, a subset of `c_4, c_5, …` summing to
/// `−c_2 − c_3` is found, and `(x_2, x_3)` are chosen as units solving the
/// remaining linear congruence; the pivot is `(x_1, x_3)`.
pub fn solve_mod_p2(inst: &ModP2Instance) -> Result<ModP2Solution> {
    inst.validate()?;
    let (p, q) = (inst.p, inst.p * inst.p);
    let (u, t) = (inst.c.len(), inst.d.len());
    let sol = if t <= 2 {
        let tail: Vec<u64> = inst.c[2..].iter().map(|v| v % q).collect();
        let j = zero_subset_sum(&tail, q)?;
        let mut x = vec![0u64; u];
        for &r in &j {
            x[r + 2] = 1;
        }
        ModP2Solution { x, pivot: (0, j[0] + 2), branch: ModP2Branch::SingleLinear }
    } else {
        let np = pair_with_nonzero_sum([inst.c[0] % p, inst.c[1] % p, inst.c[2] % p], p)?;
        let (i2, i3) = np.pair;
        let i1 = 3 - i2 - i3;
        let mut head = vec![(inst.c[i2] + inst.c[i3]) % q];
        head.extend(inst.c[3..].iter().map(|v| v % q));
        let sub = zero_subset_sum(&head, q)?;
        let mut x = vec![0u64; u];
        let mut big_d = 0u64;
        for &r in sub.iter().skip(1) {
            let idx = r + 2;
            x[idx] = 1;
            big_d = (big_d + p - inst.d_at(idx) % p) % p;
        }
        let (d2, d3) = (inst.d[i2] % p, inst.d[i3] % p);
        let (x2, x3) = (1..p)
            .find_map(|x2| {
                let x3 = mulmod((big_d + p - mulmod(d2, x2, p)) % p, inv(d3, p), p);
                (x3 != 0).then_some((x2, x3))
            })
            .ok_or_else(|| Error::Internal("no unit pair solves the linear congruence".into()))?;
        x[i2] = x2;
        x[i3] = x3;
        ModP2Solution { x, pivot: (i1, i3), branch: ModP2Branch::UnitPair }
    };
    if !inst.is_nonsingular_solution(&sol.x, sol.pivot) {
        return Err(Error::Internal("mod-p² construction fails its own check".into()));
    }
    Ok(sol)
}

// ---------------------------------------------------------------------------
// The sextic exceptional solver (p = 3, k = 6)
// ---------------------------------------------------------------------------

/// How the three level-1 variables are tied to a single parameter `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SexticCase {
    /// All `c_j` and all `d_j` congruent: `y = (z, z, −z)` up to order.
    EqualClassesEqualLinear,
    /// All `c_j` congruent, the `d_j` not: `y = (z, z, z)`.
    EqualClassesMixedLinear,
    /// `c_1 ≡ c_2 ≡ −c_3` and a `d` of the pair matches `d_3`: `y = (z, 0, z)` up to order.
    MixedClassesMatchedLinear,
    /// `c_1 ≡ c_2 ≡ −c_3` and `d_1 ≡ d_2 ≡ −d_3`: `y = (z, 0, −z)`.
    MixedClassesOppositeLinear,
}

/// A solution of the sextic exceptional pair
/// `Σ a_i x_i^6 + 3 Σ c_j y_j^6 ≡ 0 mod 9`, `Σ b_i x_i + Σ d_j y_j ≡ 0 mod 3`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SexticSolution {
    /// The nine `x` values in `[0, 3)`; not all zero.
    pub x: Vec<u64>,
    /// The three `y` values in `[0, 3)`.
    pub y: Vec<u64>,
    /// `y = pattern · z` with `pattern_j ∈ {−1, 0, 1}`.
    pub pattern: [i8; 3],
    /// The parameter.
    pub z: u64,
    /// Which case of the class analysis applied.
    pub case: SexticCase,
    /// True when the zero subset modulo 9 came from the exhaustive scan
    /// rather than the sumset construction.
    pub scanned: bool,
}

/// Nontrivial `x ∈ {0, 1, 2}⁹` (not all divisible by 3) with
/// `Σ a_i x_i^6 ≡ 0 mod 9`, by exhaustive enumeration of the `3⁹` points.
pub fn sextic_zero_scan(a: &[u64]) -> Option<Vec<u64>> {
    let n = a.len() as u32;
    (1..3u64.pow(n)).find_map(|code| {
        let x: Vec<u64> = (0..n).map(|i| (code / 3u64.pow(i)) % 3).collect();
        let s = x.iter().zip(a).fold(0u64, |acc, (xi, ai)| (acc + ai * pow_mod_u64(*xi, 6, 9)) % 9);
        (s == 0).then_some(x)
    })
}

fn sextic_pattern(c: [u64; 3], d: [u64; 3]) -> ([i8; 3], SexticCase) {
    let all_eq = |v: [u64; 3]| v[0] == v[1] && v[1] == v[2];
    // The index whose class differs from the other two.
    let odd_one = |v: [u64; 3]| (0..3).find(|&i| v[(i + 1) % 3] == v[(i + 2) % 3]).expect("two of three classes agree");
    if all_eq(c) {
        if all_eq(d) {
            return ([1, 1, -1], SexticCase::EqualClassesEqualLinear);
        }
        return ([1, 1, 1], SexticCase::EqualClassesMixedLinear);
    }
    let m = odd_one(c);
    let (i1, i2) = ((m + 1) % 3, (m + 2) % 3);
    let mut pat = [0i8; 3];
    if d[i1] == d[m] {
        pat[i1] = 1;
        pat[m] = 1;
        (pat, SexticCase::MixedClassesMatchedLinear)
    } else if d[i2] == d[m] {
        pat[i2] = 1;
        pat[m] = 1;
        (pat, SexticCase::MixedClassesMatchedLinear)
    } else {
        pat[i1] = 1;
        pat[m] = -1;
        (pat, SexticCase::MixedClassesOppositeLinear)
    }
}

/// Solves the sextic exceptional pair with some `x_i` a unit.
///
/// The classes of `c` and `d` modulo 3 select a pattern tying the `y_j` to
/// one parameter `z` so that the `y` part of the degree congruence vanishes
/// and the `y` part of the linear congruence is a unit multiple of `z`.  The
/// nine `a_i` are units modulo 3, hence modulo 9, so a zero subset modulo 9
/// exists; `z` then solves the linear congruence.
pub fn sextic_exceptional(a: &[Int], b: &[Int], c: &[Int], d: &[Int]) -> Result<SexticSolution> {
    if a.len() != 9 || b.len() != 9 || c.len() != 3 || d.len() != 3 {
        return Err(pre("need nine (a, b) and three (c, d) coefficients"));
    }
    if a.iter().chain(c).chain(d).any(|v| rm(v, 3) == 0) {
        return Err(pre("a, c and d must be units modulo 3"));
    }
    let cr = [rm(&c[0], 3), rm(&c[1], 3), rm(&c[2], 3)];
    let dr = [rm(&d[0], 3), rm(&d[1], 3), rm(&d[2], 3)];
    let (pattern, case) = sextic_pattern(cr, dr);
    let a9: Vec<u64> = a.iter().map(|v| rm(v, 9)).collect();
    let (x, scanned) = match zero_subset_sum(&a9, 9) {
        Ok(j) => {
            let mut x = vec![0u64; 9];
            for i in j {
                x[i] = 1;
            }
            (x, false)
        }
        Err(_) => (sextic_zero_scan(&a9).ok_or_else(|| Error::Internal("no sextic zero modulo 9".into()))?, true),
    };
    let lin = pattern.iter().zip(&dr).fold(0i64, |acc, (e, dj)| acc + *e as i64 * *dj as i64).rem_euclid(3) as u64;
    if lin == 0 {
        return Err(Error::Internal("pattern leaves no linear term in z".into()));
    }
    let bx = x.iter().zip(b).fold(0u64, |acc, (xi, bi)| (acc + xi * rm(bi, 3)) % 3);
    let z = mulmod((3 - bx) % 3, inv(lin, 3), 3);
    let y: Vec<u64> = pattern.iter().map(|e| (*e as i64 * z as i64).rem_euclid(3) as u64).collect();
    let sol = SexticSolution { x, y, pattern, z, case, scanned };
    if !sextic_holds(a, b, c, d, &sol) {
        return Err(Error::Internal("sextic construction fails its own check".into()));
    }
    Ok(sol)
}

fn sextic_holds(a: &[Int], b: &[Int], c: &[Int], d: &[Int], sol: &SexticSolution) -> bool {
    let xs: Vec<Int> = sol.x.iter().map(|v| Int::from(*v)).collect();
    let ys: Vec<Int> = sol.y.iter().map(|v| Int::from(*v)).collect();
    let deg: Int = a.iter().zip(&xs).map(|(ai, xi)| ai * ipow(xi, 6)).sum::<Int>()
        + Int::from(3) * c.iter().zip(&ys).map(|(ci, yi)| ci * ipow(yi, 6)).sum::<Int>();
    let lin: Int =
        b.iter().zip(&xs).map(|(bi, xi)| bi * xi).sum::<Int>() + d.iter().zip(&ys).map(|(di, yi)| di * yi).sum::<Int>();
    rm(&deg, 9) == 0 && rm(&lin, 3) == 0 && sol.x.iter().any(|v| v % 3 != 0)
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

/// Level-0 and level-1 coordinates of a conditioned system.
struct Layout {
    p: u64,
    level0: Vec<usize>,
    level1: Vec<usize>,
    system_type: SystemType,
    /// A coordinate with `μ = 0 < ν` (type B only).
    low: Option<usize>,
}

impl Layout {
    fn of(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<Self> {
        let p = require_ppm1(ctx)?;
        let st = stats(sys, ctx);
        let at = |lvl: u64| -> Vec<usize> { (0..sys.s()).filter(|&i| st.nu[i].finite() == Some(lvl)).collect() };
        let (level0, level1) = (at(0), at(1));
        let k = ctx.k as usize;
        if level0.len() < k + 1 || level0.len() + level1.len() < 2 * k + 1 {
            return Err(Error::NotApplicable(format!(
                "need at least {} level-0 and {} level-0/1 coordinates, got {} and {}",
                k + 1,
                2 * k + 1,
                level0.len(),
                level0.len() + level1.len()
            )));
        }
        let low = (0..sys.s()).find(|&i| st.low_flags[i] && st.mu[i].finite() == Some(0));
        Ok(Layout { p, level0, level1, system_type: st.system_type, low })
    }

    fn unit_b(&self, sys: &DiagLinSystem, i: usize) -> bool {
        rm(&sys.b[i], self.p) != 0
    }
}

/// A partial assignment under construction.
struct Draft<'a> {
    sys: &'a DiagLinSystem,
    ctx: &'a PadicContext,
    x: Vec<Int>,
    route: Vec<String>,
}

impl<'a> Draft<'a> {
    fn new(sys: &'a DiagLinSystem, ctx: &'a PadicContext, route: &str) -> Self {
        Draft { sys, ctx, x: vec![Int::zero(); sys.s()], route: vec![route.to_string()] }
    }

    fn set(&mut self, idx: &[usize], vals: &[u64]) {
        for (i, v) in idx.iter().zip(vals) {
            self.x[*i] = Int::from(*v);
        }
    }

    fn tag(&mut self, t: &str) {
        self.route.push(t.to_string());
    }

    fn finish(self, pivot: (usize, usize)) -> Result<EngineOutcome> {
        let w = HenselWitness { x: self.x.clone(), pivot, context: self.ctx.clone(), system: self.sys.clone() };
        if let Some(f) = check_witness(&w).failure {
            return Err(Error::Internal(format!("constructed witness fails its check: {f}")));
        }
        Ok(EngineOutcome {
            transcript: Transcript::new(self.sys.clone(), self.ctx.k),
            payload: Payload::Pair { x: self.x, pivot },
            route: self.route,
        })
    }
}

fn branch_tag(b: ModP2Branch) -> &'static str {
    match b {
        ModP2Branch::SingleLinear => "mod-p2:single-linear",
        ModP2Branch::UnitPair => "mod-p2:unit-pair",
    }
}

/// Solves the wide level 0 modulo `p²` with every other coordinate zero;
/// unit linear coefficients go first.  Returns `None` when level 0 has no
/// unit linear coefficient.
fn wide_level0(d: &mut Draft, lay: &Layout) -> Result<Option<(usize, usize)>> {
    let p = lay.p;
    let q = p * p;
    let (mut idx, rest): (Vec<usize>, Vec<usize>) = lay.level0.iter().partition(|&&i| lay.unit_b(d.sys, i));
    if idx.is_empty() {
        return Ok(None);
    }
    let t = idx.len();
    idx.extend(rest);
    let inst = ModP2Instance {
        p,
        c: idx.iter().map(|&i| rm(&d.sys.a[i], q)).collect(),
        d: idx[..t].iter().map(|&i| rm(&d.sys.b[i], p)).collect(),
    };
    let sol = solve_mod_p2(&inst)?;
    d.set(&idx, &sol.x);
    d.tag(branch_tag(sol.branch));
    Ok(Some((idx[sol.pivot.0], idx[sol.pivot.1])))
}

/// A non-trivial solution modulo `p` of the level-0 pair on `idx`.
fn level0_pair(d: &mut Draft, lay: &Layout, idx: &[usize]) -> Result<Vec<u64>> {
    let p = lay.p;
    let a: Vec<u64> = idx.iter().map(|&i| rm(&d.sys.a[i], p)).collect();
    let b: Vec<u64> = idx.iter().map(|&i| rm(&d.sys.b[i], p)).collect();
    let ones = |j: Vec<usize>| {
        let mut x = vec![0u64; idx.len()];
        for r in j {
            x[r] = 1;
        }
        x
    };
    let vals = if p == 3 {
        d.tag("level0:olson");
        let pairs: Vec<(u64, u64)> = a.iter().zip(&b).map(|(x, y)| (*x, *y)).collect();
        ones(olson_zero_sum(&pairs)?)
    } else if b.iter().any(|v| *v != 0) {
        d.tag("level0:pair");
        solve_unit_pair_mod_p(&a, &b, d.ctx, None)?.values
    } else {
        d.tag("level0:diagonal");
        ones(zero_subset_sum(&a, p)?)
    };
    Ok(vals)
}

/// `(Σ_{i∈idx} a_i x_i^k) / p`, exactly.
fn carry(sys: &DiagLinSystem, ctx: &PadicContext, idx: &[usize], vals: &[u64]) -> Result<Int> {
    let s: Int = idx.iter().zip(vals).map(|(&i, &v)| &sys.a[i] * ipow(&Int::from(v), ctx.k)).sum();
    if rm(&s, ctx.p_u64()) != 0 {
        return Err(Error::Internal("level-0 solution does not vanish modulo p".into()));
    }
    Ok(exact_div(&s, &ctx.p))
}

/// Solves `c + Σ e_j w_j^k ≡ 0 mod p` for unit `e_j`; `None` when `p ∤ c`
/// and there are fewer than `p − 1` variables.
fn unit_tail(c: &Int, e: &[u64], ctx: &PadicContext) -> Result<Option<Vec<u64>>> {
    let p = ctx.p_u64();
    let c0 = rm(c, p);
    if c0 == 0 {
        return Ok(Some(vec![0; e.len()]));
    }
    if (e.len() as u64) < p - 1 {
        return Ok(None);
    }
    let mut coeffs = vec![c0];
    coeffs.extend_from_slice(e);
    let sol = solve_unit_diagonal_mod_p(&coeffs, ctx)?;
    if sol.values.first() != Some(&1) {
        return Err(Error::Internal("diagonal solver did not keep the constant term".into()));
    }
    Ok(Some(sol.values[1..].to_vec()))
}

fn unit_x(d: &Draft, idx: &[usize], p: u64) -> Result<usize> {
    idx.iter().copied().find(|&i| rm(&d.x[i], p) != 0).ok_or_else(|| Error::Internal("no unit value at level 0".into()))
}

fn level1_classes(sys: &DiagLinSystem, ctx: &PadicContext, idx: &[usize]) -> Vec<u64> {
    idx.iter().map(|&i| rm(&exact_div(&sys.a[i], &ctx.p), ctx.p_u64())).collect()
}

fn type_a(sys: &DiagLinSystem, ctx: &PadicContext, lay: &Layout) -> Result<EngineOutcome> {
    let p = lay.p;
    if lay.level0.len() as u64 >= p * p + 2 {
        let mut d = Draft::new(sys, ctx, "ppm1:type-a-wide");
        let pivot = wide_level0(&mut d, lay)?.ok_or_else(|| Error::Internal("type A without a level-0 unit".into()))?;
        return d.finish(pivot);
    }
    let mut d = Draft::new(sys, ctx, "ppm1:type-a-split");
    let i0 = *lay
        .level0
        .iter()
        .find(|&&i| lay.unit_b(sys, i))
        .ok_or_else(|| Error::Internal("type A without a level-0 unit".into()))?;
    let rest: Vec<usize> = lay.level0.iter().copied().filter(|&i| i != i0).collect();
    let vals = level0_pair(&mut d, lay, &rest)?;
    d.set(&rest, &vals);
    let c = carry(sys, ctx, &rest, &vals)?;
    let e = level1_classes(sys, ctx, &lay.level1);
    let ys = unit_tail(&c, &e, ctx)?.ok_or_else(|| Error::Internal("too few level-1 coordinates".into()))?;
    d.tag(if rm(&c, p) == 0 { "tail:zero" } else { "tail:diagonal" });
    d.set(&lay.level1, &ys);
    let j = unit_x(&d, &rest, p)?;
    d.finish((i0, j))
}

/// Pairs up unit-linear level-1 coordinates so that each pair has a unit
/// class sum; one or two are left over.
fn pair_up(idx: &[usize], cls: &[u64], p: u64) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
    let mut pool: Vec<usize> = (0..idx.len()).collect();
    let mut pairs = Vec::new();
    while pool.len() >= 3 {
        let np = pair_with_nonzero_sum([cls[pool[0]], cls[pool[1]], cls[pool[2]]], p)?;
        let (u, v) = (pool[np.pair.0], pool[np.pair.1]);
        pairs.push((u, v));
        pool.retain(|&r| r != u && r != v);
    }
    Ok((pairs, pool))
}

/// The level-1 phase of type B for a fixed carry `c`: returns the `y`
/// values (aligned with `level1`), or `None` when the worst-case count of
/// tail variables falls short.
fn type_b_tail(
    sys: &DiagLinSystem,
    ctx: &PadicContext,
    lay: &Layout,
    c: &Int,
    tags: &mut Vec<String>,
) -> Result<Option<Vec<u64>>> {
    let p = lay.p;
    let cls = level1_classes(sys, ctx, &lay.level1);
    let dl: Vec<u64> = lay.level1.iter().map(|&i| rm(&sys.b[i], p)).collect();
    let unit: Vec<usize> = (0..lay.level1.len()).filter(|&r| dl[r] != 0).collect();
    let plain: Vec<usize> = (0..lay.level1.len()).filter(|&r| dl[r] == 0).collect();
    let mut y = vec![0u64; lay.level1.len()];
    if unit.len() <= 2 {
        tags.push("ppm1:type-b-few-linear".into());
        let e: Vec<u64> = plain.iter().map(|&r| cls[r]).collect();
        let Some(w) = unit_tail(c, &e, ctx)? else { return Ok(None) };
        for (r, v) in plain.iter().zip(w) {
            y[*r] = v;
        }
        return Ok(Some(y));
    }
    tags.push("ppm1:type-b-paired".into());
    let ucls: Vec<u64> = unit.iter().map(|&r| cls[r]).collect();
    let (pairs, _left) = pair_up(&unit, &ucls, p)?;
    let mut e: Vec<u64> = pairs.iter().map(|&(u, v)| (ucls[u] + ucls[v]) % p).collect();
    e.extend(plain.iter().map(|&r| cls[r]));
    if p >= 5 && (e.len() as u64) < p - 1 {
        return Err(Error::Internal(format!("paired congruence has {} < p − 1 variables", e.len())));
    }
    let Some(w) = unit_tail(c, &e, ctx)? else { return Ok(None) };
    for (n, &(u, v)) in pairs.iter().enumerate() {
        let z = w[n];
        let (ru, rv) = (unit[u], unit[v]);
        y[ru] = mulmod(dl[rv], z, p);
        y[rv] = mulmod(p - dl[ru], z, p);
    }
    for (r, v) in plain.iter().zip(&w[pairs.len()..]) {
        y[*r] = *v;
    }
    Ok(Some(y))
}

fn type_b(sys: &DiagLinSystem, ctx: &PadicContext, lay: &Layout) -> Result<EngineOutcome> {
    let p = lay.p;
    let q = p * p;
    let low = lay.low.ok_or_else(|| Error::Internal("type B without a low variable".into()))?;
    if lay.level0.len() as u64 >= q + 2 {
        let mut d = Draft::new(sys, ctx, "ppm1:type-b-wide");
        if let Some(pivot) = wide_level0(&mut d, lay)? {
            return d.finish(pivot);
        }
        let mut d = Draft::new(sys, ctx, "ppm1:type-b-wide-pure");
        let a: Vec<u64> = lay.level0.iter().map(|&i| rm(&sys.a[i], q)).collect();
        let j = zero_subset_sum(&a, q)?;
        for &r in &j {
            d.x[lay.level0[r]] = Int::from(1);
        }
        return d.finish((low, lay.level0[j[0]]));
    }
    let exceptional = p == 3
        && matches!(lay.level1.len(), 3 | 4)
        && lay.level1.iter().all(|&i| lay.unit_b(sys, i))
        && lay.level0.len() >= 9;
    if exceptional {
        let mut d = Draft::new(sys, ctx, "ppm1:sextic-exceptional");
        let xs = &lay.level0[..9];
        let ys = &lay.level1[..3];
        let pick = |v: &[Int], idx: &[usize]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let c: Vec<Int> = ys.iter().map(|&i| exact_div(&sys.a[i], &ctx.p)).collect();
        let sol = sextic_exceptional(&pick(&sys.a, xs), &pick(&sys.b, xs), &c, &pick(&sys.b, ys))?;
        d.set(xs, &sol.x);
        d.set(ys, &sol.y);
        let j = unit_x(&d, xs, p)?;
        return d.finish((low, j));
    }
    let mut d = Draft::new(sys, ctx, "ppm1:type-b-split");
    let vals = level0_pair(&mut d, lay, &lay.level0)?;
    let c = carry(sys, ctx, &lay.level0, &vals)?;
    let mut tags = Vec::new();
    if let Some(y) = type_b_tail(sys, ctx, lay, &c, &mut tags)? {
        d.route.extend(tags);
        d.set(&lay.level0, &vals);
        d.set(&lay.level1, &y);
        let j = unit_x(&d, &lay.level0, p)?;
        return d.finish((low, j));
    }
    // The tail came up short for this carry (possible only for p = 3): run
    // through other level-0 solutions until the carry is divisible by p or
    // the tail becomes solvable.
    d.tag("ppm1:reselect-level0");
    let n = lay.level0.len().min(16);
    let idx = &lay.level0[..n];
    for mask in 1u32..(1 << n) {
        let vals: Vec<u64> = (0..n).map(|r| ((mask >> r) & 1) as u64).collect();
        let (sa, sb) = idx.iter().zip(&vals).fold((0u64, 0u64), |(sa, sb), (&i, &v)| {
            ((sa + v * rm(&sys.a[i], p)) % p, (sb + v * rm(&sys.b[i], p)) % p)
        });
        if sa != 0 || sb != 0 {
            continue;
        }
        let c = carry(sys, ctx, idx, &vals)?;
        let mut tags = Vec::new();
        if let Some(y) = type_b_tail(sys, ctx, lay, &c, &mut tags)? {
            d.route.extend(tags);
            d.x = vec![Int::zero(); sys.s()];
            d.set(idx, &vals);
            d.set(&lay.level1, &y);
            let j = unit_x(&d, idx, p)?;
            return d.finish((low, j));
        }
    }
    Err(Error::Internal("no level-0 solution leaves a solvable level-1 congruence".into()))
}

/// Solves a conditioned system of type A (all unit linear coefficients at
/// level 0).
pub fn type_a_outcome(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<EngineOutcome> {
    let lay = Layout::of(sys, ctx)?;
    if lay.system_type != SystemType::A {
        return Err(Error::NotApplicable("system is of type B".into()));
    }
    type_a(sys, ctx, &lay)
}

/// Solves a conditioned system of type B (a unit linear coefficient above
/// level 0).
pub fn type_b_outcome(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<EngineOutcome> {
    let lay = Layout::of(sys, ctx)?;
    if lay.system_type != SystemType::B {
        return Err(Error::NotApplicable("system is of type A".into()));
    }
    type_b(sys, ctx, &lay)
}

fn certify(out: EngineOutcome, ctx: &PadicContext, m: u32) -> Result<Certificate> {
    let mut cert = Certificate::new(ctx, out.transcript, out.payload, out.route);
    if m > 0 {
        cert.precision_demo = Some(precision_demo(&cert, m)?);
    }
    Ok(cert)
}

/// Type-A certificate with a lifted solution to precision `m`.
pub fn solve_type_a(sys: &DiagLinSystem, ctx: &PadicContext, m: u32) -> Result<Certificate> {
    certify(type_a_outcome(sys, ctx)?, ctx, m)
}

/// Type-B certificate with a lifted solution to precision `m`.
pub fn solve_type_b(sys: &DiagLinSystem, ctx: &PadicContext, m: u32) -> Result<Certificate> {
    certify(type_b_outcome(sys, ctx)?, ctx, m)
}

/// The engine entry point for a conditioned system.
pub fn solve_ppm1(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<EngineOutcome> {
    let lay = Layout::of(sys, ctx)?;
    match lay.system_type {
        SystemType::A => type_a(sys, ctx, &lay),
        SystemType::B => type_b(sys, ctx, &lay),
    }
}
