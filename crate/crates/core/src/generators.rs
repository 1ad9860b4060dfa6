//! Seeded generators of test systems.
//!
//! Uniform random systems exercise the full pipeline; *planted* generators
//! build systems with a prescribed valuation structure so that rare branches
//! (deep critical cases in particular) are reached deliberately rather than
//! by rejection sampling.

use crate::arith::{int, ppow, Int};
use crate::system::{DiagLinSystem, PadicContext};
use num_traits::{One, Zero};
use rand::Rng;

/// A system with `s` coordinates whose coefficients are uniform in
/// `[−bound, bound]`.
pub fn uniform_system<R: Rng>(s: usize, bound: i64, rng: &mut R) -> DiagLinSystem {
    let mut draw = || int(rng.gen_range(-bound..=bound));
    let a = (0..s).map(|_| draw()).collect();
    let b = (0..s).map(|_| draw()).collect();
    DiagLinSystem::new(a, b).expect("equal lengths")
}

/// Like [`uniform_system`] but with every coefficient nonzero.
pub fn uniform_nonzero_system<R: Rng>(s: usize, bound: i64, rng: &mut R) -> DiagLinSystem {
    let mut draw = || loop {
        let v = rng.gen_range(-bound..=bound);
        if v != 0 {
            return int(v);
        }
    };
    let a = (0..s).map(|_| draw()).collect();
    let b = (0..s).map(|_| draw()).collect();
    DiagLinSystem::new(a, b).expect("equal lengths")
}

/// Recipe for a critical system with `k = p − 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalPlan {
    /// The prime (`k = p − 1`).
    pub p: u64,
    /// `v_p(a_1 + a_2)`.
    pub theta: u64,
    /// Residue of `(a_1 + a_2)/p^θ` (nonzero).
    pub a_prime: u64,
    /// `classes[j]`: residue of the unit part of the degree coefficients of
    /// block `j` (`classes[0]` is forced to 1).
    pub classes: Vec<u64>,
    /// `mu[j][q]`: linear valuation of the `q`-th coordinate of block `j`
    /// (`None` for a zero coefficient).  Block 0 needs `μ ≥ 1`.
    pub mu: Vec<Vec<Option<u64>>>,
}

fn unit<R: Rng>(p: u64, residue: u64, rng: &mut R) -> Int {
    Int::from(residue % p) + Int::from(p) * Int::from(rng.gen_range(0u64..50))
}

/// Builds the critical system described by `plan`; the random parts are the
/// higher `p`-adic digits of every coefficient and the unit parts of the
/// linear coefficients.
pub fn critical_system<R: Rng>(plan: &CriticalPlan, rng: &mut R) -> DiagLinSystem {
    let p = plan.p;
    let k = (p - 1) as usize;
    let pi = Int::from(p);
    let a1 = unit(p, rng.gen_range(1..p), rng);
    let a2 = -&a1 + ppow(&pi, plan.theta) * unit(p, plan.a_prime, rng);
    let mut a = vec![a1, a2];
    let mut b = vec![Int::one(), -Int::one()];
    for j in 0..k {
        let class = if j == 0 { 1 } else { plan.classes[j] };
        for q in 0..k {
            a.push(ppow(&pi, j as u64) * unit(p, class, rng));
            b.push(match plan.mu[j][q] {
                None => Int::zero(),
                Some(m) => {
                    let sign = if rng.gen_bool(0.5) { Int::one() } else { -Int::one() };
                    sign * ppow(&pi, m) * unit(p, rng.gen_range(1..p), rng)
                }
            });
        }
    }
    DiagLinSystem::new(a, b).expect("equal lengths")
}

/// Planted critical plans for `p = 5`, `k = 4`, each paired with the route
/// tag it is designed to reach; together they cover every branch of the
/// critical solver with `θ ∈ {1, 2, 4, 7}`.
pub fn critical_branch_plans() -> Vec<(&'static str, CriticalPlan)> {
    let n = None;
    let s = Some;
    let classes = vec![1, 2, 3, 4];
    let plan = |theta: u64, a_prime: u64, mu: [[Option<u64>; 4]; 4]| CriticalPlan {
        p: 5,
        theta,
        a_prime,
        classes: classes.clone(),
        mu: mu.iter().map(|r| r.to_vec()).collect(),
    };
    // Boundary cases at θ = 1 sit on block 1 (class 2): scaling the degree
    // equation by 2⁻¹ ≡ 3 gives α ≡ −3a′, so a′ ≡ −2α.
    let ap = |alpha: u64| (5 - (alpha * 2) % 5) % 5;
    vec![
        ("critical:deep-block", plan(2, 1, [[n; 4]; 4])),
        (
            "critical:deep-block",
            plan(2, 3, [[s(1), s(2), n, s(3)], [s(1), s(1), s(2), n], [s(3), n, s(4), s(3)], [s(3), s(4), n, s(5)]]),
        ),
        (
            "critical:low-variable",
            plan(2, 2, [[s(1), s(2), n, s(3)], [s(1), n, s(2), s(4)], [s(1), s(3), s(2), n], [s(3), s(4), n, s(5)]]),
        ),
        (
            "aux:boundary-i",
            plan(
                1,
                ap(2),
                [[s(1), s(2), n, s(3)], [s(1), s(1), s(2), n], [s(2), n, s(3), s(4)], [s(3), s(4), n, s(5)]],
            ),
        ),
        (
            "aux:boundary-ii",
            plan(
                1,
                ap(1),
                [[s(1), s(2), n, s(3)], [s(1), s(1), s(2), n], [s(2), n, s(3), s(4)], [s(3), s(4), n, s(5)]],
            ),
        ),
        (
            "aux:boundary-iii",
            plan(
                1,
                ap(3),
                [[s(1), s(2), n, s(3)], [s(1), s(2), s(3), n], [s(2), n, s(3), s(4)], [s(3), s(4), n, s(5)]],
            ),
        ),
        (
            "aux:boundary-iv",
            plan(
                1,
                ap(4),
                [[s(1), s(2), n, s(3)], [s(1), s(2), s(3), n], [s(2), n, s(3), s(4)], [s(3), s(4), n, s(5)]],
            ),
        ),
        (
            "aux:boundary-i",
            plan(2, 4, [[s(1), s(2), n, s(3)], [s(2), s(3), n, s(2)], [s(2), s(2), s(3), n], [s(4), s(4), n, s(5)]]),
        ),
        (
            "critical:low-variable",
            plan(4, 1, [[s(1), s(2), n, s(3)], [s(2), s(3), n, s(2)], [s(3), s(3), s(4), n], [s(2), s(4), n, s(5)]]),
        ),
        (
            "critical:balanced-variable",
            plan(4, 2, [[s(1), s(2), n, s(3)], [s(2), s(3), n, s(2)], [s(2), s(3), s(3), n], [s(4), s(5), n, s(4)]]),
        ),
        (
            "critical:sweep-pair",
            plan(4, 3, [[s(2), s(4), s(5), n], [s(2), s(3), n, s(2)], [s(3), s(3), s(4), n], [s(4), s(4), s(5), n]]),
        ),
        (
            "critical:sweep",
            plan(4, 1, [[s(3), s(3), s(5), n], [s(2), s(3), n, s(2)], [s(3), s(3), s(4), n], [s(4), s(4), s(5), n]]),
        ),
        (
            "critical:deep-block",
            plan(4, 2, [[s(4), s(5), s(4), n], [s(2), s(3), n, s(2)], [s(3), s(3), s(4), n], [s(4), s(4), s(5), n]]),
        ),
        (
            "aux:shifted-pair",
            plan(7, 1, [[s(4), s(5), s(4), n], [s(4), s(5), n, s(6)], [s(6), s(7), s(6), n], [s(6), s(7), n, s(8)]]),
        ),
        (
            "critical:sweep-pair",
            plan(7, 2, [[s(4), s(5), s(4), n], [s(3), s(5), n, s(6)], [s(6), s(7), s(6), n], [s(6), s(7), n, s(8)]]),
        ),
        (
            "aux:boundary-ii",
            plan(7, 1, [[s(5), s(5), s(6), n], [s(5), s(6), n, s(5)], [s(6), s(7), s(6), n], [s(6), s(6), s(7), n]]),
        ),
        (
            "aux:boundary-iii",
            plan(7, 3, [[s(5), s(5), s(6), n], [s(5), s(6), n, s(5)], [s(6), s(7), s(6), n], [s(6), s(7), s(8), n]]),
        ),
    ]
}

/// A conditioned-form system for `k = p − 1` with `s` coordinates: random
/// nonzero coefficients, with valuations spread over `0..k`.
pub fn spread_system<R: Rng>(ctx: &PadicContext, s: usize, bound: i64, rng: &mut R) -> DiagLinSystem {
    let k = ctx.k as u64;
    let mut a = Vec::with_capacity(s);
    let mut b = Vec::with_capacity(s);
    for _ in 0..s {
        let (ea, eb) = (rng.gen_range(0..k), rng.gen_range(0..3));
        let mut v = || loop {
            let x = rng.gen_range(-bound..=bound);
            if x != 0 {
                return int(x);
            }
        };
        let (va, vb) = (v(), v());
        a.push(va * ppow(&ctx.p, ea));
        b.push(vb * ppow(&ctx.p, eb));
    }
    DiagLinSystem::new(a, b).expect("equal lengths")
}

/// Recipe for a conditioned system with `k = p(p − 1)` and prescribed
/// level-0 / level-1 shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelPlan {
    /// The odd prime.
    pub p: u64,
    /// Number of variables.
    pub s: usize,
    /// Coordinates with `ν = 0`.
    pub upsilon0: usize,
    /// Coordinates with `ν = 1`.
    pub upsilon1: usize,
    /// How many level-0 coordinates get a unit linear coefficient.
    pub level0_units: usize,
    /// How many level-1 coordinates get a unit linear coefficient (0 gives
    /// type A).
    pub level1_units: usize,
}

/// Builds the system described by `plan`.  Coordinates above level 1 fill
/// levels `2, 3, …` just enough to keep the block-count inequalities, and
/// every linear coefficient that is not a planted unit is `p` times a
/// random unit.
pub fn level_system<R: Rng>(plan: &LevelPlan, rng: &mut R) -> DiagLinSystem {
    let p = plan.p;
    let k = (p * (p - 1)) as usize;
    let pi = Int::from(p);
    let s = plan.s;
    let mut counts = vec![0usize; k];
    counts[0] = plan.upsilon0;
    counts[1] = plan.upsilon1;
    let mut cum = plan.upsilon0 + plan.upsilon1;
    for (j, slot) in counts.iter_mut().enumerate().skip(2) {
        let need = ((j + 1) * s).div_ceil(k);
        let n = need.saturating_sub(cum).min(s - cum);
        *slot = n;
        cum += n;
    }
    counts[k - 1] += s - cum;
    let mut a = Vec::with_capacity(s);
    let mut b = Vec::with_capacity(s);
    for (j, &n) in counts.iter().enumerate() {
        for q in 0..n {
            let sign = if rng.gen_bool(0.5) { Int::one() } else { -Int::one() };
            a.push(sign * ppow(&pi, j as u64) * unit(p, rng.gen_range(1..p), rng));
            let planted = match j {
                0 => q < plan.level0_units,
                1 => q < plan.level1_units,
                _ => false,
            };
            let bu = unit(p, rng.gen_range(1..p), rng);
            b.push(if planted { bu } else { &pi * bu });
        }
    }
    DiagLinSystem::new(a, b).expect("equal lengths")
}

/// Planted plans for `k = p(p − 1)`, each paired with the route tag it is
/// designed to reach.
pub fn level_branch_plans() -> Vec<(&'static str, LevelPlan)> {
    let plan = |p: u64, s: usize, u0: usize, u1: usize, l0: usize, l1: usize| LevelPlan {
        p,
        s,
        upsilon0: u0,
        upsilon1: u1,
        level0_units: l0,
        level1_units: l1,
    };
    vec![
        ("ppm1:type-a-wide", plan(3, 38, 11, 2, 1, 0)),
        ("ppm1:type-a-wide", plan(3, 38, 12, 2, 4, 0)),
        ("ppm1:type-a-split", plan(3, 38, 8, 5, 3, 0)),
        ("ppm1:type-a-split", plan(3, 38, 7, 6, 7, 0)),
        ("ppm1:type-b-wide", plan(3, 38, 11, 2, 2, 1)),
        ("ppm1:type-b-wide-pure", plan(3, 38, 11, 2, 0, 2)),
        ("ppm1:type-b-few-linear", plan(3, 38, 8, 5, 2, 1)),
        ("ppm1:type-b-few-linear", plan(3, 38, 8, 5, 0, 2)),
        ("ppm1:type-b-paired", plan(3, 38, 7, 6, 1, 5)),
        ("ppm1:type-b-paired", plan(3, 38, 8, 5, 3, 3)),
        ("ppm1:sextic-exceptional", plan(3, 38, 10, 3, 2, 3)),
        ("ppm1:sextic-exceptional", plan(3, 38, 9, 4, 0, 4)),
        ("ppm1:type-a-wide", plan(5, 402, 27, 14, 3, 0)),
        ("ppm1:type-a-split", plan(5, 402, 21, 20, 2, 0)),
        ("ppm1:type-b-split", plan(5, 402, 21, 20, 0, 7)),
        ("ppm1:type-b-paired", plan(5, 402, 22, 19, 3, 19)),
    ]
}

/// A block profile for `p = 2`, `k = 2^τ`: `upsilon[j]` variables with
/// `v_2(a_i) = j`, of which `odd_b[j]` have an odd linear coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pow2Plan {
    /// The degree.
    pub k: u32,
    /// Block sizes, one per niveau `0..k`.
    pub upsilon: Vec<usize>,
    /// Odd linear coefficients per block.
    pub odd_b: Vec<usize>,
}

impl Pow2Plan {
    /// Completes the leading blocks `head` (with odd counts `head_odd`) to a
    /// conditioned profile with `s` variables: later blocks get just enough
    /// variables for the block-count inequalities, the last one the rest, and
    /// all of them even linear coefficients.
    pub fn fill(k: u32, s: usize, head: &[usize], head_odd: &[usize]) -> Self {
        let kk = k as usize;
        let mut upsilon = vec![0usize; kk];
        let mut odd_b = vec![0usize; kk];
        upsilon[..head.len()].copy_from_slice(head);
        odd_b[..head_odd.len()].copy_from_slice(head_odd);
        let mut cum: usize = head.iter().sum();
        for j in head.len()..kk {
            let need = ((j + 1) * s).div_ceil(kk);
            let n = need.saturating_sub(cum).min(s - cum);
            upsilon[j] = n;
            cum += n;
        }
        upsilon[kk - 1] += s - cum;
        Pow2Plan { k, upsilon, odd_b }
    }

    /// Total number of variables.
    pub fn s(&self) -> usize {
        self.upsilon.iter().sum()
    }
}

/// A random conditioned profile with `s` variables.
///
/// Each cumulative block count starts at the least value the block-count
/// inequalities allow and gets a random (often zero) surplus, so tight
/// profiles are common.  A third of the profiles are of type A (every odd
/// linear coefficient at level 0); otherwise each block is all even, all odd
/// or mixed.
pub fn random_pow2_plan<R: Rng>(k: u32, s: usize, rng: &mut R) -> Pow2Plan {
    let kk = k as usize;
    let mut upsilon = vec![0usize; kk];
    let mut cum = 0usize;
    for (j, slot) in upsilon.iter_mut().enumerate() {
        let need = ((j + 1) * s).div_ceil(kk).max(cum);
        let extra = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..=s / 4) };
        let c = if j + 1 == kk { s } else { (need + extra).min(s) };
        *slot = c - cum;
        cum = c;
    }
    let type_a = rng.gen_bool(1.0 / 3.0);
    let odd_b = upsilon
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            if j == 0 {
                rng.gen_range(1..=n.max(1)).min(n)
            } else if type_a {
                0
            } else {
                match rng.gen_range(0..3) {
                    0 => 0,
                    1 => n,
                    _ => rng.gen_range(0..=n),
                }
            }
        })
        .collect();
    Pow2Plan { k, upsilon, odd_b }
}

/// Builds the system described by `plan`: `a_i = ±2^j · (odd < 2·bound)` in
/// block `j`, and linear coefficients `±odd` on `odd_b[j]` randomly placed
/// variables of the block, `±2·odd` on the rest.
pub fn pow2_planted<R: Rng>(plan: &Pow2Plan, bound: i64, rng: &mut R) -> DiagLinSystem {
    use rand::seq::SliceRandom;
    let two = Int::from(2);
    let s = plan.s();
    let mut a = Vec::with_capacity(s);
    let mut b = Vec::with_capacity(s);
    let odd = |rng: &mut R| Int::from(2 * rng.gen_range(0..bound.max(1)) + 1);
    let sign = |rng: &mut R| if rng.gen_bool(0.5) { Int::one() } else { -Int::one() };
    for (j, (&n, &o)) in plan.upsilon.iter().zip(&plan.odd_b).enumerate() {
        let mut flags: Vec<bool> = (0..n).map(|q| q < o).collect();
        flags.shuffle(rng);
        for f in flags {
            a.push(sign(rng) * ppow(&two, j as u64) * odd(rng));
            let bo = odd(rng);
            b.push(sign(rng) * if f { bo } else { &two * bo });
        }
    }
    DiagLinSystem::new(a, b).expect("equal lengths")
}

/// A random conditioned system for `p = 2`, `k = 2^τ`, with `s` variables
/// (a [`random_pow2_plan`] realized by [`pow2_planted`]).
pub fn pow2_system<R: Rng>(k: u32, s: usize, bound: i64, rng: &mut R) -> DiagLinSystem {
    let plan = random_pow2_plan(k, s, rng);
    pow2_planted(&plan, bound, rng)
}

/// Planted profiles for `p = 2`, each paired with the route tag it is
/// designed to reach (with `s = k² + 2`).
pub fn pow2_branch_plans() -> Vec<(&'static str, Pow2Plan)> {
    let q = |head: &[usize], odd: &[usize]| Pow2Plan::fill(4, 18, head, odd);
    let o = |head: &[usize], odd: &[usize]| Pow2Plan::fill(8, 66, head, odd);
    let h = |head: &[usize], odd: &[usize]| Pow2Plan::fill(16, 258, head, odd);
    vec![
        ("pow2:a-wide", q(&[18], &[9])),
        ("pow2:a-minimal", q(&[5, 4, 5, 4], &[3])),
        ("pow2:a-quartic", q(&[10, 4, 4, 0], &[5])),
        ("pow2:a-quartic:niveau3", q(&[8, 2, 4, 4], &[4])),
        ("pow2:a-wide", o(&[34], &[17])),
        ("pow2:a-upper", o(&[20], &[10])),
        ("pow2:a-middle:niveau3", o(&[12, 5, 8, 9], &[6])),
        ("pow2:a-middle:niveau2", o(&[12, 5, 14, 2], &[6])),
        ("pow2:a-minimal", o(&[9, 8, 8, 8], &[4])),
        ("pow2:b-wide", q(&[16, 2], &[8, 1])),
        ("pow2:quartic-even-top", q(&[8, 2, 4, 4], &[3, 1, 1, 2])),
        ("pow2:quartic:niveau1-block", q(&[5, 4, 5, 4], &[2, 1, 0, 1])),
        ("pow2:quartic:corrected-level1", q(&[7, 2, 5, 4], &[3, 2, 5, 1])),
        ("pow2:quartic:level2-absorb", q(&[7, 2, 5, 4], &[3, 2, 0, 1])),
        ("pow2:quartic-thin-top:level0-14-15", q(&[15, 1, 2, 0], &[7, 1, 2, 0])),
        ("pow2:quartic-thin-top:level0-14-15", q(&[15, 3, 0, 0], &[7, 3, 0, 0])),
        ("pow2:odd-triple", q(&[14, 2, 2, 0], &[7, 2, 2, 0])),
        ("pow2:quartic-thin-top:level0-13", q(&[13, 3, 2, 0], &[6, 1, 1, 0])),
        ("pow2:quartic-thin-top:level0-13", q(&[13, 2, 1, 2], &[6, 2, 1, 2])),
        ("pow2:quartic-thin-top:level0-12", q(&[12, 2, 2, 2], &[5, 1, 1, 2])),
        ("pow2:quartic-thin-top:level0-8-11", q(&[9, 4, 4, 1], &[4, 1, 1, 1])),
        ("pow2:quartic-thin-top:level0-7", q(&[7, 7, 2, 2], &[3, 1, 1, 2])),
        ("pow2:quartic:even-level2", q(&[7, 2, 7, 2], &[3, 1, 0, 2])),
        ("pow2:quartic:odd-level2", q(&[7, 2, 7, 2], &[3, 1, 7, 2])),
        ("pow2:quartic:mixed-level2", q(&[7, 5, 4, 2], &[3, 1, 2, 2])),
        ("pow2:quartic:mixed-level2", q(&[7, 6, 3, 2], &[3, 1, 2, 2])),
        ("pow2:quartic-thin-top:level0-6", q(&[6, 8, 2, 2], &[3, 1, 1, 2])),
        ("pow2:quartic-thin-top:level0-6", q(&[6, 7, 3, 2], &[3, 1, 1, 2])),
        ("pow2:quartic:even-level2", q(&[6, 3, 7, 2], &[3, 1, 0, 2])),
        ("pow2:quartic:odd-level2", q(&[6, 3, 7, 2], &[3, 1, 7, 2])),
        ("pow2:quartic:mixed-level2", q(&[6, 6, 4, 2], &[3, 1, 2, 2])),
        ("pow2:quartic-thin-top:level0-5", q(&[5, 8, 3, 2], &[3, 1, 1, 2])),
        ("pow2:quartic:even-level2", q(&[5, 4, 7, 2], &[3, 1, 0, 2])),
        ("pow2:quartic:odd-level2", q(&[5, 4, 7, 2], &[3, 1, 7, 2])),
        ("pow2:quartic:mixed-level2", q(&[5, 7, 4, 2], &[3, 1, 2, 2])),
        ("pow2:cycling:wide", q(&[15, 0, 0, 3], &[7, 0, 0, 3])),
        ("pow2:cycling:narrow", q(&[6, 4, 4, 4], &[3, 0, 0, 4])),
        ("pow2:cycling:narrow", q(&[5, 4, 5, 4], &[3, 1, 2, 4])),
        ("pow2:b-wide", o(&[32, 1], &[16, 1])),
        ("pow2:b-upper-octic", o(&[20, 4, 4, 5], &[10, 2, 2, 2])),
        ("pow2:b-upper-octic:niveau4", o(&[30, 0, 0, 3], &[15, 0, 0, 3, 3])),
        ("pow2:b-upper-octic:niveau4", o(&[30, 0, 0, 3], &[15, 0, 0, 3, 9])),
        ("pow2:b-lower:niveau1", o(&[12, 14], &[6, 7])),
        ("pow2:b-lower:niveau2", o(&[12, 5, 8], &[6, 2, 3])),
        ("pow2:b-lower:octic-refined", o(&[16, 3, 6], &[8, 1, 3])),
        ("pow2:b-wide", h(&[64, 1], &[32, 1])),
        ("pow2:b-upper", h(&[40, 10, 10, 10], &[20, 5, 5, 5])),
        ("pow2:b-lower:niveau1", h(&[24, 30], &[12, 15])),
        ("pow2:b-lower:niveau2", h(&[24, 9, 30], &[12, 4, 15])),
        ("pow2:b-lower:niveau3", h(&[32, 25, 0, 8], &[16, 12, 0, 4])),
    ]
}

/// The system `x_1^4 + … + x_15^4 + 8(y_1^4 + y_2^4 + y_3^4) = 0`,
/// `y_1 + y_2 + y_3 = 0` with the zero linear coefficients replaced by
/// `2^l`: a conditioned quartic system in 18 variables whose congruences
/// modulo `(16, 2)` have no non-singular solution.
pub fn quartic_dead_end_system(l: u32) -> DiagLinSystem {
    let mut a = vec![Int::one(); 15];
    a.extend(std::iter::repeat_n(Int::from(8), 3));
    let mut b = vec![Int::from(2).pow(l); 15];
    b.extend(std::iter::repeat_n(Int::one(), 3));
    DiagLinSystem::new(a, b).expect("equal lengths")
}
