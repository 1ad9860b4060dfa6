//! Brute-force ground truth for the congruence pair
//! `A(x) ≡ 0 mod p^g`, `B(x) ≡ 0 mod p` and for the unit-coefficient constant `γ*(k, p^l)`.
//!
//! When `k = p^τ (p − 1)` the unit-power collapse makes `x^k mod p^γ` depend
//! only on whether `x` is a unit, so the degree-`k` congruence depends only
//! on the support of `x`.  The search then runs over supports (a `2^s` scan)
//! and, per surviving support, decides the linear congruence and the minor
//! condition over unit values in closed form.

use crate::arith::{modp, Int};
use crate::error::{Error, Result};
use crate::hensel::{check_witness, HenselWitness};
use crate::system::{pow_mod_u64, DiagLinSystem, PadicContext};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

/// Default enumeration budget (states).
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// A search request for non-singular solutions.
#[derive(Clone, Debug)]
pub struct CongruenceQuery {
    /// The system.
    pub sys: DiagLinSystem,
    /// The arithmetic frame.
    pub ctx: PadicContext,
    /// Exponent `g` of the degree-`k` congruence.
    pub modulus_exponent: u32,
    /// Maximum number of enumeration states.
    pub budget: u64,
}

impl CongruenceQuery {
    /// Query at the witness exponent of the context with the default budget.
    pub fn new(sys: DiagLinSystem, ctx: PadicContext) -> Self {
        let g = ctx.witness_exponent();
        CongruenceQuery { sys, ctx, modulus_exponent: g, budget: DEFAULT_BUDGET }
    }
}

/// Result of a search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    /// A non-singular solution was found.
    pub found: bool,
    /// The solution, residues in `[0, p^g)`.
    #[serde(with = "opt_int_vec")]
    pub witness: Option<Vec<Int>>,
    /// Pivot pair whose minor is a unit at the witness.
    pub nonsingular_pivot: Option<(usize, usize)>,
    /// The whole reduced search space was covered.
    pub exhausted: bool,
    /// Number of states visited.
    pub states: u64,
}

mod opt_int_vec {
    use super::Int;
    use serde::{Deserialize, Deserializer, Serializer};
    pub fn serialize<S: Serializer>(v: &Option<Vec<Int>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_seq(v.iter().map(|x| x.to_string())),
            None => s.serialize_none(),
        }
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Int>>, D::Error> {
        let v = Option::<Vec<String>>::deserialize(d)?;
        v.map(|v| {
            v.iter()
                .map(|s| crate::serde_util::parse_int(s).map_err(serde::de::Error::custom))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()
    }
}

/// A support-level solution: a set of unit coordinates and unit values
/// satisfying both congruences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSolution {
    /// Indices carrying units.
    pub support: Vec<usize>,
    /// A full representative vector.
    pub values: Vec<Int>,
}

/// Residue data for the support scan.
struct Residues {
    p: u64,
    a_mod: Vec<u64>,
    a_mod_p: Vec<u64>,
    b_mod_p: Vec<u64>,
    big_m: u64,
}

fn residues(q: &CongruenceQuery) -> Result<Residues> {
    let p = q.ctx.p_u64();
    let big = q.ctx.pe(q.modulus_exponent as u64);
    let big_m = big
        .to_u64()
        .filter(|m| *m < (1 << 62))
        .ok_or_else(|| Error::InvalidInput("modulus too large for the support scan".into()))?;
    let pp = Int::from(p);
    Ok(Residues {
        p,
        a_mod: q.sys.a.iter().map(|a| modp(a, &big).to_u64().unwrap()).collect(),
        a_mod_p: q.sys.a.iter().map(|a| modp(a, &pp).to_u64().unwrap()).collect(),
        b_mod_p: q.sys.b.iter().map(|b| modp(b, &pp).to_u64().unwrap()).collect(),
        big_m,
    })
}

fn inv_mod_p(a: u64, p: u64) -> u64 {
    pow_mod_u64(a, p - 2, p)
}

/// Number of solutions of `b·v ≡ 0 mod p` with all `n` coordinates nonzero
/// and every `b_i` a unit: `((p−1)^n + (−1)^n (p−1)) / p`.
fn count_unit_solutions(n: u32, p: u64) -> u128 {
    let pm1 = (p - 1) as u128;
    let pw = pm1.pow(n);
    let total = if n.is_multiple_of(2) { pw + pm1 } else { pw - pm1 };
    total / p as u128
}

/// Given a support that satisfies the degree-`k` congruence, decides whether
/// unit values on it give a non-singular solution and constructs one.
fn complete_support(r: &Residues, k: u32, s: usize, support: &[bool]) -> Option<(Vec<u64>, (usize, usize))> {
    let p = r.p;
    let mut vals = vec![0u64; s];
    for i in 0..s {
        if support[i] {
            vals[i] = 1;
        }
    }
    let e = |i: usize, v: &[u64]| -> u64 {
        if v[i] == 0 {
            0
        } else {
            r.a_mod_p[i] * pow_mod_u64(v[i], (k - 1) as u64, p) % p
        }
    };
    let find_pivot = |v: &[u64]| -> Option<(usize, usize)> {
        for i in 0..s {
            for j in 0..s {
                if i == j {
                    continue;
                }
                let m = (r.b_mod_p[i] * e(j, v) % p + p * p - r.b_mod_p[j] * e(i, v) % p) % p;
                if m != 0 {
                    return Some((i, j));
                }
            }
        }
        None
    };
    if p == 2 {
        let bsum: u64 = (0..s).filter(|&i| support[i]).map(|i| r.b_mod_p[i]).sum();
        if !bsum.is_multiple_of(2) {
            return None;
        }
        return find_pivot(&vals).map(|pv| (vals, pv));
    }
    let t: Vec<usize> = (0..s).filter(|&i| support[i] && r.b_mod_p[i] != 0).collect();
    let u: Vec<usize> = (0..s).filter(|&i| support[i] && r.a_mod_p[i] != 0).collect();
    if u.is_empty() || t.len() == 1 {
        return None;
    }
    if t.is_empty() {
        return find_pivot(&vals).map(|pv| (vals, pv));
    }
    let outside_b = (0..s).any(|i| r.b_mod_p[i] != 0 && (!support[i] || r.a_mod_p[i] == 0));
    let u_not_t = u.iter().any(|i| r.b_mod_p[*i] == 0);
    if !outside_b && !u_not_t {
        // U = T: every vector (b_i, a_i / v_i) lies on one line exactly for the
        // p − 1 assignments v_i = a_i / (λ b_i), which solve B iff Σ a_i ≡ 0.
        let asum: u64 = t.iter().map(|&i| r.a_mod_p[i]).sum::<u64>() % p;
        let singular = if asum == 0 { (p - 1) as u128 } else { 0 };
        if count_unit_solutions(t.len() as u32, p) <= singular {
            return None;
        }
    }
    // Enumerate assignments on T lexicographically, solving the last value.
    let n = t.len();
    let last = t[n - 1];
    let mut digits = vec![1u64; n - 1];
    loop {
        let mut acc = 0u64;
        for (d, &i) in digits.iter().zip(&t) {
            vals[i] = *d;
            acc = (acc + r.b_mod_p[i] * d) % p;
        }
        let need = (p - acc) % p;
        if need != 0 {
            vals[last] = need * inv_mod_p(r.b_mod_p[last], p) % p;
            if let Some(pv) = find_pivot(&vals) {
                return Some((vals, pv));
            }
        }
        // Advance the odometer over F_p^* in the first n − 1 coordinates.
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                return None;
            }
            digits[pos] += 1;
            if digits[pos] < p {
                break;
            }
            digits[pos] = 1;
            pos += 1;
        }
    }
}

/// True when the support scan is exact for `q`: units collapse to `1` under
/// `x ↦ x^k` modulo `p^g`, which needs the collapse law and `g ≤ γ`.
fn support_scan_applies(q: &CongruenceQuery) -> bool {
    q.ctx.unit_powers_collapse() && q.ctx.gamma.is_some_and(|g| q.modulus_exponent <= g)
}

/// Searches for a non-singular solution.
///
/// When units collapse modulo `p^g` the scan runs over supports in increasing
/// bitmask order; otherwise (generic mode) it enumerates residue vectors
/// modulo `p^g`.
pub fn find_nonsingular(q: &CongruenceQuery) -> Result<OracleReport> {
    if q.budget == 0 {
        return Err(Error::InvalidInput("budget must be positive".into()));
    }
    if q.modulus_exponent == 0 {
        return Err(Error::InvalidInput("modulus exponent must be positive".into()));
    }
    if !support_scan_applies(q) {
        return find_nonsingular_generic(q);
    }
    let s = q.sys.s();
    if s >= 63 {
        return Ok(OracleReport { found: false, witness: None, nonsingular_pivot: None, exhausted: false, states: 0 });
    }
    let r = residues(q)?;
    let k = q.ctx.k;
    let mut states = 0u64;
    let total: u64 = 1u64 << s;
    let mut support = vec![false; s];
    for mask in 1..total {
        states += 1;
        if states > q.budget {
            return Ok(OracleReport { found: false, witness: None, nonsingular_pivot: None, exhausted: false, states });
        }
        let mut asum = 0u64;
        for (i, slot) in support.iter_mut().enumerate() {
            *slot = mask >> i & 1 == 1;
            if *slot {
                asum = (asum + r.a_mod[i]) % r.big_m;
            }
        }
        if asum != 0 {
            continue;
        }
        if let Some((vals, pv)) = complete_support(&r, k, s, &support) {
            let witness: Vec<Int> = vals.iter().map(|&v| Int::from(v)).collect();
            debug_assert!(
                check_witness(&HenselWitness {
                    x: witness.clone(),
                    pivot: pv,
                    context: q.ctx.clone(),
                    system: q.sys.clone()
                })
                .ok
            );
            return Ok(OracleReport {
                found: true,
                witness: Some(witness),
                nonsingular_pivot: Some(pv),
                exhausted: true,
                states,
            });
        }
    }
    Ok(OracleReport { found: false, witness: None, nonsingular_pivot: None, exhausted: true, states })
}

/// Generic-mode search: all vectors modulo `p^g` in lexicographic order.
fn find_nonsingular_generic(q: &CongruenceQuery) -> Result<OracleReport> {
    let s = q.sys.s();
    let r = residues(q)?;
    let m = r.big_m;
    let k = q.ctx.k as u64;
    let pw: Vec<u64> = (0..m).map(|x| pow_mod_u64(x, k, m)).collect();
    let mut x = vec![0u64; s];
    let mut states = 0u64;
    loop {
        // Advance the odometer (skipping the zero vector on the first turn).
        let mut pos = 0;
        loop {
            if pos == s {
                return Ok(OracleReport {
                    found: false,
                    witness: None,
                    nonsingular_pivot: None,
                    exhausted: true,
                    states,
                });
            }
            x[pos] += 1;
            if x[pos] < m {
                break;
            }
            x[pos] = 0;
            pos += 1;
        }
        states += 1;
        if states > q.budget {
            return Ok(OracleReport { found: false, witness: None, nonsingular_pivot: None, exhausted: false, states });
        }
        let asum = (0..s).fold(0u128, |acc, i| (acc + r.a_mod[i] as u128 * pw[x[i] as usize] as u128) % m as u128);
        if asum != 0 {
            continue;
        }
        let bsum = (0..s).fold(0u64, |acc, i| (acc + r.b_mod_p[i] * (x[i] % r.p)) % r.p);
        if bsum != 0 {
            continue;
        }
        let xv: Vec<Int> = x.iter().map(|&v| Int::from(v)).collect();
        for i in 0..s {
            for j in 0..s {
                if i != j {
                    let w =
                        HenselWitness { x: xv.clone(), pivot: (i, j), context: q.ctx.clone(), system: q.sys.clone() };
                    if check_witness(&w).ok {
                        return Ok(OracleReport {
                            found: true,
                            witness: Some(xv),
                            nonsingular_pivot: Some((i, j)),
                            exhausted: true,
                            states,
                        });
                    }
                }
            }
        }
    }
}

/// Every support-level solution of the congruence pair (degree-`k` congruence
/// on the support, linear congruence satisfiable by unit values), in
/// increasing bitmask order.  Requires units to collapse modulo `p^g`.
pub fn enumerate_solutions(q: &CongruenceQuery) -> Result<Vec<SupportSolution>> {
    if !support_scan_applies(q) {
        return Err(Error::ContextNotApplicable);
    }
    let s = q.sys.s();
    if s >= 40 || (1u64 << s) > q.budget {
        return Err(Error::BudgetExceeded(q.budget));
    }
    let r = residues(q)?;
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << s) {
        let support: Vec<usize> = (0..s).filter(|i| mask >> i & 1 == 1).collect();
        let asum = support.iter().fold(0u64, |acc, &i| (acc + r.a_mod[i]) % r.big_m);
        if asum != 0 {
            continue;
        }
        if let Some(vals) = satisfy_linear(&r, s, &support) {
            out.push(SupportSolution { support, values: vals.into_iter().map(Int::from).collect() });
        }
    }
    Ok(out)
}

/// Unit values on `support` solving the linear congruence, if any.
fn satisfy_linear(r: &Residues, s: usize, support: &[usize]) -> Option<Vec<u64>> {
    let p = r.p;
    let mut vals = vec![0u64; s];
    for &i in support {
        vals[i] = 1;
    }
    let t: Vec<usize> = support.iter().copied().filter(|&i| r.b_mod_p[i] != 0).collect();
    if p == 2 {
        let sum: u64 = t.len() as u64;
        return if sum.is_multiple_of(2) { Some(vals) } else { None };
    }
    match t.len() {
        0 => Some(vals),
        1 => None,
        n => {
            let last = t[n - 1];
            let mut digits = vec![1u64; n - 1];
            loop {
                let acc = digits.iter().zip(&t).fold(0u64, |acc, (d, &i)| (acc + r.b_mod_p[i] * d) % p);
                if acc != 0 {
                    for (d, &i) in digits.iter().zip(&t) {
                        vals[i] = *d;
                    }
                    vals[last] = (p - acc) * inv_mod_p(r.b_mod_p[last], p) % p;
                    return Some(vals);
                }
                let mut pos = 0;
                loop {
                    if pos == digits.len() {
                        return None;
                    }
                    digits[pos] += 1;
                    if digits[pos] < p {
                        break;
                    }
                    digits[pos] = 1;
                    pos += 1;
                }
            }
        }
    }
}

/// Outcome of the `γ*` enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaStarReport {
    /// The exact value when `exhausted`, else the best proven lower bound.
    pub gamma_star: u64,
    /// Whether the enumeration completed.
    pub exhausted: bool,
    /// A coefficient tuple of length `gamma_star − 1` with no solution
    /// (witness for the lower bound), when `gamma_star > 1`.
    pub obstruction: Option<Vec<u64>>,
}

/// Computes `γ*(k, p^l)`: the least `t` such that every congruence
/// `c_1 x_1^k + … + c_t x_t^k ≡ 0 mod p^l` with units `c_i` has a solution
/// with some `x_i` a unit.
///
/// Tuples are normalized to `c_1 = 1` and each `c_i` is taken from a set of
/// representatives of units modulo `k`-th powers (which does not change
/// solubility); solubility is decided by a reachable-sums scan over the
/// residue table of `x^k mod p^l`.
pub fn gamma_star_bruteforce(k: u32, p: u64, l: u32, budget: u64) -> Result<GammaStarReport> {
    if !crate::arith::is_prime_u64(p) || l == 0 || k == 0 {
        return Err(Error::InvalidInput("need prime p, l ≥ 1, k ≥ 1".into()));
    }
    let m = (p as u128)
        .checked_pow(l)
        .filter(|m| *m <= 1 << 20)
        .ok_or_else(|| Error::InvalidInput("p^l too large for enumeration".into()))? as u64;
    let units: Vec<u64> = (1..m).filter(|x| x % p != 0).collect();
    let powers_unit: Vec<u64> = {
        let mut v: Vec<u64> = units.iter().map(|&x| pow_mod_u64(x, k as u64, m)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let powers_nonunit: Vec<u64> = {
        let mut v: Vec<u64> = (0..m).filter(|x| x % p == 0).map(|x| pow_mod_u64(x, k as u64, m)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    // Representatives of units modulo k-th powers of units.
    let mut reps = Vec::new();
    let mut seen = vec![false; m as usize];
    for &c in &units {
        if seen[c as usize] {
            continue;
        }
        reps.push(c);
        for &w in &powers_unit {
            seen[(c * w % m) as usize] = true;
        }
    }
    let mut states = 0u64;
    let mut obstruction: Option<Vec<u64>> = None;
    for t in 1u32..=(4 * m as u32 + 4) {
        match first_insoluble_tuple(t, &reps, m, &powers_unit, &powers_nonunit, budget, &mut states) {
            Scan::Truncated => return Ok(GammaStarReport { gamma_star: t as u64, exhausted: false, obstruction }),
            Scan::Insoluble(tuple) => obstruction = Some(tuple),
            Scan::AllSoluble => return Ok(GammaStarReport { gamma_star: t as u64, exhausted: true, obstruction }),
        }
    }
    Err(Error::Internal("gamma* search did not terminate".into()))
}

enum Scan {
    AllSoluble,
    Insoluble(Vec<u64>),
    Truncated,
}

/// Scans normalized tuples of length `t` (`c_1 = 1`, the rest a
/// non-decreasing sequence of representatives) for one with no solution.
fn first_insoluble_tuple(
    t: u32,
    reps: &[u64],
    m: u64,
    powers_unit: &[u64],
    powers_nonunit: &[u64],
    budget: u64,
    states: &mut u64,
) -> Scan {
    let mut idx = vec![0usize; (t - 1) as usize];
    loop {
        let mut tuple = vec![1u64];
        tuple.extend(idx.iter().map(|&i| reps[i]));
        *states += m * t as u64;
        if *states > budget {
            return Scan::Truncated;
        }
        if !tuple_soluble(&tuple, m, powers_unit, powers_nonunit) {
            return Scan::Insoluble(tuple);
        }
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                return Scan::AllSoluble;
            }
            pos -= 1;
            if idx[pos] + 1 < reps.len() {
                idx[pos] += 1;
                let v = idx[pos];
                idx[pos + 1..].iter_mut().for_each(|x| *x = v);
                break;
            }
        }
    }
}

/// Decides whether `Σ c_i x_i^k ≡ 0 mod m` has a solution with some unit `x_i`.
fn tuple_soluble(c: &[u64], m: u64, powers_unit: &[u64], powers_nonunit: &[u64]) -> bool {
    // reach[r][f]: residue r reachable, f = some unit used so far.
    let mm = m as usize;
    let mut reach = vec![[false; 2]; mm];
    reach[0][0] = true;
    for &ci in c {
        let mut next = vec![[false; 2]; mm];
        for r in 0..mm {
            for f in 0..2 {
                if !reach[r][f] {
                    continue;
                }
                for &w in powers_nonunit {
                    next[((r as u64 + ci * w) % m) as usize][f] = true;
                }
                for &w in powers_unit {
                    next[((r as u64 + ci * w) % m) as usize][1] = true;
                }
            }
        }
        reach = next;
    }
    reach[0][1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn q(a: &[i64], b: &[i64], p: u64, k: u32) -> CongruenceQuery {
        CongruenceQuery::new(DiagLinSystem::from_i64(a, b), PadicContext::small(p, k))
    }

    #[test]
    fn power_of_two_example_has_no_nonsingular_solution() {
        let mut a = vec![1i64; 15];
        a.extend([8, 8, 8]);
        let mut b = vec![0i64; 15];
        b.extend([1, 1, 1]);
        let r = find_nonsingular(&q(&a, &b, 2, 4)).unwrap();
        assert!(!r.found);
        assert!(r.exhausted);
        assert_eq!(r.states, (1u64 << 18) - 1);
    }

    #[test]
    fn small_mod_five_example() {
        let r = find_nonsingular(&q(&[1, 1, 3], &[1, 2, 2], 5, 4)).unwrap();
        assert!(r.found);
        assert_eq!(r.witness.unwrap(), vec![int(1), int(1), int(1)]);
        assert_eq!(r.nonsingular_pivot, Some((0, 1)));
    }

    #[test]
    fn two_units_without_linear_part() {
        let r = find_nonsingular(&q(&[1, 1], &[0, 0], 5, 4)).unwrap();
        assert!(!r.found && r.exhausted);
    }

    #[test]
    fn budget_truncation_is_reported() {
        let mut query = q(&[1; 20], &[1; 20], 5, 4);
        query.budget = 10;
        let r = find_nonsingular(&query).unwrap();
        assert!(!r.exhausted && !r.found);
    }

    #[test]
    fn enumerate_examples() {
        let sols = enumerate_solutions(&q(&[1, 1, 1, 1, 1], &[0; 5], 5, 4)).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].support, vec![0, 1, 2, 3, 4]);
        let sols = enumerate_solutions(&q(&[1, 4], &[0, 0], 5, 4)).unwrap();
        assert_eq!(sols.iter().map(|s| s.support.clone()).collect::<Vec<_>>(), vec![vec![0, 1]]);
        assert!(enumerate_solutions(&q(&[1, 1], &[1, 1], 2, 4)).unwrap().is_empty());
    }

    #[test]
    fn count_formula_matches_enumeration() {
        for p in [3u64, 5, 7] {
            for n in 1u32..5 {
                let mut cnt = 0u128;
                let total = (p - 1).pow(n);
                for code in 0..total {
                    let mut c = code;
                    let mut sum = 0;
                    for _ in 0..n {
                        sum += c % (p - 1) + 1;
                        c /= p - 1;
                    }
                    if sum % p == 0 {
                        cnt += 1;
                    }
                }
                assert_eq!(cnt, count_unit_solutions(n, p), "p={p} n={n}");
            }
        }
    }

    #[test]
    fn gamma_star_values() {
        assert_eq!(gamma_star_bruteforce(4, 5, 1, DEFAULT_BUDGET).unwrap().gamma_star, 5);
        assert_eq!(gamma_star_bruteforce(2, 5, 1, DEFAULT_BUDGET).unwrap().gamma_star, 3);
        let r = gamma_star_bruteforce(2, 7, 1, DEFAULT_BUDGET).unwrap();
        assert!(r.exhausted);
        assert_eq!(r.gamma_star, 3);
        assert_eq!(r.obstruction, Some(vec![1, 1]));
    }

    #[test]
    fn linear_dyadic_context_does_not_use_the_collapse() {
        // k = 1, p = 2: τ = 0 and γ = 2, but 3 ≢ 1 mod 4.  x = (1, 3) solves
        // x_1 + x_2 ≡ 0 mod 4 and the linear congruence mod 2, with a unit minor.
        let sys = DiagLinSystem::from_i64(&[1, 1], &[1, 0]);
        let ctx = PadicContext::small(2, 1);
        assert!(ctx.has_tau() && !ctx.unit_powers_collapse());
        let r = find_nonsingular(&CongruenceQuery::new(sys.clone(), ctx)).unwrap();
        assert_eq!(r.found, naive_nonsingular(&sys, 2, 1, 2));
        let q = CongruenceQuery::new(sys, PadicContext::small(2, 1));
        assert_eq!(enumerate_solutions(&q), Err(Error::ContextNotApplicable));
    }

    /// Full enumeration over `(Z/p^g)^s`, independent of the support collapse.
    fn naive_nonsingular(sys: &DiagLinSystem, p: u64, k: u32, g: u32) -> bool {
        let m = p.pow(g);
        let s = sys.s();
        let a: Vec<i64> = sys.a.iter().map(|x| x.to_i64().unwrap()).collect();
        let b: Vec<i64> = sys.b.iter().map(|x| x.to_i64().unwrap()).collect();
        let pp = p as i64;
        let total = m.pow(s as u32);
        for code in 1..total {
            let mut c = code;
            let x: Vec<i64> = (0..s)
                .map(|_| {
                    let d = (c % m) as i64;
                    c /= m;
                    d
                })
                .collect();
            let av: i128 = (0..s).map(|i| a[i] as i128 * (x[i] as i128).pow(k)).sum();
            let bv: i64 = (0..s).map(|i| b[i] * x[i]).sum();
            if av.rem_euclid(m as i128) != 0 || bv.rem_euclid(pp) != 0 {
                continue;
            }
            for i in 0..s {
                for j in 0..s {
                    let mi = b[i] as i128 * a[j] as i128 * (x[j] as i128).pow(k - 1)
                        - b[j] as i128 * a[i] as i128 * (x[i] as i128).pow(k - 1);
                    if i != j && mi.rem_euclid(p as i128) != 0 {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn collapse_case() -> impl Strategy<Value = (u64, u32, Vec<i64>, Vec<i64>)> {
        // (p, k, max s) with p^(g s) ≤ 10^6.
        prop_oneof![
            Just((2u64, 4u32, 5usize)),
            Just((5, 4, 7)),
            Just((3, 6, 5)),
            Just((3, 2, 10)),
            Just((2, 2, 6)),
            Just((2, 1, 8)),
        ]
        .prop_flat_map(|(p, k, smax)| {
            (2..=smax).prop_flat_map(move |s| {
                (Just(p), Just(k), proptest::collection::vec(-40i64..40, s), proptest::collection::vec(-40i64..40, s))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn support_collapse_agrees_with_naive_enumeration((p, k, a, b) in collapse_case()) {
            let sys = DiagLinSystem::from_i64(&a, &b);
            let ctx = PadicContext::small(p, k);
            let g = ctx.witness_exponent();
            let r = find_nonsingular(&CongruenceQuery::new(sys.clone(), ctx.clone())).unwrap();
            prop_assert!(r.exhausted);
            prop_assert_eq!(r.found, naive_nonsingular(&sys, p, k, g));
            if let (Some(x), Some(pv)) = (r.witness.clone(), r.nonsingular_pivot) {
                let w = HenselWitness { x, pivot: pv, context: ctx.clone(), system: sys.clone() };
                prop_assert!(check_witness(&w).ok);
            }
            let again = find_nonsingular(&CongruenceQuery::new(sys, ctx)).unwrap();
            prop_assert_eq!(r, again);
        }

        #[test]
        fn raised_modulus_agrees_with_naive_enumeration(
            a in proptest::collection::vec(-40i64..40, 2..=4),
            b in proptest::collection::vec(-40i64..40, 4),
        ) {
            // g = 2 > γ = 1: units no longer collapse modulo 25.
            let b = &b[..a.len()];
            let sys = DiagLinSystem::from_i64(&a, b);
            let mut q = CongruenceQuery::new(sys.clone(), PadicContext::small(5, 4));
            q.modulus_exponent = 2;
            let r = find_nonsingular(&q).unwrap();
            prop_assert!(r.exhausted);
            prop_assert_eq!(r.found, naive_nonsingular(&sys, 5, 4, 2));
        }

        #[test]
        fn generic_mode_agrees_with_naive_enumeration(
            a in proptest::collection::vec(-30i64..30, 2..5),
            seed in proptest::collection::vec(-30i64..30, 4),
        ) {
            // k = 2, p = 5: no collapse law (2 is not 5^τ·4), witness exponent 1.
            let b: Vec<i64> = seed.iter().cycle().take(a.len()).copied().collect();
            let sys = DiagLinSystem::from_i64(&a, &b);
            let ctx = PadicContext::small(5, 2);
            prop_assert!(!ctx.has_tau());
            let r = find_nonsingular(&CongruenceQuery::new(sys.clone(), ctx)).unwrap();
            prop_assert_eq!(r.found, naive_nonsingular(&sys, 5, 2, 1));
        }
    }
}
