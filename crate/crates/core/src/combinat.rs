//! Constructive zero-sum and small-field solvers.
//!
//! Every existence argument used by the engines (subset sums via
//! Cauchy–Davenport growth, the `F_p` diagonal and pair solvers, the
//! exceptional shape of a `(p+1)`-variable pair, Olson's zero sums in
//! `F_3²`) is realised here with explicit witnesses.  All arithmetic is on
//! residues stored as `u64`; products go through `u128`.

use crate::error::{Error, Result};
use crate::system::{pow_mod_u64, PadicContext};
use serde::{Deserialize, Serialize};

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn inv_mod_prime(a: u64, p: u64) -> u64 {
    pow_mod_u64(a % p, p - 2, p)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Shape of an `F_p` solver outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FpKind {
    /// `values` solve the equations (non-singularly when a pivot is given).
    Solved,
    /// No non-trivial solution; all coefficients are congruent.
    AllEqual,
    /// No non-singular solution; after `permutation` (new position `j` holds
    /// old index `permutation[j]`) the coefficient matrix reads
    /// `(a, −a, a', …, a' ; b1, b2, 0, …, 0)`.
    CriticalShape {
        /// Index order exhibiting the shape.
        permutation: Vec<usize>,
        /// Degree coefficient of the first header variable.
        a: u64,
        /// Common degree coefficient of the tail.
        a_prime: u64,
        /// Linear coefficient of the first header variable.
        b1: u64,
        /// Linear coefficient of the second header variable.
        b2: u64,
    },
    /// No non-trivial solution (short inputs only).
    NoSolution,
}

/// A solution over `F_p` with an optional non-singular pivot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FpSolution {
    /// Residues in `[0, p)`; empty unless `kind` is `Solved`.
    pub values: Vec<u64>,
    /// Index pair whose 2×2 minor is a unit at `values`.
    pub pivot: Option<(usize, usize)>,
    /// Outcome shape.
    pub kind: FpKind,
}

impl FpSolution {
    fn solved(values: Vec<u64>, pivot: Option<(usize, usize)>) -> Self {
        FpSolution { values, pivot, kind: FpKind::Solved }
    }
    fn without(kind: FpKind) -> Self {
        FpSolution { values: Vec::new(), pivot: None, kind }
    }
}

/// Value of the minor `b_i a_j x_j^{k−1} − b_j a_i x_i^{k−1}` modulo `p`.
pub fn fp_minor(a: &[u64], b: &[u64], x: &[u64], k: u32, p: u64, i: usize, j: usize) -> u64 {
    let e = |t: usize| {
        if x[t].is_multiple_of(p) {
            0
        } else {
            mulmod(a[t] % p, pow_mod_u64(x[t] % p, (k - 1) as u64, p), p)
        }
    };
    let lhs = mulmod(b[i] % p, e(j), p);
    let rhs = mulmod(b[j] % p, e(i), p);
    (lhs + p - rhs) % p
}

/// Checks `Σ a_j x_j^k ≡ Σ b_j x_j ≡ 0 mod p` and, when given, that the
/// pivot minor is a unit.
pub fn fp_is_solution(a: &[u64], b: &[u64], x: &[u64], k: u32, p: u64, pivot: Option<(usize, usize)>) -> bool {
    let mut sa = 0u64;
    let mut sb = 0u64;
    for t in 0..x.len() {
        sa = (sa + mulmod(a[t] % p, pow_mod_u64(x[t] % p, k as u64, p), p)) % p;
        sb = (sb + mulmod(b[t] % p, x[t] % p, p)) % p;
    }
    if sa != 0 || sb != 0 || x.iter().all(|v| v % p == 0) {
        return false;
    }
    match pivot {
        Some((i, j)) => i != j && fp_minor(a, b, x, k, p, i, j) != 0,
        None => true,
    }
}

/// Reachable-sums table: `pred[r] = Some((index, previous residue))` records
/// how residue `r` was first reached while adding elements in index order.
struct SumsetTrail {
    pred: Vec<Option<(usize, u64)>>,
}

impl SumsetTrail {
    fn backtrack(&self, mut r: u64) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some((j, prev)) = self.pred[r as usize] {
            out.push(j);
            r = prev;
        }
        out.sort_unstable();
        out
    }
}

/// Grows the sumset `{0} + {0, c_j} + …` over `c[from..]` until `target`
/// appears, returning the trail, or `None` if it never appears.
fn grow_until(c: &[u64], from: usize, q: u64, target: u64) -> Option<SumsetTrail> {
    let n = q as usize;
    let mut pred: Vec<Option<(usize, u64)>> = vec![None; n];
    let mut reached = vec![false; n];
    reached[0] = true;
    let mut members = vec![0u64];
    if target == 0 {
        return Some(SumsetTrail { pred });
    }
    for (j, &cj) in c.iter().enumerate().skip(from) {
        let mut fresh = Vec::new();
        for &r in &members {
            let t = (r + cj % q) % q;
            if !reached[t as usize] && !fresh.contains(&t) {
                pred[t as usize] = Some((j, r));
                fresh.push(t);
            }
        }
        for t in fresh {
            reached[t as usize] = true;
            members.push(t);
        }
        members.sort_unstable();
        if reached[target as usize] {
            return Some(SumsetTrail { pred });
        }
    }
    None
}

/// Finds `J ∋ 0` (0-based) with `Σ_{j∈J} c_j ≡ 0 mod q`.
///
/// The sumsets `{0, c_2} + … + {0, c_q}` fill `Z/q` by Chowla's theorem, so
/// `−c_1` is reached; back-pointers recover the subset.
pub fn zero_subset_sum(c: &[u64], q: u64) -> Result<Vec<usize>> {
    if q < 2 {
        return Err(Error::PreconditionViolated("modulus must be at least 2".into()));
    }
    if (c.len() as u64) < q {
        return Err(Error::PreconditionViolated(format!("need at least {q} entries, got {}", c.len())));
    }
    if let Some(bad) = c.iter().position(|&x| gcd(x % q, q) != 1) {
        return Err(Error::PreconditionViolated(format!("entry {bad} is not a unit mod {q}")));
    }
    rooted_zero_subset(c, q).ok_or_else(|| Error::Internal("sumset did not fill the group".into()))
}

/// Like [`zero_subset_sum`] without the length requirement: the first zero
/// subset containing index 0, if any exists.
pub fn rooted_zero_subset(c: &[u64], q: u64) -> Option<Vec<usize>> {
    let target = (q - c[0] % q) % q;
    let trail = grow_until(c, 1, q, target)?;
    let mut j = trail.backtrack(target);
    j.insert(0, 0);
    Some(j)
}

/// The lexicographically earliest-completed non-empty zero subset (by
/// the index at which it closes), if any.
pub fn nonempty_zero_subset(c: &[u64], q: u64) -> Option<Vec<usize>> {
    for start in 0..c.len() {
        let target = (q - c[start] % q) % q;
        if let Some(trail) = grow_until(c, start + 1, q, target) {
            let mut j = trail.backtrack(target);
            j.insert(0, start);
            return Some(j);
        }
    }
    None
}

fn indicator(len: usize, set: &[usize]) -> Vec<u64> {
    let mut x = vec![0u64; len];
    for &j in set {
        x[j] = 1;
    }
    x
}

fn require_tau(ctx: &PadicContext) -> Result<u64> {
    if !ctx.unit_powers_collapse() {
        return Err(Error::ContextNotApplicable);
    }
    Ok(ctx.p_u64())
}

/// Solves `Σ a_j x_j^k = 0` in `F_p` for unit `a_j`.
///
/// With at least `p` entries a solution with `x_1 = 1` is returned.  With
/// exactly `p − 1` entries either a non-trivial solution or `AllEqual`.
/// Shorter inputs are decided exactly.
pub fn solve_unit_diagonal_mod_p(a: &[u64], ctx: &PadicContext) -> Result<FpSolution> {
    let p = require_tau(ctx)?;
    if a.is_empty() {
        return Err(Error::InvalidInput("empty coefficient vector".into()));
    }
    if a.iter().any(|x| x % p == 0) {
        return Err(Error::InvalidInput("coefficients must be units mod p".into()));
    }
    if a.len() as u64 >= p {
        let j = zero_subset_sum(a, p)?;
        return Ok(FpSolution::solved(indicator(a.len(), &j), None));
    }
    let found = rooted_zero_subset(a, p).or_else(|| nonempty_zero_subset(a, p));
    match found {
        Some(j) => Ok(FpSolution::solved(indicator(a.len(), &j), None)),
        None if a.len() as u64 == p - 1 => {
            if a.iter().any(|x| x % p != a[0] % p) {
                return Err(Error::Internal("p−1 unequal units without a zero subset".into()));
            }
            Ok(FpSolution::without(FpKind::AllEqual))
        }
        None => Ok(FpSolution::without(FpKind::NoSolution)),
    }
}

/// Result of [`pair_with_nonzero_sum`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonzeroPair {
    /// The first pair (in order (0,1), (0,2), (1,2)) with a unit sum.
    pub pair: (usize, usize),
    /// How many of the three pairs have a unit sum.
    pub count: usize,
    /// Whether, up to order, `a_1 = a_2 = −a_3` (only one good pair).
    pub exceptional: bool,
}

/// Among three units mod `p ≥ 3`, a pair whose sum is a unit.
pub fn pair_with_nonzero_sum(a: [u64; 3], p: u64) -> Result<NonzeroPair> {
    if p < 3 || a.iter().any(|x| x % p == 0) {
        return Err(Error::PreconditionViolated("need p ≥ 3 and three units".into()));
    }
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let good: Vec<(usize, usize)> = pairs.into_iter().filter(|&(i, j)| !(a[i] + a[j]).is_multiple_of(p)).collect();
    let first = *good.first().ok_or_else(|| Error::Internal("three units with all pair sums zero".into()))?;
    Ok(NonzeroPair { pair: first, count: good.len(), exceptional: good.len() == 1 })
}

/// Finds a non-singular solution of `Σ a_j x_j^k = Σ b_j x_j (+ c·y) = 0`
/// over `F_p`.
///
/// * With `free_slot = Some(c)` (an extra variable `y` with linear
///   coefficient `c` and no degree term, appended as the last coordinate):
///   any non-trivial zero subset of the `a_j` gives a solution, pivoted on
///   `y`; with no such subset and `p − 1` entries the result is `AllEqual`.
/// * Otherwise (`p ≥ 5`, at least `p + 1` entries, some `b_j ≠ 0`): the
///   argument fixes two linear-unit coordinates with `a_i + a_j ≠ 0`, fills
///   the rest from a zero subset, and slides along the line
///   `z_i = x_i + b_j y, z_j = x_j − b_i y` until the minor is a unit.  The
///   only failure is the exceptional shape, returned as `CriticalShape`.
pub fn solve_unit_pair_mod_p(a: &[u64], b: &[u64], ctx: &PadicContext, free_slot: Option<u64>) -> Result<FpSolution> {
    let p = require_tau(ctx)?;
    let k = ctx.k;
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput("coefficient vectors must be non-empty and of equal length".into()));
    }
    if a.iter().any(|x| x % p == 0) {
        return Err(Error::NotApplicable("degree coefficients must be units".into()));
    }
    let n = a.len();
    let b: Vec<u64> = b.iter().map(|x| x % p).collect();
    if let Some(c) = free_slot {
        if c % p == 0 || p < 3 {
            return Err(Error::NotApplicable("free slot needs a unit coefficient and p ≥ 3".into()));
        }
        let Some(j) = rooted_zero_subset(a, p).or_else(|| nonempty_zero_subset(a, p)) else {
            if n as u64 == p - 1 && a.iter().all(|x| x % p == a[0] % p) {
                return Ok(FpSolution::without(FpKind::AllEqual));
            }
            if (n as u64) < p - 1 {
                return Ok(FpSolution::without(FpKind::NoSolution));
            }
            return Err(Error::Internal("zero subset missing for a long unit vector".into()));
        };
        let mut x = indicator(n, &j);
        let bx = (0..n).fold(0u64, |acc, t| (acc + mulmod(b[t], x[t], p)) % p);
        let y = mulmod((p - bx) % p, inv_mod_prime(c, p), p);
        x.push(y);
        let mut a_ext = a.to_vec();
        a_ext.push(0);
        let mut b_ext = b.clone();
        b_ext.push(c % p);
        let pivot = (n, j[0]);
        debug_assert!(fp_is_solution(&a_ext, &b_ext, &x, k, p, Some(pivot)));
        return Ok(FpSolution::solved(x, Some(pivot)));
    }
    if p < 5 {
        return Err(Error::NotApplicable("pair solver needs p ≥ 5".into()));
    }
    if (n as u64) < p + 1 {
        return Err(Error::NotApplicable(format!("need at least {} variables", p + 1)));
    }
    let t: Vec<usize> = (0..n).filter(|&i| b[i] != 0).collect();
    if t.is_empty() {
        return Err(Error::NotApplicable("all linear coefficients vanish mod p".into()));
    }
    if t.len() == 1 {
        // x_i = 0 on the linear unit; a zero subset of the rest through its
        // first member gives a pivot against i.
        let i = t[0];
        let rest: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let ra: Vec<u64> = rest.iter().map(|&r| a[r]).collect();
        let j = zero_subset_sum(&ra, p)?;
        let x = indicator(n, &j.iter().map(|&q| rest[q]).collect::<Vec<_>>());
        let pivot = (i, rest[j[0]]);
        return finish(a, &b, x, k, p, pivot);
    }
    let header = if t.len() >= 3 {
        let np = pair_with_nonzero_sum([a[t[0]], a[t[1]], a[t[2]]], p)?;
        Some((t[np.pair.0], t[np.pair.1]))
    } else if !(a[t[0]] + a[t[1]]).is_multiple_of(p) {
        Some((t[0], t[1]))
    } else {
        None
    };
    match header {
        Some((i, j)) => {
            let rest: Vec<usize> = (0..n).filter(|&r| r != i && r != j).collect();
            let mut c = vec![(a[i] + a[j]) % p];
            c.extend(rest.iter().map(|&r| a[r]));
            let sub = zero_subset_sum(&c, p)?;
            let mut x = vec![0u64; n];
            for &q in sub.iter().skip(1) {
                x[rest[q - 1]] = 1;
            }
            let bb = rest.iter().fold(0u64, |acc, &r| (acc + mulmod(b[r], x[r], p)) % p);
            let xi = (1..p).find(|&v| !(mulmod(b[i], v, p) + bb).is_multiple_of(p)).expect("p ≥ 5 leaves a choice");
            let xj = mulmod((2 * p - mulmod(b[i], xi, p) - bb) % p, inv_mod_prime(b[j], p), p);
            for y in 0..p {
                let zi = (xi + mulmod(b[j], y, p)) % p;
                let zj = (xj + p - mulmod(b[i], y, p)) % p;
                if zi == 0 || zj == 0 {
                    continue;
                }
                x[i] = zi;
                x[j] = zj;
                if fp_minor(a, &b, &x, k, p, i, j) != 0 {
                    return finish(a, &b, x, k, p, (i, j));
                }
            }
            Err(Error::Internal("no admissible slide parameter".into()))
        }
        None => {
            // Two linear units with a_i + a_j ≡ 0: solve the tail alone.
            let (i, j) = (t[0], t[1]);
            let rest: Vec<usize> = (0..n).filter(|&r| r != i && r != j).collect();
            let ra: Vec<u64> = rest.iter().map(|&r| a[r]).collect();
            if let Some(sub) = rooted_zero_subset(&ra, p).or_else(|| nonempty_zero_subset(&ra, p)) {
                let x = indicator(n, &sub.iter().map(|&q| rest[q]).collect::<Vec<_>>());
                return finish(a, &b, x, k, p, (i, rest[sub[0]]));
            }
            if ra.len() as u64 != p - 1 || ra.iter().any(|v| v % p != ra[0] % p) {
                return Err(Error::Internal("tail without zero subset is not all-equal".into()));
            }
            let mut permutation = vec![i, j];
            permutation.extend(rest.iter().copied());
            Ok(FpSolution::without(FpKind::CriticalShape {
                permutation,
                a: a[i] % p,
                a_prime: ra[0] % p,
                b1: b[i],
                b2: b[j],
            }))
        }
    }
}

fn finish(a: &[u64], b: &[u64], x: Vec<u64>, k: u32, p: u64, pivot: (usize, usize)) -> Result<FpSolution> {
    if !fp_is_solution(a, b, &x, k, p, Some(pivot)) {
        return Err(Error::Internal("constructed point fails verification".into()));
    }
    Ok(FpSolution::solved(x, Some(pivot)))
}

/// Non-empty `J` with `Σ_J a_j ≡ Σ_J b_j ≡ 0 mod 3`.
///
/// Any five elements of `(Z/3)²` contain a non-empty zero-sum subsequence,
/// so the reachable-sums scan over the nine group elements always closes.
pub fn olson_zero_sum(pairs: &[(u64, u64)]) -> Result<Vec<usize>> {
    if pairs.len() < 5 {
        return Err(Error::PreconditionViolated("need at least five pairs".into()));
    }
    let enc = |(x, y): (u64, u64)| ((x % 3) * 3 + y % 3) as usize;
    let add = |u: usize, v: usize| ((u / 3 + v / 3) % 3) * 3 + (u % 3 + v % 3) % 3;
    // pred[g] = (index, previous element or None for a singleton).
    let mut pred: [Option<(usize, Option<usize>)>; 9] = [None; 9];
    for (j, &pr) in pairs.iter().enumerate() {
        let g = enc(pr);
        let snapshot: Vec<usize> = (0..9).filter(|&h| pred[h].is_some()).collect();
        let mut fresh: Vec<(usize, (usize, Option<usize>))> = Vec::new();
        if g == 0 {
            return Ok(vec![j]);
        }
        fresh.push((g, (j, None)));
        for h in snapshot {
            fresh.push((add(h, g), (j, Some(h))));
        }
        if let Some(&(_, (jj, prev))) = fresh.iter().find(|(t, _)| *t == 0) {
            let mut out = vec![jj];
            let mut cur = prev;
            while let Some(h) = cur {
                let (idx, before) = pred[h].expect("recorded");
                out.push(idx);
                cur = before;
            }
            out.sort_unstable();
            return Ok(out);
        }
        for (t, e) in fresh {
            if pred[t].is_none() {
                pred[t] = Some(e);
            }
        }
    }
    Err(Error::Internal("no zero-sum subsequence among five or more elements of (Z/3)²".into()))
}
