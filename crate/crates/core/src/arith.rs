//! Exact integer arithmetic with p-adic valuations.
//!
//! Everything here works on arbitrary-precision integers ([`Int`]) and exact
//! rationals ([`Rat`]).  Residues are always returned as least non-negative
//! representatives.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Arbitrary-precision integer used throughout the crate.
pub type Int = BigInt;
/// Exact rational number.
pub type Rat = BigRational;

/// A p-adic valuation: a finite exponent or `Infinite` for zero.
///
/// The derived ordering places every finite value below `Infinite`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Valuation {
    /// `p^e` exactly divides the value.
    Finite(u64),
    /// The value is zero.
    Infinite,
}

impl Valuation {
    /// The finite exponent, or `None` for zero.
    pub fn finite(self) -> Option<u64> {
        match self {
            Valuation::Finite(e) => Some(e),
            Valuation::Infinite => None,
        }
    }

    /// True when the valuation is at least `e`.
    pub fn at_least(self, e: u64) -> bool {
        match self {
            Valuation::Finite(v) => v >= e,
            Valuation::Infinite => true,
        }
    }

    /// The finite exponent, saturating `Infinite` to `cap`.
    pub fn capped(self, cap: u64) -> u64 {
        match self {
            Valuation::Finite(v) => v.min(cap),
            Valuation::Infinite => cap,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(e) => write!(f, "{e}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

/// Shorthand constructor for small integers.
pub fn int(v: i64) -> Int {
    Int::from(v)
}

/// The exact exponent `e` with `p^e || n`; `Infinite` for `n = 0`.
///
/// ```
/// use padic_diaglin::arith::{int, vp, Valuation};
/// assert_eq!(vp(&int(250), &int(5)), Valuation::Finite(3));
/// assert_eq!(vp(&int(0), &int(2)), Valuation::Infinite);
/// ```
pub fn vp(n: &Int, p: &Int) -> Valuation {
    if n.is_zero() {
        return Valuation::Infinite;
    }
    debug_assert!(p > &Int::one());
    if let (Some(small), Some(ps)) = (n.abs().to_u128(), p.to_u128()) {
        let mut m = small;
        let mut e = 0u64;
        while m % ps == 0 {
            m /= ps;
            e += 1;
        }
        return Valuation::Finite(e);
    }
    let mut m = n.abs();
    let mut e = 0u64;
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            break;
        }
        m = q;
        e += 1;
    }
    Valuation::Finite(e)
}

/// Valuation of a nonzero rational (numerator minus denominator valuation).
/// Returns `None` for zero.
pub fn vp_rat(x: &Rat, p: &Int) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let n = vp(x.numer(), p).finite().unwrap() as i64;
    let d = vp(x.denom(), p).finite().unwrap() as i64;
    Some(n - d)
}

/// Splits a nonzero `n` as `p^e · u` with `p ∤ u`; returns `(e, u)`.
/// For `n = 0` returns `None`.
pub fn unit_part(n: &Int, p: &Int) -> Option<(u64, Int)> {
    let e = vp(n, p).finite()?;
    Some((e, n / p.pow(e as u32)))
}

/// Least non-negative residue of `n` modulo `m > 0`.
pub fn modp(n: &Int, m: &Int) -> Int {
    n.mod_floor(m)
}

/// `base^exp mod m` with a least non-negative result.
pub fn pow_mod(base: &Int, exp: &Int, m: &Int) -> Int {
    if m.is_one() {
        return Int::zero();
    }
    modp(base, m).modpow(exp, m)
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub fn mod_inv(a: &Int, m: &Int) -> Option<Int> {
    let e = modp(a, m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(modp(&e.x, m))
    } else {
        None
    }
}

/// `p^e` as an [`Int`].
pub fn ppow(p: &Int, e: u64) -> Int {
    num_traits::pow::pow(p.clone(), e as usize)
}

/// Integer power `x^k`.
pub fn ipow(x: &Int, k: u32) -> Int {
    num_traits::pow::pow(x.clone(), k as usize)
}

/// Rational power `x^k`.
pub fn rpow(x: &Rat, k: u32) -> Rat {
    num_traits::pow::pow(x.clone(), k as usize)
}

/// Converts an integer to a rational.
pub fn rat(n: &Int) -> Rat {
    Rat::from_integer(n.clone())
}

/// `p^e` as a rational, for possibly negative `e`.
pub fn ppow_rat(p: &Int, e: i64) -> Rat {
    if e >= 0 {
        rat(&ppow(p, e as u64))
    } else {
        Rat::new(Int::one(), ppow(p, (-e) as u64))
    }
}

/// True when `p` divides `n` (with `0` divisible by everything).
pub fn divides(p: &Int, n: &Int) -> bool {
    n.mod_floor(p).is_zero()
}

/// Deterministic Miller–Rabin for 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        acc
    };
    'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Primality test for arbitrary-precision integers.
///
/// Exact for values below `2^64`; above that a Miller–Rabin test with the
/// first twenty prime bases (no known counterexample, but not a proof).
pub fn is_prime(n: &Int) -> bool {
    if n.sign() != Sign::Plus {
        return false;
    }
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    let one = Int::one();
    let nm1 = n - &one;
    let mut d = nm1.clone();
    let mut r = 0u32;
    while d.is_even() {
        d >>= 1;
        r += 1;
    }
    let bases = [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];
    'outer: for a in bases {
        let a = Int::from(a);
        if divides(&a, n) {
            return false;
        }
        let mut x = a.modpow(&d, n);
        if x == one || x == nm1 {
            continue;
        }
        for _ in 1..r {
            x = (&x * &x) % n;
            if x == nm1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// `gcd(a, b)` for machine integers.
pub fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Exact division of integers; panics if `d ∤ n` (internal invariant).
pub fn exact_div(n: &Int, d: &Int) -> Int {
    let (q, r) = n.div_rem(d);
    assert!(r.is_zero(), "exact_div: {d} does not divide {n}");
    q
}

/// Converts a rational known to be integral into an [`Int`].
pub fn rat_to_int(x: &Rat) -> Option<Int> {
    if x.is_integer() {
        Some(x.to_integer())
    } else {
        None
    }
}

/// Reduces a p-integral rational `x` (denominator prime to `p`) modulo `p^e`.
pub fn rat_mod(x: &Rat, p: &Int, e: u64) -> Option<Int> {
    let m = ppow(p, e);
    let inv = mod_inv(x.denom(), &m)?;
    Some(modp(&(x.numer() * inv), &m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vp_frozen_examples() {
        assert_eq!(vp(&int(250), &int(5)), Valuation::Finite(3));
        assert_eq!(vp(&int(0), &int(2)), Valuation::Infinite);
        assert_eq!(vp(&int(18), &int(3)), Valuation::Finite(2));
        assert_eq!(vp(&int(-48), &int(2)), Valuation::Finite(4));
    }

    #[test]
    fn vp_handles_huge_values() {
        let n = ppow(&int(7), 300) * int(10);
        assert_eq!(vp(&n, &int(7)), Valuation::Finite(300));
    }

    #[test]
    fn valuation_ordering_puts_infinity_last() {
        assert!(Valuation::Finite(u64::MAX) < Valuation::Infinite);
        assert!(Valuation::Finite(2) < Valuation::Finite(3));
    }

    #[test]
    fn primality_small_table() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime_u64(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
        assert!(is_prime(&"170141183460469231731687303715884105727".parse().unwrap()));
        assert!(!is_prime(&"170141183460469231731687303715884105729".parse().unwrap()));
    }

    #[test]
    fn inverse_and_rational_reduction() {
        assert_eq!(mod_inv(&int(3), &int(7)), Some(int(5)));
        assert_eq!(mod_inv(&int(5), &int(25)), None);
        let x = Rat::new(int(1), int(3));
        assert_eq!(rat_mod(&x, &int(5), 2), Some(int(17)));
    }

    proptest! {
        #[test]
        fn unit_part_round_trips(n in any::<i64>().prop_filter("nonzero", |v| *v != 0),
                                 p in prop::sample::select(vec![2i64, 3, 5, 7, 11, 13])) {
            let n = int(n);
            let p = int(p);
            let (e, u) = unit_part(&n, &p).unwrap();
            prop_assert!(!divides(&p, &u));
            prop_assert_eq!(ppow(&p, e) * u, n);
        }

        #[test]
        fn pow_mod_matches_naive(b in -50i64..50, e in 0u32..12, m in 1i64..500) {
            let naive = modp(&ipow(&int(b), e), &int(m));
            prop_assert_eq!(pow_mod(&int(b), &Int::from(e), &int(m)), naive);
        }
    }
}
