//! The sharpness counterexample for `k = p − 1`: the form
//! `Σ_{j<k} p^j Σ_{l≤k} x_{jk+l}^k` together with `x_{k²} + x_{k²+1} = 0`
//! in `k² + 1` variables, and a replayable descent proving it has only the
//! trivial p-adic solution.
//!
//! Each level of the descent is a finite claim about one block of `k`
//! variables: `k`-th powers modulo `p` are `0` or `1`, so a vanishing block
//! sum modulo `p` needs a number of units in `0..=k` divisible by `p`, and
//! `k < p` leaves only zero.  The block is then divisible by `p`, the form is
//! divided by `p`, and the next block leads.  After `k` levels every
//! coordinate of the degree form is divisible by `p`, the linear equation
//! forces the last one, and primitivity fails.

use crate::arith::{int, is_prime_u64, Int};
use crate::certificate::{DescentLevel, DescentTrace};
use crate::error::{Error, Result};
use crate::system::{pow_mod_u64, DiagLinSystem};
use num_traits::Zero;

/// Builds the `k² + 1`-variable counterexample system for `k = p − 1`.
pub fn counterexample_system(p: u64) -> Result<DiagLinSystem> {
    if p <= 3 || !is_prime_u64(p) {
        return Err(Error::NotApplicable(format!("counterexample needs a prime p >= 5, got {p}")));
    }
    let k = (p - 1) as usize;
    let s = k * k + 1;
    let mut a = Vec::with_capacity(s);
    for j in 0..k {
        let c = int(p as i64).pow(j as u32);
        a.extend(std::iter::repeat_n(c, k));
    }
    a.push(Int::zero());
    let mut b = vec![Int::zero(); s];
    b[s - 2] = int(1);
    b[s - 1] = int(1);
    DiagLinSystem::new(a, b)
}

fn block_level(p: u64, k: usize, level: usize) -> Result<DescentLevel> {
    // The collapse: u^k ≡ 1 mod p for every unit u.
    for u in 1..p {
        if pow_mod_u64(u, k as u64, p) != 1 {
            return Err(Error::Internal(format!("{u}^{k} is not 1 mod {p}")));
        }
    }
    // Enumerate all 2^k unit/zero patterns of the block and record which
    // give a vanishing sum; only the all-zero pattern may survive.
    let mut states = 0u64;
    for mask in 0u64..(1u64 << k) {
        states += 1;
        let units = mask.count_ones() as u64;
        if units.is_multiple_of(p) && mask != 0 {
            return Err(Error::Internal(format!("block pattern {mask:b} vanishes mod {p}")));
        }
    }
    let vanishing_unit_counts = (0..=k).filter(|n| (*n as u64).is_multiple_of(p)).collect();
    Ok(DescentLevel { level, indices: (level * k..(level + 1) * k).collect(), vanishing_unit_counts, states })
}

/// Produces the descent trace for prime `p ≥ 5`.
pub fn build_descent(p: u64) -> Result<DescentTrace> {
    counterexample_system(p)?;
    let k = (p - 1) as usize;
    let levels = (0..k).map(|j| block_level(p, k, j)).collect::<Result<Vec<_>>>()?;
    Ok(DescentTrace {
        p,
        k: k as u32,
        s: k * k + 1,
        levels,
        linear_forcing: format!(
            "x_{} + x_{} = 0 with x_{} divisible by p forces x_{} divisible by p",
            k * k,
            k * k + 1,
            k * k,
            k * k + 1
        ),
        conclusion: "every coordinate of a solution is divisible by p, so no primitive solution exists; \
                     by homogeneity the only solution is zero"
            .into(),
    })
}

/// Re-derives the descent for the system it claims and compares.
pub fn check_descent(trace: &DescentTrace, original: &DiagLinSystem) -> Result<()> {
    let expected_sys = counterexample_system(trace.p)?;
    if &expected_sys != original {
        return Err(Error::InvalidInput("the system is not the counterexample for this prime".into()));
    }
    let rebuilt = build_descent(trace.p)?;
    if &rebuilt != trace {
        return Err(Error::InvalidInput("trace differs from the recomputed descent".into()));
    }
    if trace.levels.iter().any(|l| l.vanishing_unit_counts != vec![0]) {
        return Err(Error::Internal("a level admits a nonzero unit count".into()));
    }
    Ok(())
}

/// True when `sys` is the counterexample for `p` (with `k = p − 1`).
pub fn is_counterexample(sys: &DiagLinSystem, p: u64, k: u32) -> bool {
    k as u64 + 1 == p && counterexample_system(p).map(|c| &c == sys).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{ipow, modp};
    use crate::oracle::{find_nonsingular, CongruenceQuery};
    use crate::system::PadicContext;

    #[test]
    fn counterexample_shapes() {
        let s5 = counterexample_system(5).unwrap();
        assert_eq!(s5.s(), 17);
        assert_eq!(s5.a[4], int(5));
        assert_eq!(s5.a[15], int(125));
        assert!(s5.a[16].is_zero());
        assert_eq!(counterexample_system(7).unwrap().s(), 37);
        assert!(matches!(counterexample_system(3), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn descent_traces_verify() {
        for p in [5u64, 7] {
            let t = build_descent(p).unwrap();
            assert_eq!(t.levels.len(), (p - 1) as usize);
            assert!(t.levels.iter().all(|l| l.states == 1 << (p - 1)));
            check_descent(&t, &counterexample_system(p).unwrap()).unwrap();
        }
        let mut t = build_descent(5).unwrap();
        t.levels[0].vanishing_unit_counts.push(4);
        assert!(check_descent(&t, &counterexample_system(5).unwrap()).is_err());
    }

    /// Independent check of the level claim: brute force over all residue
    /// vectors of one block modulo p.
    #[test]
    fn block_claim_by_full_residue_enumeration() {
        let p = 5i64;
        let k = 4u32;
        let mut count = 0;
        for v in 0..p.pow(k) {
            let xs: Vec<i64> = (0..k).map(|i| (v / p.pow(i)) % p).collect();
            let sum: Int = xs.iter().map(|x| ipow(&int(*x), k)).sum();
            if modp(&sum, &int(p)).is_zero() {
                assert!(xs.iter().all(|x| *x == 0));
                count += 1;
            }
        }
        assert_eq!(count, 1);
    }

    #[test]
    fn counterexample_has_no_witness_mod_p() {
        let sys = counterexample_system(5).unwrap();
        let rep = find_nonsingular(&CongruenceQuery::new(sys, PadicContext::small(5, 4))).unwrap();
        assert!(!rep.found && rep.exhausted);
    }
}
