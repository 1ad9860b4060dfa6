//! Reduction of arbitrary integer systems to preconditioned and conditioned
//! form.
//!
//! Preconditioning cancels the common `p`-power of the linear form and
//! replaces zero degree-`k` coefficients by a high power of `p`.  Conditioning
//! reduces every `ν_i` below `k` by `x_i ↦ p^{−α_i} x_i`, then rotates the
//! valuation blocks cyclically (`x_0 ↦ p x_0`, divide by `p`) until the
//! partial block counts satisfy `υ_0 + … + υ_j ≥ (j + 1) s / k`.  All moves
//! are recorded as transform steps.

use crate::arith::{ppow_rat, vp, Int, Rat, Valuation};
use crate::error::{Error, Result};
use crate::system::{stats, DiagLinSystem, PadicContext};
use crate::transform::{Transcript, TransformStep};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// Record of the zero-coefficient perturbation `a_i ↦ p^n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Indices whose degree-`k` coefficient was zero.
    pub indices: Vec<usize>,
    /// The exponent `n`.
    pub exponent: u64,
}

/// Output of [`precondition`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preconditioned {
    /// The preconditioned system (equal to `transcript.derived`).
    pub system: DiagLinSystem,
    /// Steps from the (perturbed) input to `system`.
    pub transcript: Transcript,
    /// The perturbation applied before the steps, if any.
    pub perturbation: Option<Perturbation>,
}

/// Output of [`condition`] and [`normalize`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningReport {
    /// Steps from the input to the conditioned system.
    pub transcript: Transcript,
    /// The cyclic shift `r`: the new block `j` is the old block `j + r mod k`.
    pub shift: usize,
    /// The block counts of the conditioned system.
    pub upsilon_after: Vec<usize>,
    /// Exponent of the zero-coefficient perturbation, if one was applied.
    pub perturbation_exponent: Option<u64>,
}

fn finite_min(vals: impl Iterator<Item = Valuation>) -> Option<u64> {
    vals.filter_map(Valuation::finite).min()
}

/// The exponent `n = γ + k (1 + max finite ν)` used for zero coefficients
/// (with the witness exponent standing in for `γ` when `τ` is undefined).
pub fn perturbation_exponent(sys: &DiagLinSystem, ctx: &PadicContext) -> u64 {
    let max_nu = sys.a.iter().filter_map(|a| vp(a, &ctx.p).finite()).max().unwrap_or(0);
    ctx.witness_exponent() as u64 + ctx.k as u64 * (1 + max_nu)
}

/// Cancels the common `p`-power of the linear form and perturbs zero
/// degree-`k` coefficients.
///
/// Fails with `InvalidInput` when the linear form vanishes identically.
pub fn precondition(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<Preconditioned> {
    let m = finite_min(sys.b.iter().map(|b| vp(b, &ctx.p)))
        .ok_or_else(|| Error::InvalidInput("the linear form is identically zero".into()))?;
    let zeros: Vec<usize> = (0..sys.s()).filter(|&i| sys.a[i].is_zero()).collect();
    let mut start = sys.clone();
    let perturbation = if zeros.is_empty() {
        None
    } else {
        let n = perturbation_exponent(sys, ctx);
        for &i in &zeros {
            start.a[i] = ctx.pe(n);
        }
        Some(Perturbation { indices: zeros, exponent: n })
    };
    let mut transcript = Transcript::new(start, ctx.k);
    if m > 0 {
        let step = TransformStep::scaling(
            "clear-linear",
            vec![Rat::one(); sys.s()],
            Rat::one(),
            ppow_rat(&ctx.p, -(m as i64)),
        );
        transcript.push(step)?;
    }
    Ok(Preconditioned { system: transcript.derived.clone(), transcript, perturbation })
}

/// Partial block counts `υ_0 + … + υ_j ≥ (j + 1) s / k` for every `j`.
fn shift_ok(upsilon: &[usize], s: usize) -> bool {
    let k = upsilon.len();
    let mut acc = 0usize;
    upsilon.iter().enumerate().all(|(j, u)| {
        acc += u;
        acc * k >= (j + 1) * s
    })
}

/// Brings a preconditioned system (all `a_i ≠ 0`, some unit `b_i`) into
/// conditioned form with a single recorded step (α-reduction, cyclic shift
/// and re-clearing of the linear form combined).
pub fn condition(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<ConditioningReport> {
    if sys.a.iter().any(|a| a.is_zero()) {
        return Err(Error::PreconditionViolated("zero degree-k coefficient".into()));
    }
    if finite_min(sys.b.iter().map(|b| vp(b, &ctx.p))) != Some(0) {
        return Err(Error::PreconditionViolated("no unit linear coefficient".into()));
    }
    let k = ctx.k as u64;
    let s = sys.s();
    let nus: Vec<u64> = sys.a.iter().map(|a| vp(a, &ctx.p).finite().unwrap()).collect();
    let mut upsilon = vec![0usize; k as usize];
    for n in &nus {
        upsilon[(n % k) as usize] += 1;
    }
    let shift = (0..k as usize)
        .find(|&r| {
            let rotated: Vec<usize> = (0..k as usize).map(|j| upsilon[(j + r) % k as usize]).collect();
            shift_ok(&rotated, s)
        })
        .ok_or_else(|| Error::Internal("no cyclic shift satisfies the block-count inequalities".into()))?;
    // x_i ↦ p^{e_i} x_i with e_i = −α_i, plus one more factor p on the blocks
    // that rotate to the top; then divide the degree-k equation by p^shift.
    let exps: Vec<i64> =
        nus.iter().map(|n| -((n / k) as i64) + if ((n % k) as usize) < shift { 1 } else { 0 }).collect();
    let mut min_b: Option<i64> = None;
    for (b, e) in sys.b.iter().zip(&exps) {
        if let Valuation::Finite(v) = vp(b, &ctx.p) {
            let w = v as i64 + e;
            min_b = Some(min_b.map_or(w, |m: i64| m.min(w)));
        }
    }
    let min_b = min_b.unwrap();
    let mut transcript = Transcript::new(sys.clone(), ctx.k);
    let trivial = shift == 0 && min_b == 0 && exps.iter().all(|e| *e == 0);
    if !trivial {
        let mults = exps.iter().map(|e| ppow_rat(&ctx.p, *e)).collect();
        let step =
            TransformStep::scaling("condition", mults, ppow_rat(&ctx.p, -(shift as i64)), ppow_rat(&ctx.p, -min_b));
        transcript.push(step)?;
    }
    let upsilon_after = stats(&transcript.derived, ctx).upsilon;
    if !is_conditioned(&transcript.derived, ctx) {
        return Err(Error::Internal("conditioning produced an unconditioned system".into()));
    }
    Ok(ConditioningReport { transcript, shift, upsilon_after, perturbation_exponent: None })
}

/// Preconditions and conditions in one go; the transcript starts at the
/// (possibly perturbed) input.
pub fn normalize(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<(ConditioningReport, Option<Perturbation>)> {
    let pre = precondition(sys, ctx)?;
    let mut rep = condition(&pre.system, ctx)?;
    let mut t = pre.transcript.clone();
    t.extend(&rep.transcript)?;
    rep.transcript = t;
    rep.perturbation_exponent = pre.perturbation.as_ref().map(|p| p.exponent);
    Ok((rep, pre.perturbation))
}

/// Exact check of `#{i : p^j ∤ a_i} ≥ j s / k` for `1 ≤ j ≤ k`, together with
/// the existence of a unit linear coefficient.
pub fn is_conditioned(sys: &DiagLinSystem, ctx: &PadicContext) -> bool {
    let p: &Int = &ctx.p;
    if !sys.b.iter().any(|b| vp(b, p) == Valuation::Finite(0)) {
        return false;
    }
    let s = sys.s() as u64;
    let k = ctx.k as u64;
    let nus: Vec<Valuation> = sys.a.iter().map(|a| vp(a, p)).collect();
    (1..=k).all(|j| {
        let count = nus.iter().filter(|n| **n < Valuation::Finite(j)).count() as u64;
        count * k >= j * s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat, rpow};
    use crate::hensel::{check_witness, HenselWitness};
    use crate::oracle::{find_nonsingular, CongruenceQuery};
    use proptest::prelude::*;

    /// p = 5, k = 4 system with the requested block counts and unit b's.
    fn with_blocks(ups: &[usize]) -> DiagLinSystem {
        let mut a = Vec::new();
        for (j, &u) in ups.iter().enumerate() {
            for t in 0..u {
                a.push(5i64.pow(j as u32) * [1, 2, 3, 4][t % 4]);
            }
        }
        let b = vec![1i64; a.len()];
        DiagLinSystem::from_i64(&a, &b)
    }

    #[test]
    fn precondition_perturbs_zero_coefficient() {
        let ctx = PadicContext::small(5, 4);
        let sys = DiagLinSystem::from_i64(&[1, 0], &[2, 2]);
        let pre = precondition(&sys, &ctx).unwrap();
        // n = 1 + 4·(1 + 0) = 5, no linear clearing needed.
        let pert = pre.perturbation.unwrap();
        assert_eq!(pert, Perturbation { indices: vec![1], exponent: 5 });
        assert!(pre.transcript.steps.is_empty());
        assert_eq!(pre.system, DiagLinSystem::from_i64(&[1, 3125], &[2, 2]));
        let st = stats(&pre.system, &ctx);
        assert_eq!(st.nu, vec![Valuation::Finite(0), Valuation::Finite(5)]);
    }

    #[test]
    fn precondition_cancels_linear_content() {
        let ctx = PadicContext::small(5, 4);
        let pre = precondition(&DiagLinSystem::from_i64(&[1, 1], &[5, 10]), &ctx).unwrap();
        assert_eq!(pre.system, DiagLinSystem::from_i64(&[1, 1], &[1, 2]));
        assert_eq!(pre.transcript.steps.len(), 1);
        assert_eq!(pre.transcript.steps[0].scale_b, Rat::new(int(1), int(5)));
    }

    #[test]
    fn precondition_identity_and_errors() {
        let ctx = PadicContext::small(5, 4);
        let sys = DiagLinSystem::from_i64(&[1, 2, 3], &[1, 0, 4]);
        let pre = precondition(&sys, &ctx).unwrap();
        assert!(pre.transcript.steps.is_empty() && pre.perturbation.is_none());
        assert_eq!(pre.system, sys);
        let bad = DiagLinSystem::from_i64(&[1, 2], &[0, 0]);
        assert!(matches!(precondition(&bad, &ctx), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn condition_rotates_blocks() {
        let ctx = PadicContext::small(5, 4);
        let sys = with_blocks(&[1, 5, 1, 1]);
        assert!(!is_conditioned(&sys, &ctx));
        let rep = condition(&sys, &ctx).unwrap();
        assert_eq!(rep.shift, 1);
        assert_eq!(rep.upsilon_after, vec![5, 1, 1, 1]);
        assert!(is_conditioned(&rep.transcript.derived, &ctx));
        rep.transcript.verify_replay().unwrap();
    }

    #[test]
    fn condition_keeps_conditioned_systems() {
        let ctx = PadicContext::small(5, 4);
        let sys = with_blocks(&[5, 1, 1, 1]);
        assert!(is_conditioned(&sys, &ctx));
        let rep = condition(&sys, &ctx).unwrap();
        assert_eq!(rep.shift, 0);
        assert!(rep.transcript.steps.is_empty());
        assert_eq!(rep.upsilon_after, vec![5, 1, 1, 1]);
    }

    #[test]
    fn condition_on_power_of_two_example() {
        let ctx = PadicContext::small(2, 4);
        let mut a = vec![1i64; 15];
        a.extend([8, 8, 8]);
        let mut b = vec![0i64; 15];
        b.extend([1, 1, 1]);
        let rep = condition(&DiagLinSystem::from_i64(&a, &b), &ctx).unwrap();
        assert_eq!(rep.shift, 0);
        assert_eq!(rep.upsilon_after, vec![15, 0, 0, 3]);
        // Replacing the zero linear coefficients by 2^4 changes nothing.
        let mut b2 = vec![16i64; 15];
        b2.extend([1, 1, 1]);
        let rep2 = condition(&DiagLinSystem::from_i64(&a, &b2), &ctx).unwrap();
        assert_eq!(rep2.upsilon_after, vec![15, 0, 0, 3]);
    }

    #[test]
    fn is_conditioned_needs_unit_linear_coefficient() {
        let ctx = PadicContext::small(5, 4);
        let mut sys = with_blocks(&[5, 1, 1, 1]);
        for b in sys.b.iter_mut() {
            *b = int(5);
        }
        assert!(!is_conditioned(&sys, &ctx));
    }

    #[test]
    fn condition_reduces_high_valuations() {
        let ctx = PadicContext::small(5, 4);
        // ν = 9 reduces to 1; ν = 4 reduces to 0.
        let sys = DiagLinSystem::from_i64(&[1, 2, 3, 625, 1953125 * 2], &[1, 1, 1, 1, 1]);
        let rep = condition(&sys, &ctx).unwrap();
        let st = stats(&rep.transcript.derived, &ctx);
        assert!(st.nu.iter().all(|n| *n < Valuation::Finite(4)));
        assert!(is_conditioned(&rep.transcript.derived, &ctx));
    }

    fn eval_rat(sys: &DiagLinSystem, k: u32, x: &[Rat]) -> (Rat, Rat) {
        let a = sys.a.iter().zip(x).map(|(a, x)| rat(a) * rpow(x, k)).sum();
        let b = sys.b.iter().zip(x).map(|(b, x)| rat(b) * x).sum();
        (a, b)
    }

    proptest! {
        /// Conditioning always succeeds on preconditioned input and a planted
        /// exact solution survives the round trip through the transcript.
        #[test]
        fn planted_solution_round_trip(
            which in 0usize..4,
            raw in prop::collection::vec((1i64..40, 0u32..9, -3i64..4, -20i64..20), 4..12),
        ) {
            let (p, k) = [(5u64, 4u32), (2, 4), (3, 6), (7, 6)][which];
            let ctx = PadicContext::small(p, k);
            let pp = p as i64;
            let mut a: Vec<Int> = raw.iter().map(|(u, e, _, _)| int(*u) * int(pp).pow(*e)).collect();
            let x: Vec<Int> = std::iter::once(int(1)).chain(raw.iter().skip(1).map(|t| int(t.2))).collect();
            let mut b: Vec<Int> = raw.iter().map(|t| int(t.3)).collect();
            let rest_a: Int = (1..a.len()).map(|i| &a[i] * x[i].pow(k)).sum();
            let rest_b: Int = (1..a.len()).map(|i| &b[i] * &x[i]).sum();
            a[0] = -rest_a;
            b[0] = -rest_b;
            prop_assume!(!a[0].is_zero());
            let sys = DiagLinSystem::new(a, b).unwrap();
            prop_assume!(sys.b.iter().any(|v| !v.is_zero()));
            let (rep, pert) = normalize(&sys, &ctx).unwrap();
            prop_assert!(pert.is_none());
            prop_assert!(is_conditioned(&rep.transcript.derived, &ctx));
            rep.transcript.verify_replay().unwrap();
            // Push x forward along the composite map and pull it back again.
            let map = rep.transcript.composite_map();
            let mut y = vec![Rat::zero(); rep.transcript.derived.s()];
            for (i, m) in map.iter().enumerate() {
                let (j, c) = m.clone().unwrap();
                y[j] = rat(&x[i]) / c;
            }
            let (da, db) = eval_rat(&rep.transcript.derived, k, &y);
            prop_assert!(da.is_zero() && db.is_zero());
            let back = rep.transcript.pull_back(&y);
            prop_assert_eq!(back, x.iter().map(rat).collect::<Vec<_>>());
        }

        /// Witnesses of the perturbed system whose pivot avoids perturbed
        /// coordinates are witnesses of the original system.
        #[test]
        fn perturbed_witnesses_transfer(
            a in prop::collection::vec(prop_oneof![Just(0i64), 1i64..25], 5..7),
            b in prop::collection::vec(0i64..25, 5..7),
        ) {
            let n = a.len().min(b.len());
            let sys = DiagLinSystem::from_i64(&a[..n], &b[..n]);
            let ctx = PadicContext::small(5, 4);
            prop_assume!(sys.b.iter().any(|v| !v.is_zero()));
            let pre = precondition(&sys, &ctx).unwrap();
            let rep = find_nonsingular(&CongruenceQuery::new(pre.system.clone(), ctx.clone())).unwrap();
            if let (Some(x), Some(pivot)) = (rep.witness, rep.nonsingular_pivot) {
                let perturbed = pre.perturbation.map(|p| p.indices).unwrap_or_default();
                if !perturbed.contains(&pivot.0) && !perturbed.contains(&pivot.1) {
                    let original = pre.transcript.replay_from(&sys).unwrap();
                    let w = HenselWitness { x, pivot, context: ctx.clone(), system: original };
                    prop_assert!(check_witness(&w).ok);
                }
            }
        }
    }
}
