//! Hensel lifting: the two-variable lift with the `ξ_l` construction, the
//! reduction of a full system to that lift, witness checks, and the classical
//! one-variable Newton lift.

use crate::arith::{divides, exact_div, ipow, mod_inv, modp, vp, Int, Valuation};
use crate::error::{Error, Result};
use crate::system::{DiagLinSystem, PadicContext};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// A finite certificate of p-adic solubility: a residue vector satisfying
/// `A(x) ≡ 0 mod p^γ`, `B(x) ≡ 0 mod p`, together with an index pair whose
/// Jacobian minor `b_i a_j x_j^{k−1} − b_j a_i x_i^{k−1}` is a unit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HenselWitness {
    /// The residue vector.
    #[serde(with = "crate::serde_util::int_vec")]
    pub x: Vec<Int>,
    /// The pivot pair `(i, j)` (0-based).
    pub pivot: (usize, usize),
    /// The arithmetic frame.
    pub context: PadicContext,
    /// The system the witness certifies.
    pub system: DiagLinSystem,
}

/// Outcome of [`check_witness`], naming the first failed condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessCheck {
    /// True iff every condition holds.
    pub ok: bool,
    /// Description of the first failed condition.
    pub failure: Option<String>,
    /// `A(x)` evaluated exactly.
    pub a_value: Int,
    /// `B(x)` evaluated exactly.
    pub b_value: Int,
    /// The pivot minor evaluated exactly.
    pub minor: Int,
}

/// The Jacobian minor `b_i a_j x_j^{k−1} − b_j a_i x_i^{k−1}`.
pub fn minor(sys: &DiagLinSystem, k: u32, x: &[Int], i: usize, j: usize) -> Int {
    &sys.b[i] * &sys.a[j] * ipow(&x[j], k - 1) - &sys.b[j] * &sys.a[i] * ipow(&x[i], k - 1)
}

/// Checks the two congruences and the minor condition by exact arithmetic.
pub fn check_witness(w: &HenselWitness) -> WitnessCheck {
    let ctx = &w.context;
    let sys = &w.system;
    let k = ctx.k;
    let fail = |msg: String| WitnessCheck {
        ok: false,
        failure: Some(msg),
        a_value: Int::zero(),
        b_value: Int::zero(),
        minor: Int::zero(),
    };
    if w.x.len() != sys.s() {
        return fail(format!("witness has {} entries, system has {}", w.x.len(), sys.s()));
    }
    let (i, j) = w.pivot;
    if i >= sys.s() || j >= sys.s() || i == j {
        return fail(format!("pivot ({i}, {j}) is not a pair of distinct indices"));
    }
    let g = ctx.witness_exponent() as u64;
    let a_value = sys.eval_a(k, &w.x);
    let b_value = sys.eval_b(&w.x);
    let m = minor(sys, k, &w.x, i, j);
    let mut failure = None;
    if !vp(&a_value, &ctx.p).at_least(g) {
        failure = Some(format!("congruence A(x) = 0 mod p^{g} failed"));
    } else if !divides(&ctx.p, &b_value) {
        failure = Some("congruence B(x) = 0 mod p failed".to_string());
    } else if divides(&ctx.p, &m) {
        failure = Some(format!("minor at pivot ({i}, {j}) is divisible by p"));
    }
    WitnessCheck { ok: failure.is_none(), failure, a_value, b_value, minor: m }
}

/// Record of the `ξ_l` construction in the two-variable lift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HenselTrace {
    /// Coefficients of `φ(t) = a_1(B − b_2 t)^k + a_2 b_1^k t^k − A b_1^k`,
    /// constant term first.
    pub phi: Vec<Int>,
    /// `ξ_γ, ξ_{γ+1}, …` (the first entry is the starting value).
    pub xi: Vec<Int>,
    /// Level of the first recorded `ξ`.
    pub start_level: u32,
    /// `v_p(φ′(ξ_γ))`.
    pub derivative_valuation: u32,
    /// True when the roles of the two indices were exchanged so that
    /// `p ∤ b_1 a_2 x_2`.
    pub swapped: bool,
}

impl HenselTrace {
    /// Evaluates `φ` at `t`.
    pub fn phi_at(&self, t: &Int) -> Int {
        let mut acc = Int::zero();
        for c in self.phi.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Replays the two recorded congruences at every level.
    pub fn verify(&self, p: &Int) -> bool {
        let tau = self.derivative_valuation as u64;
        self.xi.iter().enumerate().all(|(n, xi)| {
            let l = self.start_level as u64 + n as u64;
            let ok_root = vp(&self.phi_at(xi), p).at_least(l);
            let ok_step = match self.xi.get(n + 1) {
                Some(next) => vp(&(next - xi), p).at_least(l.saturating_sub(tau)),
                None => true,
            };
            ok_root && ok_step
        })
    }
}

fn binomial(n: u32, r: u32) -> Int {
    let mut acc = Int::one();
    for i in 0..r {
        acc = acc * Int::from(n - i) / Int::from(i + 1);
    }
    acc
}

/// Lifts a non-singular solution of the pair
/// `a_1 x_1^k + a_2 x_2^k ≡ A mod p^γ`, `b_1 x_1 + b_2 x_2 = B`
/// to `(y_1, y_2)` with `a_1 y_1^k + a_2 y_2^k ≡ A` and `b_1 y_1 + b_2 y_2 ≡ B`
/// modulo `p^M`.  The coordinate that plays the role of `y_2` after the
/// symmetry normalization is a unit.
#[allow(clippy::too_many_arguments)]
pub fn lift_pair(
    a1: &Int,
    a2: &Int,
    b1: &Int,
    b2: &Int,
    big_a: &Int,
    big_b: &Int,
    x1: &Int,
    x2: &Int,
    ctx: &PadicContext,
    m: u32,
) -> Result<((Int, Int), HenselTrace)> {
    let p = &ctx.p;
    let k = ctx.k;
    let g = ctx.witness_exponent();
    let tau = ctx.vpk;
    if b1 * x1 + b2 * x2 != *big_b {
        return Err(Error::PreconditionViolated("linear equation b1 x1 + b2 x2 = B does not hold".into()));
    }
    let lhs = a1 * ipow(x1, k) + a2 * ipow(x2, k) - big_a;
    if !vp(&lhs, p).at_least(g as u64) {
        return Err(Error::PreconditionViolated(format!("a1 x1^k + a2 x2^k = A mod p^{g} does not hold")));
    }
    let mnr = b1 * a2 * ipow(x2, k - 1) - b2 * a1 * ipow(x1, k - 1);
    if divides(p, &mnr) {
        return Err(Error::PreconditionViolated("minor b1 a2 x2^(k-1) - b2 a1 x1^(k-1) is divisible by p".into()));
    }
    let swapped = divides(p, &(b1 * a2 * x2));
    let (a1, a2, b1, b2, x2) = if swapped { (a2, a1, b2, b1, x1) } else { (a1, a2, b1, b2, x2) };
    debug_assert!(!divides(p, &(b1 * a2 * x2)));

    let b1k = ipow(b1, k);
    let mut phi: Vec<Int> = (0..=k).map(|r| a1 * binomial(k, r) * ipow(big_b, k - r) * ipow(&-b2, r)).collect();
    phi[k as usize] += a2 * &b1k;
    phi[0] -= big_a * &b1k;
    let mut trace = HenselTrace { phi, xi: vec![x2.clone()], start_level: g, derivative_valuation: tau, swapped };

    let dphi =
        |t: &Int| -> Int { Int::from(k) * (a2 * &b1k * ipow(t, k - 1) - a1 * b2 * ipow(&(big_b - b2 * t), k - 1)) };
    let d0 = dphi(x2);
    if vp(&d0, p) != Valuation::Finite(tau as u64) {
        return Err(Error::Internal(format!("phi'(x2) does not have valuation {tau}")));
    }
    let target = (m + tau).max(g);
    let mut xi = x2.clone();
    for l in g..target {
        let pl = ctx.pe(l as u64);
        let val = trace.phi_at(&xi);
        let (q, r) = val.div_rem(&pl);
        if !r.is_zero() {
            return Err(Error::Internal(format!("phi(xi_{l}) is not divisible by p^{l}")));
        }
        let dv = exact_div(&dphi(&xi), &ctx.pe(tau as u64));
        let inv = mod_inv(&dv, p).ok_or_else(|| Error::Internal("phi'/p^tau is not a unit".into()))?;
        let h = modp(&(-q * inv), p);
        xi = modp(&(xi + ctx.pe((l - tau) as u64) * h), &ctx.pe(l as u64 + 1));
        trace.xi.push(xi.clone());
    }
    let pm = ctx.pe(m as u64);
    let y2 = modp(&xi, &pm);
    let inv_b1 = mod_inv(b1, &pm).ok_or_else(|| Error::Internal("b1 is not a unit".into()))?;
    let y1 = modp(&((big_b - b2 * &y2) * inv_b1), &pm);
    Ok(if swapped { ((y2, y1), trace) } else { ((y1, y2), trace) })
}

/// A solution of a full system modulo `p^M` obtained from a witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftedSolution {
    /// The vector (pivot coordinates lifted, the rest frozen at the witness).
    #[serde(with = "crate::serde_util::int_vec")]
    pub x: Vec<Int>,
    /// Index of a coordinate of minimal valuation (a p-adic unit for pair
    /// witnesses).
    pub unit_index: usize,
    /// The precision `M`.
    pub precision: u32,
    /// `v_p(A(x))`, capped at the report.
    pub residual_a: Valuation,
    /// `v_p(B(x))`.
    pub residual_b: Valuation,
}

/// Turns a checked witness into a solution modulo `p^M`, following the
/// reduction of a full system to the two-variable lift.
pub fn solve_from_witness(w: &HenselWitness, m: u32) -> Result<LiftedSolution> {
    let chk = check_witness(w);
    if !chk.ok {
        return Err(Error::PreconditionViolated(chk.failure.unwrap_or_default()));
    }
    let ctx = &w.context;
    let p = &ctx.p;
    let k = ctx.k;
    let sys = &w.system;
    let g = ctx.witness_exponent();
    let pg = ctx.pe(g as u64);
    let xr: Vec<Int> = w.x.iter().map(|v| modp(v, &pg)).collect();
    let (mut i, mut j) = w.pivot;
    // Reindex so that p ∤ b_i a_j x_j.
    if divides(p, &(&sys.b[i] * &sys.a[j] * &xr[j])) {
        std::mem::swap(&mut i, &mut j);
    }
    let (a1, a2, b1, b2) = (&sys.a[i], &sys.a[j], &sys.b[i], &sys.b[j]);
    let (x1, x2) = (&xr[i], &xr[j]);
    let mut big_a = Int::zero();
    let mut big_b = Int::zero();
    for t in 0..sys.s() {
        if t != i && t != j {
            big_a -= &sys.a[t] * ipow(&xr[t], k);
            big_b -= &sys.b[t] * &xr[t];
        }
    }
    let q = b1.gcd(b2);
    let b1p = exact_div(b1, &q);
    let b2p = exact_div(b2, &q);
    let z1 = &q * x1;
    let z2 = &q * x2;
    let c = exact_div(&(&big_b - &b1p * &z1 - &b2p * &z2), p);
    let eg = b1p.extended_gcd(&b2p);
    let (u1, u2) = (&eg.x * &c, &eg.y * &c);
    let w1 = &z1 + p * u1;
    let w2 = &z2 + p * u2;
    if &b1p * &w1 + &b2p * &w2 != big_b {
        return Err(Error::Internal("u-correction failed to make the linear equation exact".into()));
    }
    let aq = &big_a * ipow(&q, k);
    let drift = a1 * ipow(&w1, k) + a2 * ipow(&w2, k) - &aq;
    if !vp(&drift, p).at_least(g as u64) {
        return Err(Error::Internal("correction w = z + p u changed the k-th powers modulo p^gamma".into()));
    }
    let ((y1q, y2q), _trace) = lift_pair(a1, a2, &b1p, &b2p, &aq, &big_b, &w1, &w2, ctx, m)?;
    let pm = ctx.pe(m as u64);
    let qinv = mod_inv(&q, &pm).ok_or_else(|| Error::Internal("gcd of pivot b's is not a unit".into()))?;
    let y1 = modp(&(y1q * &qinv), &pm);
    let y2 = modp(&(y2q * &qinv), &pm);
    let mut x = xr;
    x[i] = y1;
    x[j] = y2;
    let unit_index = if !divides(p, &x[j]) { j } else { i };
    if divides(p, &x[unit_index]) {
        return Err(Error::Internal("lifted pivot pair has no unit coordinate".into()));
    }
    let residual_a = vp(&sys.eval_a(k, &x), p);
    let residual_b = vp(&sys.eval_b(&x), p);
    if !residual_a.at_least(m as u64) || !residual_b.at_least(m as u64) {
        return Err(Error::Internal(format!("lift residuals below p^{m}")));
    }
    Ok(LiftedSolution { x, unit_index, precision: m, residual_a, residual_b })
}

/// Evaluates an integer polynomial (constant term first).
pub fn poly_eval(f: &[Int], t: &Int) -> Int {
    f.iter().rev().fold(Int::zero(), |acc, c| acc * t + c)
}

/// Formal derivative of an integer polynomial (constant term first).
pub fn poly_derivative(f: &[Int]) -> Vec<Int> {
    f.iter().enumerate().skip(1).map(|(i, c)| c * Int::from(i)).collect()
}

/// Newton lifting of a root of `f` from `x0`, under `v_p(f(x0)) > 2 v_p(f′(x0))`.
/// Returns `x ≡ x0 mod p^{v_p(f′(x0)) + 1}` with `v_p(f(x)) ≥ M`.
pub fn newton_lift(f: &[Int], x0: &Int, p: &Int, m: u32) -> Result<Int> {
    let df = poly_derivative(f);
    let fx = poly_eval(f, x0);
    let dx = poly_eval(&df, x0);
    let e = match vp(&dx, p) {
        Valuation::Finite(e) => e,
        Valuation::Infinite => return Err(Error::PreconditionViolated("f'(x0) = 0".into())),
    };
    if !vp(&fx, p).at_least(2 * e + 1) {
        return Err(Error::PreconditionViolated("v_p(f(x0)) <= 2 v_p(f'(x0))".into()));
    }
    let mut x = x0.clone();
    let mut prev = vp(&fx, p);
    // Each step x ← x − f(x)/f′(x) computed modulo a working precision well
    // above the target; the residual valuation at least doubles (minus 2e).
    let work = m as u64 + 2 * e + 2;
    let pw = crate::arith::ppow(p, work);
    for _ in 0..256 {
        let fx = poly_eval(f, &x);
        let v = vp(&fx, p);
        if v.at_least(m as u64) {
            return Ok(x);
        }
        if v < prev && prev != Valuation::Infinite {
            return Err(Error::Internal("Newton residual did not improve".into()));
        }
        prev = v;
        let dx = poly_eval(&df, &x);
        let (ed, du) = crate::arith::unit_part(&dx, p).ok_or_else(|| Error::Internal("derivative vanished".into()))?;
        if ed != e {
            return Err(Error::Internal("derivative valuation drifted".into()));
        }
        let num = exact_div(&fx, &crate::arith::ppow(p, ed));
        let inv = mod_inv(&du, &pw).unwrap();
        let step = modp(&(num * inv), &pw);
        x = modp(&(x - step), &pw);
    }
    Err(Error::Internal("Newton iteration did not converge".into()))
}

/// Classical Hensel lifting of a simple root: requires `p | f(x0)` and
/// `p ∤ f′(x0)`; returns a root modulo `p^M` congruent to `x0` mod `p`.
pub fn classic_hensel(f: &[Int], x0: &Int, p: &Int, m: u32) -> Result<Int> {
    let fx = poly_eval(f, x0);
    let dx = poly_eval(&poly_derivative(f), x0);
    if !divides(p, &fx) {
        return Err(Error::PreconditionViolated("p does not divide f(x0)".into()));
    }
    if divides(p, &dx) {
        return Err(Error::PreconditionViolated("p divides f'(x0)".into()));
    }
    let r = newton_lift(f, x0, p, m)?;
    let pm = crate::arith::ppow(p, m as u64);
    let r = modp(&r, &pm);
    debug_assert!(vp(&poly_eval(f, &r), p).at_least(m as u64));
    Ok(r)
}

/// True when `x` has a coordinate that is a p-adic unit.
pub fn has_unit(x: &[Int], p: &Int) -> bool {
    x.iter().any(|v| !divides(p, v))
}

/// A finite certificate for a one-parameter slice of the system.
///
/// All coordinates except `free` (and `eliminated`, when present) are frozen
/// at `x`.  With an eliminated index `e` the linear equation is solved for
/// `x_e` (requiring `b_e ≠ 0`), and
/// `ψ(t) = b_e^k · A(x | x_free = t, x_e = −(Σ_{j≠e,free} b_j x_j + b_free t)/b_e)`;
/// without one, the linear form must vanish identically on the slice and
/// `ψ(t) = A(x | x_free = t)`.  After removing the `p`-content of `ψ`, the
/// Newton condition `v_p(ψ(t_0)) > 2 v_p(ψ′(t_0))` at `t_0 = x_free` yields a
/// p-adic root, hence a solution; the witness also proves that solution is
/// nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewtonWitness {
    /// The frozen point (the free coordinate holds `t_0`).
    #[serde(with = "crate::serde_util::int_vec")]
    pub x: Vec<Int>,
    /// The coordinate that varies.
    pub free: usize,
    /// The coordinate solved from the linear equation, if any.
    pub eliminated: Option<usize>,
    /// The arithmetic frame.
    pub context: PadicContext,
    /// The system the witness certifies.
    pub system: DiagLinSystem,
}

/// Outcome of [`check_newton_witness`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonCheck {
    /// True iff every condition holds.
    pub ok: bool,
    /// Description of the first failed condition.
    pub failure: Option<String>,
    /// `ψ` with its `p`-content removed (constant term first).
    pub psi: Vec<Int>,
    /// `v_p(ψ(t_0))` after content removal.
    pub value_valuation: Valuation,
    /// `v_p(ψ′(t_0))` after content removal.
    pub derivative_valuation: Valuation,
}

fn binomial_row(k: u32) -> Vec<Int> {
    let mut row = vec![Int::one()];
    for i in 0..k {
        let next = &row[i as usize] * Int::from(k - i) / Int::from(i + 1);
        row.push(next);
    }
    row
}

/// The slice polynomial `ψ` of a Newton witness, before content removal.
pub fn slice_polynomial(w: &NewtonWitness) -> Result<Vec<Int>> {
    let sys = &w.system;
    let k = w.context.k;
    let f = w.free;
    let s = sys.s();
    if w.x.len() != s || f >= s {
        return Err(Error::InvalidInput("witness shape does not match the system".into()));
    }
    let mut psi = vec![Int::zero(); k as usize + 1];
    match w.eliminated {
        None => {
            psi[0] = (0..s).filter(|&j| j != f).map(|j| &sys.a[j] * ipow(&w.x[j], k)).sum();
            psi[k as usize] = sys.a[f].clone();
        }
        Some(e) => {
            if e >= s || e == f {
                return Err(Error::InvalidInput("eliminated index must differ from the free one".into()));
            }
            let be = &sys.b[e];
            let bek = ipow(be, k);
            let rest = |j: usize| j != e && j != f;
            let l: Int = (0..s).filter(|&j| rest(j)).map(|j| &sys.b[j] * &w.x[j]).sum();
            let c: Int = (0..s).filter(|&j| rest(j)).map(|j| &sys.a[j] * ipow(&w.x[j], k)).sum();
            // a_e (−(L + b_f t))^k expanded binomially.
            let sign = if k.is_multiple_of(2) { Int::one() } else { -Int::one() };
            let row = binomial_row(k);
            for (i, coeff) in row.iter().enumerate() {
                psi[i] += &sign * &sys.a[e] * coeff * ipow(&l, k - i as u32) * ipow(&sys.b[f], i as u32);
            }
            psi[0] += &bek * c;
            psi[k as usize] += &bek * &sys.a[f];
        }
    }
    Ok(psi)
}

/// Checks a Newton witness by exact arithmetic.
pub fn check_newton_witness(w: &NewtonWitness) -> NewtonCheck {
    let p = &w.context.p;
    let fail = |msg: &str| NewtonCheck {
        ok: false,
        failure: Some(msg.to_string()),
        psi: Vec::new(),
        value_valuation: Valuation::Infinite,
        derivative_valuation: Valuation::Infinite,
    };
    let psi = match slice_polynomial(w) {
        Ok(v) => v,
        Err(e) => return fail(&e.to_string()),
    };
    let sys = &w.system;
    let f = w.free;
    match w.eliminated {
        Some(e) => {
            if sys.b[e].is_zero() {
                return fail("eliminated coordinate has a zero linear coefficient");
            }
        }
        None => {
            let rest: Int = (0..sys.s()).filter(|&j| j != f).map(|j| &sys.b[j] * &w.x[j]).sum();
            if !sys.b[f].is_zero() || !rest.is_zero() {
                return fail("linear form does not vanish identically on the slice");
            }
        }
    }
    let content = match psi.iter().map(|c| vp(c, p)).min().and_then(Valuation::finite) {
        Some(c) => c,
        None => return fail("slice polynomial vanishes identically"),
    };
    let pc = crate::arith::ppow(p, content);
    let psi: Vec<Int> = psi.iter().map(|c| exact_div(c, &pc)).collect();
    let t0 = &w.x[f];
    let v0 = vp(&poly_eval(&psi, t0), p);
    let v1 = vp(&poly_eval(&poly_derivative(&psi), t0), p);
    let mut out = NewtonCheck { ok: false, failure: None, psi, value_valuation: v0, derivative_valuation: v1 };
    let e1 = match v1 {
        Valuation::Finite(e) => e,
        Valuation::Infinite => {
            out.failure = Some("derivative of the slice polynomial vanishes at t0".into());
            return out;
        }
    };
    if !v0.at_least(2 * e1 + 1) {
        out.failure = Some("Newton condition v(psi(t0)) > 2 v(psi'(t0)) fails".into());
        return out;
    }
    // The root agrees with t0 modulo p^{v0 − e1}; it is nonzero if t0 is
    // nonzero there, and the solution is nonzero if a frozen coordinate is.
    let frozen_nonzero = (0..sys.s()).any(|j| j != f && Some(j) != w.eliminated && !w.x[j].is_zero());
    let root_nonzero = match v0 {
        Valuation::Infinite => !t0.is_zero(),
        Valuation::Finite(v) => vp(t0, p) < Valuation::Finite(v - e1),
    };
    if !frozen_nonzero && !root_nonzero {
        out.failure = Some("the certified solution could be zero".into());
        return out;
    }
    out.ok = true;
    out
}

/// Lifts a Newton witness to a solution modulo `p^M`; `unit_index` of the
/// result is a coordinate of minimal valuation.
pub fn solve_from_newton(w: &NewtonWitness, m: u32) -> Result<LiftedSolution> {
    let chk = check_newton_witness(w);
    if !chk.ok {
        return Err(Error::PreconditionViolated(chk.failure.unwrap_or_default()));
    }
    let p = &w.context.p;
    let k = w.context.k;
    let sys = &w.system;
    let pm = crate::arith::ppow(p, m as u64);
    let t = newton_lift(&chk.psi, &w.x[w.free], p, m)?;
    let mut x = w.x.clone();
    x[w.free] = t;
    if let Some(e) = w.eliminated {
        // x_e = −R / b_e may carry the denominator p^μ, μ = v_p(b_e); scale
        // the whole (homogeneous) solution by p^μ to keep it integral.
        let (mu, be_unit) = crate::arith::unit_part(&sys.b[e], p).unwrap();
        let pmu = crate::arith::ppow(p, mu);
        let rest: Int = (0..sys.s()).filter(|&j| j != e).map(|j| &sys.b[j] * &x[j]).sum();
        let inv = mod_inv(&be_unit, &pm).unwrap();
        for (j, v) in x.iter_mut().enumerate() {
            if j != e {
                *v = &*v * &pmu;
            }
        }
        x[e] = modp(&(-rest * inv), &pm);
    }
    let residual_a = vp(&sys.eval_a(k, &x), p);
    let residual_b = vp(&sys.eval_b(&x), p);
    if !residual_a.at_least(m as u64) || !residual_b.at_least(m as u64) {
        return Err(Error::Internal(format!("Newton lift residuals below p^{m}")));
    }
    let unit_index = (0..x.len()).min_by_key(|&j| vp(&x[j], p)).unwrap();
    Ok(LiftedSolution { x, unit_index, precision: m, residual_a, residual_b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use proptest::prelude::*;

    fn wit(a: &[i64], b: &[i64], x: &[i64], pivot: (usize, usize), p: u64, k: u32) -> HenselWitness {
        HenselWitness {
            x: x.iter().map(|&v| int(v)).collect(),
            pivot,
            context: PadicContext::small(p, k),
            system: DiagLinSystem::from_i64(a, b),
        }
    }

    #[test]
    fn check_witness_examples() {
        let w = wit(&[1, 1, 3], &[1, 2, 2], &[1, 1, 1], (0, 1), 5, 4);
        let c = check_witness(&w);
        assert!(c.ok, "{:?}", c.failure);
        assert_eq!((c.a_value, c.b_value, c.minor), (int(5), int(5), int(-1)));
        // Pivot (2,3): b2 a3 x3^3 − b3 a2 x2^3 = 2·3 − 2·1 = 4, a unit.
        let w2 = HenselWitness { pivot: (1, 2), ..w.clone() };
        let c2 = check_witness(&w2);
        assert!(c2.ok);
        assert_eq!(c2.minor, int(4));
        let w3 = HenselWitness { x: vec![int(0); 3], ..w };
        let c3 = check_witness(&w3);
        assert!(!c3.ok);
        assert!(c3.failure.unwrap().contains("minor"));
    }

    #[test]
    fn lift_pair_mod_five() {
        let ctx = PadicContext::small(5, 4);
        // x = (1, 2): 1 + 16 = 17 ≡ 2 mod 5, B = 1 + 4 = 5, minor 1·1·8 − 2·1·1 = 6.
        let ((y1, y2), tr) =
            lift_pair(&int(1), &int(1), &int(1), &int(2), &int(17), &int(5), &int(1), &int(2), &ctx, 6).unwrap();
        let m = ctx.pe(6);
        assert!(divides(&m, &(ipow(&y1, 4) + ipow(&y2, 4) - int(17))));
        assert!(divides(&m, &(&y1 + int(2) * &y2 - int(5))));
        assert!(tr.verify(&ctx.p));
        // Independent check: y2 is the unique root of phi mod 5^6 in the class of 2 mod 5.
        let roots: Vec<i64> = (0..15625i64).filter(|t| t % 5 == 2 && divides(&m, &tr.phi_at(&int(*t)))).collect();
        assert_eq!(roots, vec![y2.to_string().parse::<i64>().unwrap()]);
    }

    #[test]
    fn lift_pair_negative_coefficients() {
        let ctx = PadicContext::small(5, 4);
        // x = (1, 2): 1 − 16 = −15, B = 1 − 2 = −1, minor 1·(−1)·8 − (−1)·1·1 = −7.
        let ((y1, y2), _) =
            lift_pair(&int(1), &int(-1), &int(1), &int(-1), &int(-15), &int(-1), &int(1), &int(2), &ctx, 9).unwrap();
        let m = ctx.pe(9);
        assert!(divides(&m, &(ipow(&y1, 4) - ipow(&y2, 4) + int(15))));
        assert!(divides(&m, &(&y1 - &y2 + int(1))));
    }

    #[test]
    fn lift_pair_two_adic() {
        let ctx = PadicContext::small(2, 4);
        // x = (1, 2): 1 + 16 = 17, B = 3, minor 1·1·8 − 1·1·1 = 7.
        let ((y1, y2), tr) =
            lift_pair(&int(1), &int(1), &int(1), &int(1), &int(17), &int(3), &int(1), &int(2), &ctx, 10).unwrap();
        let m = ctx.pe(10);
        assert!(divides(&m, &(ipow(&y1, 4) + ipow(&y2, 4) - int(17))));
        assert!(divides(&m, &(&y1 + &y2 - int(3))));
        assert!(tr.verify(&ctx.p));
    }

    #[test]
    fn lift_pair_rejects_singular_start() {
        let ctx = PadicContext::small(5, 4);
        let r = lift_pair(&int(1), &int(-1), &int(1), &int(-1), &int(0), &int(0), &int(1), &int(1), &ctx, 5);
        assert!(matches!(r, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn solve_from_witness_example() {
        let w = wit(&[1, 1, 3], &[1, 2, 2], &[1, 1, 1], (0, 1), 5, 4);
        let sol = solve_from_witness(&w, 10).unwrap();
        assert!(sol.residual_a.at_least(10) && sol.residual_b.at_least(10));
        assert!(!divides(&int(5), &sol.x[sol.unit_index]));
    }

    #[test]
    fn two_variable_systems_admit_no_nonsingular_point() {
        // With s = 2 the solution set is a union of lines through the origin,
        // and Euler's identity puts x in the kernel of the Jacobian, so every
        // pivot minor vanishes modulo p at a solution.  Exhaustive scan.
        let ctx = PadicContext::small(5, 4);
        for a2 in 1..25i64 {
            for b2 in 0..5i64 {
                let sys = DiagLinSystem::from_i64(&[1, a2], &[1, b2]);
                for x1 in 0..5i64 {
                    for x2 in 0..5i64 {
                        let w = HenselWitness {
                            x: vec![int(x1), int(x2)],
                            pivot: (0, 1),
                            context: ctx.clone(),
                            system: sys.clone(),
                        };
                        assert!(!check_witness(&w).ok);
                    }
                }
            }
        }
    }

    #[test]
    fn classic_hensel_examples() {
        let f = vec![int(-2), int(0), int(1)];
        let r = classic_hensel(&f, &int(3), &int(7), 8).unwrap();
        assert!(divides(&ipow(&int(7), 8), &(&r * &r - int(2))));
        assert_eq!(modp(&r, &int(7)), int(3));
        let g = vec![int(-5), int(1)];
        assert_eq!(classic_hensel(&g, &int(5), &int(11), 4).unwrap(), int(5));
        assert!(classic_hensel(&f, &int(1), &int(7), 4).is_err());
    }

    proptest! {
        /// Lift soundness and monotone refinement on random witnesses found by
        /// scanning small systems.
        #[test]
        fn lift_soundness_and_refinement(a in prop::collection::vec(-30i64..30, 4..6),
                                         b in prop::collection::vec(-30i64..30, 4..6),
                                         which in 0usize..3) {
            let (p, k) = [(5u64, 4u32), (2, 4), (3, 6)][which];
            let n = a.len().min(b.len());
            let sys = DiagLinSystem::from_i64(&a[..n], &b[..n]);
            let ctx = PadicContext::small(p, k);
            let g = ctx.witness_exponent();
            let pg = ctx.pe(g as u64);
            // Look for a witness among vectors with entries in {0, 1, 2}.
            let mut found = None;
            let total = 3usize.pow(n as u32);
            'outer: for code in 1..total {
                let mut c = code;
                let x: Vec<Int> = (0..n).map(|_| { let v = c % 3; c /= 3; int(v as i64) }).collect();
                if !divides(&pg, &sys.eval_a(k, &x)) || !divides(&ctx.p, &sys.eval_b(&x)) { continue; }
                for i in 0..n { for j in 0..n {
                    if i != j && !divides(&ctx.p, &minor(&sys, k, &x, i, j)) {
                        found = Some(HenselWitness { x: x.clone(), pivot: (i, j), context: ctx.clone(), system: sys.clone() });
                        break 'outer;
                    }
                }}
            }
            if let Some(w) = found {
                let s11 = solve_from_witness(&w, 11).unwrap();
                let s12 = solve_from_witness(&w, 12).unwrap();
                prop_assert!(s12.residual_a.at_least(12) && s12.residual_b.at_least(12));
                prop_assert!(!divides(&ctx.p, &s12.x[s12.unit_index]));
                let m11 = ctx.pe(11);
                for (u, v) in s11.x.iter().zip(&s12.x) {
                    prop_assert_eq!(modp(u, &m11), modp(v, &m11));
                }
            }
        }
    }

    fn nwit(a: &[i64], b: &[i64], x: &[i64], free: usize, elim: Option<usize>, p: u64, k: u32) -> NewtonWitness {
        NewtonWitness {
            x: x.iter().map(|&v| int(v)).collect(),
            free,
            eliminated: elim,
            context: PadicContext::small(p, k),
            system: DiagLinSystem::from_i64(a, b),
        }
    }

    #[test]
    fn newton_witness_on_pure_diagonal_slice() {
        // x^2 + y^2 with the linear form identically zero, p = 5, k = 2:
        // ψ(t) = t^2 + 1 has the simple root 2 mod 5.
        let w = nwit(&[1, 1], &[0, 0], &[2, 1], 0, None, 5, 2);
        let chk = check_newton_witness(&w);
        assert!(chk.ok, "{:?}", chk.failure);
        assert_eq!(chk.psi, vec![int(1), int(0), int(1)]);
        let lifted = solve_from_newton(&w, 12).unwrap();
        assert!(lifted.residual_a.at_least(12) && lifted.residual_b.at_least(12));
        // With a nonzero linear coefficient on the slice the check refuses.
        let w = nwit(&[1, 1], &[1, 0], &[2, 1], 0, None, 5, 2);
        assert!(!check_newton_witness(&w).ok);
    }

    #[test]
    fn newton_witness_with_elimination_and_content() {
        // a = (1, −1, 5^4·3), b = (1, −1, 0), p = 5, k = 4; eliminate x_0 and
        // vary x_1: ψ(t) = (t − L)^4 − t^4 + const, content handled exactly.
        let w = nwit(&[1, -1, 1875], &[1, -1, 0], &[0, 1, 0], 1, Some(0), 5, 4);
        let chk = check_newton_witness(&w);
        // ψ ≡ 0 identically here (x_0 = x_1 forces A = 0 on the slice when
        // x_2 = 0), so the check must reject.
        assert!(!chk.ok);
        // Make x_2 = 1: ψ(t) = 1875, a nonzero constant — no root.
        let w = nwit(&[1, -1, 1875], &[1, -1, 0], &[0, 1, 1], 1, Some(0), 5, 4);
        assert!(!check_newton_witness(&w).ok);
        // a = (1, 1, −2), b = (1, 1, 0), k = 2, p = 7; eliminate x_0, vary x_1,
        // x_2 = 1: ψ(t) = (−t)^2 + t^2 − 2 = 2t^2 − 2, root t = 1.
        let w = nwit(&[1, 1, -2], &[1, 1, 0], &[0, 1, 1], 1, Some(0), 7, 2);
        let chk = check_newton_witness(&w);
        assert!(chk.ok, "{:?}", chk.failure);
        assert_eq!(chk.psi, vec![int(-2), int(0), int(2)]);
        let lifted = solve_from_newton(&w, 10).unwrap();
        assert!(lifted.residual_a.at_least(10));
    }

    proptest! {
        /// Lifting a checked Newton witness always meets the requested precision.
        #[test]
        fn newton_lift_meets_precision(
            c in prop::collection::vec(-30i64..30, 3..6),
            t0 in 1i64..20,
            which in 0usize..3,
            m in 3u32..15,
        ) {
            let (p, k) = [(7u64, 4u32), (5, 2), (3, 4)][which];
            // Plant a root modulo p of the slice: adjust the last coefficient.
            let n = c.len();
            let mut a = c.clone();
            let mut x: Vec<i64> = (0..n).map(|i| (i as i64 % 3) + 1).collect();
            x[0] = t0;
            let partial: i64 = (0..n - 1).map(|i| a[i] * x[i].pow(k)).sum();
            a[n - 1] = -partial;
            x[n - 1] = 1;
            let b = vec![0i64; n];
            let w = nwit(&a, &b, &x, 0, None, p, k);
            let chk = check_newton_witness(&w);
            if chk.ok {
                let lifted = solve_from_newton(&w, m).unwrap();
                prop_assert!(lifted.residual_a.at_least(m as u64));
                prop_assert!(lifted.x.iter().any(|v| !v.is_zero()));
            }
        }
    }
}
