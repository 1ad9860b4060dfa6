//! The arithmetic frame ([`PadicContext`]), the system data model
//! ([`DiagLinSystem`]) and its derived statistics ([`SystemStats`]).

use crate::arith::{divides, gcd_u64, ipow, is_prime, modp, ppow, vp, Int, Valuation};
use crate::error::{Error, Result};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// The prime, the degree and the exponents that govern every congruence
/// modulus used by the engines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadicContext {
    /// The prime `p`.
    #[serde(with = "crate::serde_util::int_str")]
    pub p: Int,
    /// The degree `k`.
    pub k: u32,
    /// `τ` with `k = p^τ (p − 1)`, when such an exponent exists.
    pub tau: Option<u32>,
    /// The congruence exponent: `τ + 1` for odd `p`, `τ + 2` for `p = 2`.
    pub gamma: Option<u32>,
    /// `gcd(k, p − 1)`.
    pub d: u64,
    /// `k / (p^{v_p(k)} · d)`, the part of `k` free of `p` and of `d`.
    pub k0: u64,
    /// `v_p(k)`.
    pub vpk: u32,
}

impl PadicContext {
    /// Builds the context for prime `p` and degree `k ≥ 1`.
    ///
    /// Rejects composite `p` and `p` beyond 62 bits (the engines enumerate
    /// residues modulo `p`).
    pub fn new(p: Int, k: u32) -> Result<Self> {
        if !is_prime(&p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
        if k == 0 {
            return Err(Error::InvalidInput("degree must be positive".into()));
        }
        let ps = p
            .to_u64()
            .filter(|v| *v < (1u64 << 62))
            .ok_or_else(|| Error::InvalidInput(format!("prime {p} exceeds the supported 62-bit range")))?;
        let pm1 = ps - 1;
        let d = gcd_u64(k as u64, pm1);
        let mut rest = k as u64;
        let mut vpk = 0u32;
        while rest.is_multiple_of(ps) {
            rest /= ps;
            vpk += 1;
        }
        let k0 = rest / d;
        let tau = if rest == pm1 { Some(vpk) } else { None };
        let gamma = tau.map(|t| if ps == 2 { t + 2 } else { t + 1 });
        Ok(PadicContext { p, k, tau, gamma, d, k0, vpk })
    }

    /// Convenience constructor from machine integers; panics on invalid input.
    pub fn small(p: u64, k: u32) -> Self {
        Self::new(Int::from(p), k).expect("valid context")
    }

    /// The prime as a machine integer (always fits by construction).
    pub fn p_u64(&self) -> u64 {
        self.p.to_u64().unwrap()
    }

    /// `p^e`.
    pub fn pe(&self, e: u64) -> Int {
        ppow(&self.p, e)
    }

    /// `p^γ`, or an error when `γ` is undefined.
    pub fn p_gamma(&self) -> Result<Int> {
        let g = self.gamma.ok_or(Error::ContextNotApplicable)?;
        Ok(self.pe(g as u64))
    }

    /// True when `k = p^τ (p − 1)` for some `τ`.
    pub fn has_tau(&self) -> bool {
        self.tau.is_some()
    }

    /// True when every unit satisfies `x^k ≡ 1 mod p^γ`: `τ` is defined and
    /// either `p` is odd or `τ ≥ 1` (for `p = 2`, `k = 1` the residue `3`
    /// modulo `4` is a unit that does not collapse).
    pub fn unit_powers_collapse(&self) -> bool {
        match self.tau {
            Some(t) => self.p_u64() != 2 || t >= 1,
            None => false,
        }
    }

    /// Exponent of the congruence a Hensel witness must satisfy: `γ` when
    /// `k = p^τ (p − 1)`, otherwise `2 v_p(k) + 1` (the Newton criterion).
    pub fn witness_exponent(&self) -> u32 {
        self.gamma.unwrap_or(2 * self.vpk + 1)
    }
}

/// `x^k mod p^γ` under a context where `τ` is defined.
///
/// By the unit-power collapse the result is `1` for units and `0` for
/// multiples of `p`; the value is computed by modular exponentiation and the
/// collapse is asserted.
pub fn kth_power_residue(x: &Int, ctx: &PadicContext) -> Result<Int> {
    let m = ctx.p_gamma()?;
    let r = crate::arith::pow_mod(x, &Int::from(ctx.k), &m);
    let expected = if divides(&ctx.p, x) { Int::zero() } else { Int::one() };
    if r != expected {
        return Err(Error::Internal(format!("unit-power collapse failed for x={x}, p={}, k={}", ctx.p, ctx.k)));
    }
    Ok(r)
}

/// The pair `a_1 x_1^k + … + a_s x_s^k = 0`, `b_1 x_1 + … + b_s x_s = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiagLinSystem {
    /// Degree-`k` coefficients.
    #[serde(with = "crate::serde_util::int_vec")]
    pub a: Vec<Int>,
    /// Linear coefficients.
    #[serde(with = "crate::serde_util::int_vec")]
    pub b: Vec<Int>,
}

impl DiagLinSystem {
    /// Builds a system, checking `s ≥ 1` and equal lengths.
    pub fn new(a: Vec<Int>, b: Vec<Int>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidInput(format!(
                "coefficient vectors differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(Error::InvalidInput("empty system".into()));
        }
        Ok(DiagLinSystem { a, b })
    }

    /// Builds a system from machine integers; panics on length mismatch.
    pub fn from_i64(a: &[i64], b: &[i64]) -> Self {
        Self::new(a.iter().map(|&v| Int::from(v)).collect(), b.iter().map(|&v| Int::from(v)).collect())
            .expect("valid system")
    }

    /// Number of variables `s`.
    pub fn s(&self) -> usize {
        self.a.len()
    }

    /// Exact value of the degree-`k` form at an integer point.
    pub fn eval_a(&self, k: u32, x: &[Int]) -> Int {
        self.a.iter().zip(x).map(|(a, x)| a * ipow(x, k)).sum()
    }

    /// Exact value of the linear form at an integer point.
    pub fn eval_b(&self, x: &[Int]) -> Int {
        self.b.iter().zip(x).map(|(b, x)| b * x).sum()
    }

    /// True when `x` is a nonzero exact integer solution.
    pub fn is_exact_solution(&self, k: u32, x: &[Int]) -> bool {
        x.len() == self.s() && x.iter().any(|v| !v.is_zero()) && self.eval_a(k, x).is_zero() && self.eval_b(x).is_zero()
    }

    /// Reduces all coefficients modulo `m`.
    pub fn reduced(&self, m: &Int) -> DiagLinSystem {
        DiagLinSystem { a: self.a.iter().map(|v| modp(v, m)).collect(), b: self.b.iter().map(|v| modp(v, m)).collect() }
    }

    /// The largest absolute coefficient (for diagnostics).
    pub fn height(&self) -> Int {
        self.a.iter().chain(&self.b).map(|v| v.abs()).max().unwrap_or_default()
    }
}

/// Classification of conditioned systems by where their units in `b` sit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemType {
    /// `p | b_i` for every variable outside the `ν = 0` block.
    A,
    /// Some variable outside the `ν = 0` block has a unit linear coefficient.
    B,
}

/// Valuation statistics of a system snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemStats {
    /// `ν_i = v_p(a_i)`.
    pub nu: Vec<Valuation>,
    /// `μ_i = v_p(b_i)`.
    pub mu: Vec<Valuation>,
    /// `υ_j = #{i : a_i ≠ 0, ν_i ≡ j mod k}` for `0 ≤ j < k`.
    pub upsilon: Vec<usize>,
    /// `min(μ_i, ν_i)`.
    pub levels: Vec<Valuation>,
    /// `μ_i < ν_i`.
    pub low_flags: Vec<bool>,
    /// Type A/B.
    pub system_type: SystemType,
}

/// Computes [`SystemStats`] for a system.
pub fn stats(sys: &DiagLinSystem, ctx: &PadicContext) -> SystemStats {
    let nu: Vec<Valuation> = sys.a.iter().map(|a| vp(a, &ctx.p)).collect();
    let mu: Vec<Valuation> = sys.b.iter().map(|b| vp(b, &ctx.p)).collect();
    let k = ctx.k as u64;
    let mut upsilon = vec![0usize; ctx.k as usize];
    for v in &nu {
        if let Valuation::Finite(e) = v {
            upsilon[(e % k) as usize] += 1;
        }
    }
    let levels = nu.iter().zip(&mu).map(|(n, m)| *n.min(m)).collect();
    let low_flags = nu.iter().zip(&mu).map(|(n, m)| m < n).collect();
    let outside_unit_b = nu.iter().zip(&mu).any(|(n, m)| *n != Valuation::Finite(0) && *m == Valuation::Finite(0));
    let system_type = if outside_unit_b { SystemType::B } else { SystemType::A };
    SystemStats { nu, mu, upsilon, levels, low_flags, system_type }
}

/// True when `n` is a unit modulo `p`.
pub fn is_unit(n: &Int, p: &Int) -> bool {
    !divides(p, n)
}

/// The k-th power of a machine residue modulo `m` (helper for enumeration).
pub fn pow_mod_u64(base: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mm = m as u128;
    let mut acc = 1u128;
    let mut b = (base % m) as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % mm;
        }
        b = b * b % mm;
        e >>= 1;
    }
    acc as u64
}
