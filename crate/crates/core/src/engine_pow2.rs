//! The engine for `p = 2`, `k = 2^τ ∈ {4, 8, 16, 32}`: a contraction
//! calculus on exact coefficients, the case schedules built on it, and the
//! cycling transform for the one shape where no schedule exists.
//!
//! A *class* is a set of original variables that are set equal; its
//! coefficients are the exact sums `c = Σ a_i`, `d = Σ b_i`.  The *niveau*
//! of a class is `v_2(c)` and its *parity* that of `d`; both are computed
//! from the coefficients on demand.  A class is *primary* when it contains a
//! variable with odd `a_i`.  The goal is a primary even class of niveau at
//! least `τ + 2`: setting its members to 1 and every other variable to 0
//! solves the congruences modulo `(2^{τ+2}, 2)`, and a zeroed variable with
//! odd `b` (or any low variable in a system with one above level 0) makes the
//! solution non-singular.
//!
//! Every merge names the rule that justifies it and re-checks the promised
//! niveau and parity on the actual integers; a failure is reported as
//! [`Error::RuleViolation`] and signals a bug, never an unlucky input.
//!
//! The four general contraction principles (an even block, an even ladder
//! over several niveaux, a block with odd secondaries, and a ladder with odd
//! secondaries) are exposed as stand-alone procedures so that they can be
//! exercised on synthetic classes.

use crate::arith::{ppow_rat, vp, Int, Rat};
use crate::certificate::{precision_demo, Certificate, EngineOutcome, Payload};
use crate::error::{Error, Result};
use crate::hensel::{check_witness, HenselWitness};
use crate::system::{stats, DiagLinSystem, PadicContext, SystemType};
use crate::transform::{Transcript, TransformStep};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Identifier of a class inside a [`ContractionState`].
pub type ClassId = usize;

/// Niveau reported for a class whose coefficient sum is exactly zero.
pub const INFINITE_NIVEAU: u64 = u64::MAX;

/// The justification of a merge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// Two primary classes of niveau `≥ ν` and equal parity give an even
    /// primary class of niveau `≥ ν + 1` (if one already has niveau
    /// `≥ ν + 1`, the other is zeroed instead).
    Doubling,
    /// An even primary class of niveau `≥ ν` absorbs an even secondary class
    /// of exact niveau `ν`, giving niveau `≥ ν + 1` (or the secondary class
    /// is zeroed when the primary one is already higher).
    Absorb,
    /// Two secondary classes of exact niveau `ν` whose odd parts agree
    /// modulo 4 give a secondary class of exact niveau `ν + 1`.
    ResiduePair,
    /// Odd secondary classes at exact niveaux `ν < μ` give an even secondary
    /// class of exact niveau `ν`.
    ParityCorrection,
    /// Even and odd primary classes of exact niveau 0 and an odd secondary
    /// class of niveau `≥ 1` give an even primary class of niveau `≥ 1`.
    OddTriple,
    /// An even primary class of exact niveau `ν`, an odd secondary class of
    /// exact niveau `ν` and an odd secondary class above `ν` give an even
    /// primary class of niveau `≥ ν + 1`.
    LeftoverTriple,
}

/// How a class came about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// A single original variable.
    Seed(usize),
    /// Variables zeroed as the partner of a rule whose other input already
    /// met the rule's promise.
    Zeroed(Vec<usize>),
    /// A merge of earlier classes.
    Merge {
        /// The justifying rule.
        rule: Rule,
        /// The merged classes.
        parts: Vec<Provenance>,
    },
}

impl Provenance {
    /// Original variables this class was built from, including partners
    /// zeroed along the way.
    pub fn leaves(&self) -> usize {
        match self {
            Provenance::Seed(_) => 1,
            Provenance::Zeroed(v) => v.len(),
            Provenance::Merge { parts, .. } => parts.iter().map(Provenance::leaves).sum(),
        }
    }
}

/// A set of variables that are set equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionClass {
    /// Original variable indices.
    pub members: Vec<usize>,
    /// `Σ a_i` over the members.
    #[serde(with = "crate::serde_util::int_str")]
    pub c: Int,
    /// `Σ b_i` over the members.
    #[serde(with = "crate::serde_util::int_str")]
    pub d: Int,
    /// Whether a member has an odd degree coefficient.
    pub primary: bool,
    /// The merge tree.
    pub provenance: Provenance,
}

impl ContractionClass {
    /// `v_2(c)`, or [`INFINITE_NIVEAU`] when `c = 0`.
    pub fn niveau(&self) -> u64 {
        vp(&self.c, &Int::from(2)).finite().unwrap_or(INFINITE_NIVEAU)
    }

    /// Whether `d` is even.
    pub fn even(&self) -> bool {
        self.d.is_even()
    }

    /// The odd part of `c` modulo 4 (0 when `c = 0`).
    pub fn residue4(&self) -> u64 {
        let n = self.niveau();
        if n == INFINITE_NIVEAU {
            return 0;
        }
        let odd = &self.c >> (n as usize);
        odd.mod_floor(&Int::from(4)).to_u64().expect("small")
    }
}

/// Live classes over a system, together with the zeroed variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionState {
    /// The system whose variables are being contracted.
    pub system: DiagLinSystem,
    /// Class slots; `None` once a class has been merged or zeroed.
    pub classes: Vec<Option<ContractionClass>>,
    /// Zeroed variables.
    pub zeroed: BTreeSet<usize>,
    /// The niveau the schedule aims for (`τ + 2`).
    pub target: u64,
    /// A zeroed variable with odd linear coefficient, once one exists.
    pub odd_zeroed_witness: Option<usize>,
    /// Number of merges performed.
    pub merges: usize,
}

fn violation(msg: impl Into<String>) -> Error {
    Error::RuleViolation(msg.into())
}

impl ContractionState {
    /// One class per variable of `sys`; variables with odd `a_i` are primary.
    pub fn from_system(sys: &DiagLinSystem, target: u64) -> Self {
        let primary: Vec<bool> = sys.a.iter().map(|a| a.is_odd()).collect();
        Self::with_primaries(sys, &primary, target)
    }

    /// One class per variable of `sys` with explicit primary flags (for
    /// synthetic classes whose coefficients are already even).
    pub fn with_primaries(sys: &DiagLinSystem, primary: &[bool], target: u64) -> Self {
        let classes = (0..sys.s())
            .map(|i| {
                Some(ContractionClass {
                    members: vec![i],
                    c: sys.a[i].clone(),
                    d: sys.b[i].clone(),
                    primary: primary[i],
                    provenance: Provenance::Seed(i),
                })
            })
            .collect();
        ContractionState {
            system: sys.clone(),
            classes,
            zeroed: BTreeSet::new(),
            target,
            odd_zeroed_witness: None,
            merges: 0,
        }
    }

    /// The live class `id`.
    pub fn class(&self, id: ClassId) -> Result<&ContractionClass> {
        self.classes.get(id).and_then(|c| c.as_ref()).ok_or_else(|| violation(format!("class {id} is not live")))
    }

    fn cl(&self, id: ClassId) -> &ContractionClass {
        self.classes[id].as_ref().expect("live class")
    }

    /// Niveau of a live class.
    pub fn niv(&self, id: ClassId) -> u64 {
        self.cl(id).niveau()
    }

    /// Parity of a live class.
    pub fn even(&self, id: ClassId) -> bool {
        self.cl(id).even()
    }

    /// Whether a live class is primary.
    pub fn primary(&self, id: ClassId) -> bool {
        self.cl(id).primary
    }

    /// Ids of the live classes.
    pub fn live(&self) -> Vec<ClassId> {
        (0..self.classes.len()).filter(|&i| self.classes[i].is_some()).collect()
    }

    /// Live secondary classes of exact niveau `j`, optionally of one parity.
    pub fn secondaries(&self, j: u64, even: Option<bool>) -> Vec<ClassId> {
        self.live()
            .into_iter()
            .filter(|&i| !self.primary(i) && self.niv(i) == j && even.is_none_or(|e| self.even(i) == e))
            .collect()
    }

    /// Zeroes a class: its members move to the zeroed set.
    pub fn drop_class(&mut self, id: ClassId) -> Result<()> {
        let cl = self
            .classes
            .get_mut(id)
            .and_then(|c| c.take())
            .ok_or_else(|| violation(format!("class {id} is not live")))?;
        for m in cl.members {
            if self.system.b[m].is_odd() && self.odd_zeroed_witness.is_none() {
                self.odd_zeroed_witness = Some(m);
            }
            self.zeroed.insert(m);
        }
        Ok(())
    }

    fn union(&mut self, ids: &[ClassId], rule: Rule) -> Result<ClassId> {
        let mut members = Vec::new();
        let (mut c, mut d) = (Int::zero(), Int::zero());
        let mut primary = false;
        let mut parts = Vec::new();
        for &id in ids {
            let cl = self
                .classes
                .get_mut(id)
                .and_then(|c| c.take())
                .ok_or_else(|| violation(format!("class {id} is not live")))?;
            members.extend(cl.members);
            c += cl.c;
            d += cl.d;
            primary |= cl.primary;
            parts.push(cl.provenance);
        }
        members.sort_unstable();
        self.classes.push(Some(ContractionClass {
            members,
            c,
            d,
            primary,
            provenance: Provenance::Merge { rule, parts },
        }));
        self.merges += 1;
        Ok(self.classes.len() - 1)
    }

    /// Zeroes `dropped` as the partner of `rule` and records it in the
    /// provenance of the surviving class `kept`.
    fn keep_and_drop(&mut self, kept: ClassId, dropped: ClassId, rule: Rule) -> Result<ClassId> {
        let members = self.class(dropped)?.members.clone();
        self.drop_class(dropped)?;
        let cl = self.classes[kept].as_mut().expect("live class");
        let old = std::mem::replace(&mut cl.provenance, Provenance::Seed(0));
        cl.provenance = Provenance::Merge { rule, parts: vec![old, Provenance::Zeroed(members)] };
        Ok(kept)
    }

    fn expect_primary_even(&self, id: ClassId, nu: u64, rule: Rule) -> Result<()> {
        let cl = self.cl(id);
        if !cl.primary || !cl.even() || cl.niveau() < nu {
            return Err(violation(format!(
                "{rule:?}: expected an even primary class of niveau ≥ {nu}, got niveau {} ({})",
                cl.niveau(),
                if cl.even() { "even" } else { "odd" }
            )));
        }
        Ok(())
    }

    /// Applies `rule` at niveau `nu` to the given classes and returns the
    /// resulting class, re-checking the rule's promise on the coefficients.
    pub fn merge(&mut self, ids: &[ClassId], rule: Rule, nu: u64) -> Result<ClassId> {
        let distinct: BTreeSet<ClassId> = ids.iter().copied().collect();
        if distinct.len() != ids.len() {
            return Err(violation(format!("{rule:?}: repeated class")));
        }
        for &id in ids {
            self.class(id)?;
        }
        let arity = match rule {
            Rule::OddTriple | Rule::LeftoverTriple => 3,
            _ => 2,
        };
        if ids.len() != arity {
            return Err(violation(format!("{rule:?} takes {arity} classes")));
        }
        match rule {
            Rule::Doubling => {
                let (x, y) = (ids[0], ids[1]);
                if !self.primary(x)
                    || !self.primary(y)
                    || self.niv(x) < nu
                    || self.niv(y) < nu
                    || self.even(x) != self.even(y)
                {
                    return Err(violation("Doubling needs two primary classes of niveau ≥ ν with equal parity"));
                }
                if self.niv(x) > nu && self.even(x) {
                    self.keep_and_drop(x, y, rule)?;
                    self.expect_primary_even(x, nu + 1, rule)?;
                    return Ok(x);
                }
                if self.niv(y) > nu && self.even(y) {
                    self.keep_and_drop(y, x, rule)?;
                    self.expect_primary_even(y, nu + 1, rule)?;
                    return Ok(y);
                }
                let z = self.union(ids, rule)?;
                self.expect_primary_even(z, nu + 1, rule)?;
                Ok(z)
            }
            Rule::Absorb => {
                let (x, y) = (ids[0], ids[1]);
                if !self.primary(x) || !self.even(x) || self.niv(x) < nu {
                    return Err(violation("Absorb needs an even primary class of niveau ≥ ν"));
                }
                if self.primary(y) || !self.even(y) || self.niv(y) != nu {
                    return Err(violation("Absorb needs an even secondary class of exact niveau ν"));
                }
                if self.niv(x) > nu {
                    return self.keep_and_drop(x, y, rule);
                }
                let z = self.union(ids, rule)?;
                self.expect_primary_even(z, nu + 1, rule)?;
                Ok(z)
            }
            Rule::ResiduePair => {
                let (x, y) = (ids[0], ids[1]);
                if self.primary(x) || self.primary(y) || self.niv(x) != nu || self.niv(y) != nu {
                    return Err(violation("ResiduePair needs two secondary classes of exact niveau ν"));
                }
                if self.cl(x).residue4() != self.cl(y).residue4() {
                    return Err(violation("ResiduePair needs odd parts congruent modulo 4"));
                }
                let same = self.even(x) == self.even(y);
                let z = self.union(ids, rule)?;
                if self.niv(z) != nu + 1 || (same && !self.even(z)) {
                    return Err(violation(format!("ResiduePair produced niveau {}", self.niv(z))));
                }
                Ok(z)
            }
            Rule::ParityCorrection => {
                let (x, y) = (ids[0], ids[1]);
                let (nx, ny) = (self.niv(x), self.niv(y));
                if self.primary(x) || self.primary(y) || self.even(x) || self.even(y) || nx != nu || ny <= nu {
                    return Err(violation("ParityCorrection needs odd secondary classes at niveaux ν < μ"));
                }
                let z = self.union(ids, rule)?;
                if self.niv(z) != nu || !self.even(z) {
                    return Err(violation("ParityCorrection did not give an even class of exact niveau ν"));
                }
                Ok(z)
            }
            Rule::OddTriple => {
                let (e, o, s) = (ids[0], ids[1], ids[2]);
                if !self.primary(e) || !self.even(e) || self.niv(e) != 0 {
                    return Err(violation("OddTriple needs an even primary class of niveau 0"));
                }
                if !self.primary(o) || self.even(o) || self.niv(o) != 0 {
                    return Err(violation("OddTriple needs an odd primary class of niveau 0"));
                }
                if self.primary(s) || self.even(s) || self.niv(s) == 0 {
                    return Err(violation("OddTriple needs an odd secondary class of niveau ≥ 1"));
                }
                let z = self.union(ids, rule)?;
                self.expect_primary_even(z, 1, rule)?;
                Ok(z)
            }
            Rule::LeftoverTriple => {
                let (e, o, s) = (ids[0], ids[1], ids[2]);
                if !self.primary(e) || !self.even(e) || self.niv(e) != nu {
                    return Err(violation("LeftoverTriple needs an even primary class of exact niveau ν"));
                }
                if self.primary(o) || self.even(o) || self.niv(o) != nu {
                    return Err(violation("LeftoverTriple needs an odd secondary class of exact niveau ν"));
                }
                if self.primary(s) || self.even(s) || self.niv(s) <= nu {
                    return Err(violation("LeftoverTriple needs an odd secondary class above ν"));
                }
                let z = self.union(ids, rule)?;
                self.expect_primary_even(z, nu + 1, rule)?;
                Ok(z)
            }
        }
    }

    /// Re-derives every class's coefficients from its members and checks
    /// that classes and zeroed variables are disjoint.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen: BTreeSet<usize> = self.zeroed.clone();
        for cl in self.classes.iter().flatten() {
            let c: Int = cl.members.iter().map(|&m| &self.system.a[m]).sum();
            let d: Int = cl.members.iter().map(|&m| &self.system.b[m]).sum();
            if c != cl.c || d != cl.d {
                return Err(violation("class coefficients differ from the member sums"));
            }
            if cl.primary != cl.members.iter().any(|&m| self.system.a[m].is_odd()) && !cl.members.is_empty() {
                // Synthetic states may mark even seeds primary; only check
                // the forward direction there.
                if cl.members.iter().any(|&m| self.system.a[m].is_odd()) {
                    return Err(violation("class with an odd member is not primary"));
                }
            }
            for &m in &cl.members {
                if !seen.insert(m) {
                    return Err(violation(format!("variable {m} is in two places")));
                }
            }
        }
        Ok(())
    }

    /// Sorts ids by niveau, parity, residue modulo 4, smallest member.
    fn sorted(&self, mut ids: Vec<ClassId>) -> Vec<ClassId> {
        ids.sort_by_key(|&i| {
            let c = self.cl(i);
            (c.niveau(), !c.even(), c.residue4(), c.members[0])
        });
        ids
    }

    /// Pairs secondary classes of exact niveau `nu` with congruent odd parts
    /// (and equal parity when `same_parity`) until at most `stop` (but at
    /// least one or two) remain.  Returns the new classes and the leftovers.
    pub fn residue_pairs(
        &mut self,
        pool: Vec<ClassId>,
        nu: u64,
        stop: usize,
        same_parity: bool,
    ) -> Result<(Vec<ClassId>, Vec<ClassId>)> {
        let mut pool = self.sorted(pool);
        let mut made = Vec::new();
        while pool.len() > stop.max(2) {
            let mut found = None;
            'outer: for a in 0..pool.len() {
                for b in a + 1..pool.len() {
                    let (x, y) = (pool[a], pool[b]);
                    if self.cl(x).residue4() == self.cl(y).residue4() && (!same_parity || self.even(x) == self.even(y))
                    {
                        found = Some((a, b));
                        break 'outer;
                    }
                }
            }
            let (a, b) = found.ok_or_else(|| violation("no congruent pair among three or more classes"))?;
            let (x, y) = (pool[a], pool[b]);
            pool.remove(b);
            pool.remove(a);
            made.push(self.merge(&[x, y], Rule::ResiduePair, nu)?);
        }
        Ok((made, pool))
    }

    /// Pairs primary classes of niveau `≥ nu` by [`Rule::Doubling`]; an odd
    /// one out is returned separately.
    pub fn double_all(&mut self, prims: Vec<ClassId>, nu: u64) -> Result<(Vec<ClassId>, Option<ClassId>)> {
        let mut out = Vec::new();
        let mut it = prims.chunks_exact(2);
        for ch in &mut it {
            out.push(self.merge(ch, Rule::Doubling, nu)?);
        }
        Ok((out, it.remainder().first().copied()))
    }
}

// ---------------------------------------------------------------------------
// General contraction principles
// ---------------------------------------------------------------------------

fn pow2(l: u64) -> usize {
    1usize << l
}

fn need(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(violation(msg))
    }
}

/// `2^l` classes, each an even primary class of niveau `≥ ν` or an even
/// secondary class of exact niveau `ν`, at least one primary, contract to
/// one even primary class of niveau `≥ ν + l`.
pub fn contract_even_block(
    st: &mut ContractionState,
    prims: Vec<ClassId>,
    secs: Vec<ClassId>,
    nu: u64,
    l: u64,
) -> Result<ClassId> {
    need(prims.len() + secs.len() == pow2(l) && !prims.is_empty(), "even block needs 2^l classes with a primary one")?;
    for &p in &prims {
        need(st.primary(p) && st.even(p) && st.niv(p) >= nu, "even block: bad primary class")?;
    }
    for &s in &secs {
        need(!st.primary(s) && st.even(s) && st.niv(s) == nu, "even block: bad secondary class")?;
    }
    if l == 0 {
        return Ok(prims[0]);
    }
    let (mut prims, secs) = (prims, secs);
    let mut next_p = Vec::new();
    let next_s;
    if secs.is_empty() {
        let (made, rest) = st.double_all(prims, nu)?;
        need(rest.is_none(), "even block: unpaired primary class")?;
        next_p = made;
        next_s = Vec::new();
    } else {
        let (made, left) = st.residue_pairs(secs, nu, 2, true)?;
        next_s = made;
        for s in left {
            let p = prims.pop().ok_or_else(|| violation("even block: no primary partner"))?;
            next_p.push(st.merge(&[p, s], Rule::Absorb, nu)?);
        }
        let (made, rest) = st.double_all(prims, nu)?;
        need(rest.is_none(), "even block: unpaired primary class")?;
        next_p.extend(made);
    }
    contract_even_block(st, next_p, next_s, nu + 1, l - 1)
}

/// `2^{l+1}` classes — even primary classes of niveau `≥ ν` (at least
/// `2^l` of them) and even secondary classes of exact niveaux `ν … ν + l` —
/// contract (a subset of them) to one even primary class of niveau
/// `≥ ν + l + 1`.
pub fn contract_even_ladder(
    st: &mut ContractionState,
    prims: Vec<ClassId>,
    secs: Vec<ClassId>,
    nu: u64,
    l: u64,
) -> Result<ClassId> {
    need(
        prims.len() + secs.len() == pow2(l + 1) && prims.len() >= pow2(l),
        "even ladder needs 2^{l+1} classes, 2^l primary",
    )?;
    for &s in &secs {
        let n = st.niv(s);
        need(!st.primary(s) && st.even(s) && n >= nu && n <= nu + l, "even ladder: bad secondary class")?;
    }
    if l == 0 {
        return contract_even_block(st, prims, secs, nu, 1);
    }
    if let Some(pos) = secs.iter().position(|&s| st.niv(s) == nu + l) {
        let top = secs[pos];
        let p = contract_even_block(st, prims[..pow2(l)].to_vec(), Vec::new(), nu, l)?;
        return st.merge(&[p, top], Rule::Absorb, nu + l);
    }
    // Two halves of 2^l classes, each with at least 2^{l-1} primary ones.
    let half = pow2(l);
    let (mut h1p, mut h2p) = (Vec::new(), Vec::new());
    for (n, &p) in prims.iter().enumerate() {
        if n % 2 == 0 {
            h1p.push(p);
        } else {
            h2p.push(p);
        }
    }
    let mut pool: Vec<ClassId> = secs;
    let fill = |hp: &mut Vec<ClassId>, pool: &mut Vec<ClassId>| -> Vec<ClassId> {
        let mut hs = Vec::new();
        while hp.len() + hs.len() < half {
            hs.push(pool.pop().expect("counted"));
        }
        hs
    };
    // Surplus primaries beyond the half size move over as needed.
    while h1p.len() > half {
        h2p.push(h1p.pop().unwrap());
    }
    while h2p.len() > half {
        let x = h2p.pop().unwrap();
        if h1p.len() < half {
            h1p.push(x);
        }
    }
    let h1s = fill(&mut h1p, &mut pool);
    let h2s = fill(&mut h2p, &mut pool);
    let a = contract_even_ladder(st, h1p, h1s, nu, l - 1)?;
    let b = contract_even_ladder(st, h2p, h2s, nu, l - 1)?;
    st.merge(&[a, b], Rule::Doubling, nu + l)
}

/// `2^l + 2` classes — even primary classes of niveau `≥ ν` (at least two)
/// and secondary classes of exact niveau `ν` of either parity — contract
/// (a subset of at most `2^l` of them) to one even primary class of niveau
/// `≥ ν + l`.
pub fn contract_mixed_block(
    st: &mut ContractionState,
    prims: Vec<ClassId>,
    secs: Vec<ClassId>,
    nu: u64,
    l: u64,
) -> Result<ClassId> {
    need(
        l >= 1 && prims.len() + secs.len() == pow2(l) + 2 && prims.len() >= 2,
        "mixed block needs 2^l + 2 classes, two primary",
    )?;
    for &p in &prims {
        need(st.primary(p) && st.even(p) && st.niv(p) >= nu, "mixed block: bad primary class")?;
    }
    for &s in &secs {
        need(!st.primary(s) && st.niv(s) == nu, "mixed block: bad secondary class")?;
    }
    if l == 1 {
        return st.merge(&prims[..2], Rule::Doubling, nu);
    }
    let (ev, od): (Vec<ClassId>, Vec<ClassId>) = secs.iter().partition(|&&s| st.even(s));
    let (mut up_s, left_e) = st.residue_pairs(ev, nu, 2, true)?;
    let (made_o, _left_o) = st.residue_pairs(od, nu, 2, true)?;
    up_s.extend(made_o);
    let mut prims = prims;
    let mut up_p = Vec::new();
    for s in left_e {
        let p = prims.pop().ok_or_else(|| violation("mixed block: no primary partner"))?;
        up_p.push(st.merge(&[p, s], Rule::Absorb, nu)?);
    }
    let (made, _rest) = st.double_all(prims, nu)?;
    up_p.extend(made);
    let want = pow2(l - 1);
    need(!up_p.is_empty() && up_p.len() + up_s.len() >= want, "mixed block: too few classes one niveau up")?;
    let np = up_p.len().min(want);
    let p_take = up_p[..np].to_vec();
    let s_take = up_s[..want - np].to_vec();
    contract_even_block(st, p_take, s_take, nu + 1, l - 1)
}

/// `2^{l+1} + 2` classes — even primary classes of niveau `≥ ν` (at least
/// `2^l`) and secondary classes of either parity at exact niveaux
/// `ν … ν + l − 1` — contract to one even primary class of niveau
/// `≥ ν + l + 1`.
pub fn contract_mixed_ladder(
    st: &mut ContractionState,
    prims: Vec<ClassId>,
    secs: Vec<ClassId>,
    nu: u64,
    l: u64,
) -> Result<ClassId> {
    need(
        l >= 1 && prims.len() + secs.len() == pow2(l + 1) + 2 && prims.len() >= pow2(l),
        "mixed ladder needs 2^{l+1} + 2 classes, 2^l primary",
    )?;
    for &p in &prims {
        need(st.primary(p) && st.even(p) && st.niv(p) >= nu, "mixed ladder: bad primary class")?;
    }
    for &s in &secs {
        let n = st.niv(s);
        need(!st.primary(s) && n >= nu && n < nu + l, "mixed ladder: bad secondary class")?;
    }
    if l == 1 {
        return contract_mixed_block(st, prims, secs, nu, 2);
    }
    let top = nu + l - 1;
    // Even classes above ν collected for the final ladder.
    let mut upper: Vec<ClassId> = secs.iter().copied().filter(|&s| st.even(s) && st.niv(s) > nu).collect();
    let mut even_nu: Vec<ClassId> = secs.iter().copied().filter(|&s| st.even(s) && st.niv(s) == nu).collect();
    // Odd classes at each niveau pair up one niveau higher.
    let odd_by: Vec<Vec<ClassId>> =
        (nu..=top).map(|j| secs.iter().copied().filter(|&s| !st.even(s) && st.niv(s) == j).collect()).collect();
    let mut rem: Vec<Vec<ClassId>> = Vec::new();
    for (j, odd) in (nu..=top).zip(odd_by) {
        let (made, left) = st.residue_pairs(odd, j, 2, true)?;
        upper.extend(made);
        rem.push(left);
    }
    // rem[j - ν] holds the r_j unused odd classes at niveau j.
    let idx = |j: u64| (j - nu) as usize;
    let j2: Vec<u64> = (nu + 1..=top).filter(|&j| rem[idx(j)].len() == 2).collect();
    let mut j1: Vec<u64> = (nu + 1..=top).filter(|&j| rem[idx(j)].len() == 1).collect();
    let mut j0: Option<u64> = None;
    let mut it = j2.chunks_exact(2);
    for ch in &mut it {
        let (a, b) = (ch[0], ch[1]);
        for _ in 0..2 {
            let x = rem[idx(a)].pop().unwrap();
            let y = rem[idx(b)].pop().unwrap();
            upper.push(st.merge(&[x, y], Rule::ParityCorrection, a)?);
        }
    }
    if let Some(&j) = it.remainder().first() {
        j0 = Some(j);
    }
    if j1.len() >= 2 {
        if let Some(z) = j0 {
            for _ in 0..2 {
                let j = j1.remove(0);
                let x = rem[idx(j)].pop().unwrap();
                let y = rem[idx(z)].pop().unwrap();
                let (lo, hi, m) = if j < z { (x, y, j) } else { (y, x, z) };
                upper.push(st.merge(&[lo, hi], Rule::ParityCorrection, m)?);
            }
        }
        while j1.len() >= 2 {
            let (a, b) = (j1.remove(0), j1.remove(0));
            let x = rem[idx(a)].pop().unwrap();
            let y = rem[idx(b)].pop().unwrap();
            upper.push(st.merge(&[x, y], Rule::ParityCorrection, a)?);
        }
    } else if j1.len() == 1 {
        if let Some(z) = j0 {
            let j = j1.remove(0);
            let x = rem[idx(j)].pop().unwrap();
            let y = rem[idx(z)].pop().unwrap();
            let (lo, hi, m) = if j < z { (x, y, j) } else { (y, x, z) };
            upper.push(st.merge(&[lo, hi], Rule::ParityCorrection, m)?);
        }
    }
    // Exceptions: odd classes at ν and at most one niveau above.
    let odd_nu: Vec<ClassId> = rem[0].clone();
    let odd_hi: Vec<ClassId> = (nu + 1..=top).flat_map(|j| rem[idx(j)].clone()).collect();
    let kappa = odd_nu.len() + odd_hi.len();
    if kappa == 4 {
        for (x, y) in odd_nu.iter().zip(&odd_hi) {
            even_nu.push(st.merge(&[*x, *y], Rule::ParityCorrection, nu)?);
        }
    }
    // Even classes at niveau ν: secondary pairs go up, the last one or two
    // are absorbed by primaries, primaries double.
    let (made, left) = st.residue_pairs(even_nu, nu, 2, true)?;
    upper.extend(made);
    let mut prims = prims;
    let mut up_p = Vec::new();
    for s in left {
        let p = prims.pop().ok_or_else(|| violation("mixed ladder: no primary partner"))?;
        up_p.push(st.merge(&[p, s], Rule::Absorb, nu)?);
    }
    let (made, spare) = st.double_all(prims, nu)?;
    up_p.extend(made);
    if let Some(p) = spare {
        if st.niv(p) > nu {
            up_p.push(p);
        } else if kappa == 3 && !odd_nu.is_empty() && !odd_hi.is_empty() {
            up_p.push(st.merge(&[p, odd_nu[0], odd_hi[0]], Rule::LeftoverTriple, nu)?);
        }
    }
    let want = pow2(l);
    let want_p = pow2(l - 1);
    need(up_p.len() >= want_p && up_p.len() + upper.len() >= want, "mixed ladder: too few classes one niveau up")?;
    let np = up_p.len().min(want);
    let p_take = up_p[..np].to_vec();
    let s_take = upper[..want - np].to_vec();
    contract_even_ladder(st, p_take, s_take, nu + 1, l - 1)
}

/// Splits `prims` and `secs` into `total` classes with at least `min_p`
/// primary ones, preferring secondary classes.
fn select(prims: &[ClassId], secs: &[ClassId], total: usize, min_p: usize) -> Result<(Vec<ClassId>, Vec<ClassId>)> {
    let s_take = secs.len().min(total.saturating_sub(min_p));
    let p_take = total - s_take;
    if prims.len() < p_take.max(min_p) {
        return Err(Error::Internal(format!(
            "schedule needs {total} classes with {min_p} primary; has {} primary and {} secondary",
            prims.len(),
            secs.len()
        )));
    }
    Ok((prims[..p_take].to_vec(), secs[..s_take].to_vec()))
}

fn shortfall(what: &str) -> Error {
    Error::Internal(format!("schedule invariant failed: {what}"))
}

/// A schedule run: the state plus the branch tags taken.
struct Run {
    st: ContractionState,
    k: usize,
    tau: u64,
    route: Vec<String>,
}

impl Run {
    fn tag(&mut self, t: &str) {
        self.route.push(format!("pow2:{t}"));
    }

    /// Primary classes of exact niveau 0.
    fn level0(&self) -> Vec<ClassId> {
        let ids: Vec<ClassId> =
            self.st.live().into_iter().filter(|&i| self.st.primary(i) && self.st.niv(i) == 0).collect();
        self.st.sorted(ids)
    }

    fn secs(&self, j: u64, even: Option<bool>) -> Vec<ClassId> {
        self.st.sorted(self.st.secondaries(j, even))
    }

    fn secs_in(&self, lo: u64, hi: u64, even: Option<bool>) -> Vec<ClassId> {
        (lo..=hi).flat_map(|j| self.secs(j, even)).collect()
    }

    /// Pairs level-0 classes of equal parity; returns the pairs and the
    /// unpaired even and odd class, if any.
    fn level0_pairs(&mut self, ids: Vec<ClassId>) -> Result<(Vec<ClassId>, Option<ClassId>, Option<ClassId>)> {
        let (ev, od): (Vec<ClassId>, Vec<ClassId>) = ids.into_iter().partition(|&i| self.st.even(i));
        let (mut p1, le) = self.st.double_all(ev, 0)?;
        let (p1o, lo) = self.st.double_all(od, 0)?;
        p1.extend(p1o);
        Ok((p1, le, lo))
    }

    /// An odd secondary class at the smallest niveau in `min..=max`.
    fn odd_partner(&self, min: u64, max: u64) -> Option<ClassId> {
        (min..=max).flat_map(|j| self.secs(j, Some(false))).next()
    }

    /// Turns the unpaired even and odd level-0 classes plus an odd secondary
    /// class into one more primary class of niveau ≥ 1, if `p1` is short.
    fn top_up(
        &mut self,
        p1: &mut Vec<ClassId>,
        le: Option<ClassId>,
        lo: Option<ClassId>,
        want: usize,
        partner: Option<ClassId>,
    ) -> Result<()> {
        if p1.len() >= want {
            return Ok(());
        }
        match (le, lo, partner) {
            (Some(e), Some(o), Some(s)) => {
                self.tag("odd-triple");
                p1.push(self.st.merge(&[e, o, s], Rule::OddTriple, 0)?);
                Ok(())
            }
            _ => Err(shortfall("too few level-0 pairs and no odd triple")),
        }
    }

    /// One merge of two congruent classes among the first three of `pool`.
    fn one_pair(&mut self, pool: &[ClassId], nu: u64, same_parity: bool) -> Result<ClassId> {
        if pool.len() < 3 {
            return Err(shortfall("fewer than three classes to pair"));
        }
        let (made, _) = self.st.residue_pairs(pool[..3].to_vec(), nu, 2, same_parity)?;
        Ok(made[0])
    }

    /// `count` even secondary classes of niveau 1, correcting odd ones with
    /// odd classes from `donors` (all above niveau 1).
    fn even_level1(&mut self, count: usize, donors: &mut Vec<ClassId>) -> Result<Vec<ClassId>> {
        let mut ev = self.secs(1, Some(true));
        let mut od = self.secs(1, Some(false));
        while ev.len() < count {
            let (x, y) = match (od.pop(), donors.pop()) {
                (Some(x), Some(y)) => (x, y),
                _ => return Err(shortfall("cannot correct parity at niveau 1")),
            };
            ev.push(self.st.merge(&[x, y], Rule::ParityCorrection, 1)?);
        }
        ev.truncate(count);
        Ok(ev)
    }

    /// Contracts equal-niveau primary classes (a power of two of them, all
    /// of niveau ≥ `nu`) to one.
    fn finish(&mut self, list: Vec<ClassId>, nu: u64) -> Result<ClassId> {
        let n = list.len();
        if !n.is_power_of_two() {
            return Err(shortfall("final ladder needs a power of two"));
        }
        if n == 1 {
            return Ok(list[0]);
        }
        let l = n.trailing_zeros() as u64 - 1;
        contract_even_ladder(&mut self.st, list, Vec::new(), nu, l)
    }

    /// `count` blocks of four at niveau `nu`, each with a primary class, then
    /// the final ladder.
    fn blocks_of_four(&mut self, prims: Vec<ClassId>, secs: Vec<ClassId>, nu: u64, count: usize) -> Result<ClassId> {
        if prims.len() < count || prims.len() + secs.len() < 4 * count {
            return Err(shortfall("too few classes for blocks of four"));
        }
        let mut prims = prims;
        let mut secs = secs;
        let mut tops = Vec::new();
        for b in 0..count {
            let mut bp = vec![prims.remove(0)];
            // Spare primaries are spread so that later blocks keep one each.
            while bp.len() < 4 && secs.len() < 4 * (count - b) - bp.len() && prims.len() > count - b - 1 {
                bp.push(prims.remove(0));
            }
            let bs: Vec<ClassId> = secs.drain(..4 - bp.len()).collect();
            tops.push(contract_even_block(&mut self.st, bp, bs, nu, 2)?);
        }
        self.finish(tops, nu + 2)
    }

    // -- type A -------------------------------------------------------------

    fn type_a(&mut self) -> Result<ClassId> {
        let (k, tau) = (self.k, self.tau);
        let lvl0 = self.level0();
        let u0 = lvl0.len();
        let x1 = *lvl0
            .iter()
            .find(|&&i| self.st.cl(i).d.is_odd())
            .ok_or_else(|| Error::NotApplicable("no odd linear coefficient at level 0".into()))?;
        self.st.drop_class(x1)?;
        let rest: Vec<ClassId> = lvl0.into_iter().filter(|&i| i != x1).collect();
        let (p1, _, _) = self.level0_pairs(rest)?;
        if u0 >= 4 * k + 2 {
            self.tag("a-wide");
            return contract_even_ladder(&mut self.st, p1[..2 * k].to_vec(), Vec::new(), 1, tau);
        }
        if k >= 8 && u0 >= 2 * k + 2 {
            self.tag("a-upper");
            let secs = self.secs_in(1, 4, Some(true));
            let (ps, ss) = select(&p1, &secs, 2 * k, k)?;
            return contract_even_ladder(&mut self.st, ps, ss, 1, tau);
        }
        if k >= 8 && u0 >= k + 2 {
            self.tag("a-middle");
            let (p2, _) = self.st.double_all(p1[..k / 2].to_vec(), 1)?;
            if self.secs(3, Some(true)).len() >= 3 * k / 8 {
                self.tag("a-middle:niveau3");
                let (p3, _) = self.st.double_all(p2, 2)?;
                return self.blocks_of_four(p3, self.secs(3, Some(true)), 3, k / 8);
            }
            self.tag("a-middle:niveau2");
            let s1 = self.secs(1, Some(true));
            self.st.residue_pairs(s1, 1, 2, true)?;
            let s2 = self.secs(2, Some(true));
            return self.blocks_of_four(p2, s2, 2, k / 4);
        }
        if u0 == k + 1 {
            self.tag("a-minimal");
            let s1 = self.secs(1, Some(true));
            let (_, left) = self.st.residue_pairs(s1, 1, k / 2, true)?;
            return self.absorb_then_level2(p1, left, k / 4);
        }
        if k == 4 && (6..=17).contains(&u0) {
            self.tag("a-quartic");
            let s1 = self.secs(1, Some(true));
            let (_, left) = self.st.residue_pairs(s1, 1, 2, true)?;
            let mut p1 = p1;
            let mut p2 = Vec::new();
            for s in left {
                if let Some(p) = p1.pop() {
                    p2.push(self.st.merge(&[p, s], Rule::Absorb, 1)?);
                }
            }
            let (made, _) = self.st.double_all(p1, 1)?;
            p2.extend(made);
            let s2 = self.secs(2, Some(true));
            let s3 = self.secs(3, Some(true));
            if let (Some(&top), Some(&first)) = (s3.first(), p2.first()) {
                self.tag("a-quartic:niveau3");
                let p3 = if let Some(&s) = s2.first() {
                    self.st.merge(&[first, s], Rule::Absorb, 2)?
                } else if p2.len() >= 2 {
                    self.st.merge(&[p2[0], p2[1]], Rule::Doubling, 2)?
                } else {
                    return Err(shortfall("quartic type A: one class at niveau 2"));
                };
                return self.st.merge(&[p3, top], Rule::Absorb, 3);
            }
            return self.blocks_of_four(p2, s2, 2, 1);
        }
        Err(shortfall(&format!("type A with k = {k} and {u0} level-0 variables")))
    }

    /// Niveau-1 primaries absorb the leftover secondaries (the rest double),
    /// then `count` blocks of four at niveau 2.
    fn absorb_then_level2(&mut self, p1: Vec<ClassId>, left: Vec<ClassId>, count: usize) -> Result<ClassId> {
        let mut p1 = p1;
        let mut p2 = Vec::new();
        for s in left {
            if let Some(p) = p1.pop() {
                p2.push(self.st.merge(&[p, s], Rule::Absorb, 1)?);
            }
        }
        let (made, _) = self.st.double_all(p1, 1)?;
        p2.extend(made);
        let s2 = self.secs(2, Some(true));
        self.blocks_of_four(p2, s2, 2, count)
    }

    // -- type B -------------------------------------------------------------

    fn type_b(&mut self) -> Result<ClassId> {
        let (k, tau) = (self.k, self.tau);
        let lvl0 = self.level0();
        let u0 = lvl0.len();
        if u0 >= 4 * k {
            self.tag("b-wide");
            let (mut p1, le, lo) = self.level0_pairs(lvl0)?;
            let partner = self.odd_partner(1, k as u64);
            self.top_up(&mut p1, le, lo, 2 * k, partner)?;
            return contract_even_block(&mut self.st, p1[..2 * k].to_vec(), Vec::new(), 1, tau + 1);
        }
        if k >= 8 {
            return self.type_b_octic_plus(lvl0);
        }
        self.type_b_quartic(lvl0)
    }

    fn type_b_octic_plus(&mut self, lvl0: Vec<ClassId>) -> Result<ClassId> {
        let (k, tau) = (self.k, self.tau);
        let u0 = lvl0.len();
        let (p1, _, _) = self.level0_pairs(lvl0)?;
        if u0 > 2 * k && k >= 16 {
            self.tag("b-upper");
            let secs = self.secs_in(1, 4, None);
            let (ps, ss) = select(&p1, &secs, 2 * k + 2, k)?;
            return contract_mixed_ladder(&mut self.st, ps, ss, 1, tau);
        }
        if u0 > 2 * k {
            self.tag("b-upper-octic");
            let secs = self.secs_in(1, 3, None);
            if p1.len() + secs.len() >= 18 {
                let (ps, ss) = select(&p1, &secs, 18, 8)?;
                return contract_mixed_ladder(&mut self.st, ps, ss, 1, 3);
            }
            self.tag("b-upper-octic:niveau4");
            if let Some(&s4) = self.secs(4, Some(true)).first() {
                let p4 = contract_even_block(&mut self.st, p1[..8].to_vec(), Vec::new(), 1, 3)?;
                return self.st.merge(&[p4, s4], Rule::Absorb, 4);
            }
            let mut donors = self.secs(4, Some(false));
            let mut evens = self.secs_in(1, 3, Some(true));
            for s in self.secs_in(1, 3, Some(false)) {
                let d = donors.pop().ok_or_else(|| shortfall("octic: too few odd classes at niveau 4"))?;
                let j = self.st.niv(s);
                evens.push(self.st.merge(&[s, d], Rule::ParityCorrection, j)?);
            }
            let (ps, ss) = select(&p1, &evens, 16, 8)?;
            return contract_even_ladder(&mut self.st, ps, ss, 1, 3);
        }
        self.tag("b-lower");
        if p1.len() < k / 2 {
            return Err(shortfall("too few level-0 pairs"));
        }
        let p1: Vec<ClassId> = p1[..k / 2].to_vec();
        let s1 = self.secs(1, None);
        if s1.len() >= 3 * k / 2 + 2 {
            self.tag("b-lower:niveau1");
            let (ps, ss) = select(&p1, &s1, 2 * k + 2, 2)?;
            return contract_mixed_block(&mut self.st, ps, ss, 1, tau + 1);
        }
        self.st.residue_pairs(s1, 1, 2, false)?;
        let (p2, _) = self.st.double_all(p1, 1)?;
        let s2 = self.secs(2, None);
        if s2.len() >= 3 * k / 4 + 2 {
            self.tag("b-lower:niveau2");
            let (ps, ss) = select(&p2, &s2, k + 2, 2)?;
            return contract_mixed_block(&mut self.st, ps, ss, 2, tau);
        }
        if k >= 16 {
            self.tag("b-lower:niveau3");
            self.st.residue_pairs(s2, 2, 2, false)?;
            let (p3, _) = self.st.double_all(p2, 2)?;
            let s3 = self.secs(3, None);
            let (ps, ss) = select(&p3, &s3, k / 2 + 2, 2)?;
            return contract_mixed_block(&mut self.st, ps, ss, 3, tau - 1);
        }
        self.tag("b-lower:octic-refined");
        let (e2, o2) = (self.secs(2, Some(true)), self.secs(2, Some(false)));
        if e2.len() >= 3 || o2.len() >= 3 {
            let group = if e2.len() >= 3 { e2 } else { o2 };
            self.one_pair(&group, 2, true)?;
            let rest = self.secs(2, None);
            self.st.residue_pairs(rest, 2, 2, false)?;
            let p3 = self.st.merge(&[p2[0], p2[1]], Rule::Doubling, 2)?;
            let e3 = self.secs(3, Some(true));
            if e3.len() >= 3 {
                return contract_even_block(&mut self.st, vec![p3], e3[..3].to_vec(), 3, 2);
            }
            let o3 = self.secs(3, Some(false));
            let s4 = self.one_pair(&o3, 3, true)?;
            let e3 = *e3.first().ok_or_else(|| shortfall("octic: no even class at niveau 3"))?;
            let p4 = self.st.merge(&[p3, e3], Rule::Absorb, 3)?;
            return self.st.merge(&[p4, s4], Rule::Absorb, 4);
        }
        if e2.len() < 2 {
            return Err(shortfall("octic: fewer than two even classes at niveau 2"));
        }
        let p4 = contract_even_block(&mut self.st, p2.clone(), e2[..2].to_vec(), 2, 2)?;
        let (e3, o3) = (self.secs(3, Some(true)), self.secs(3, Some(false)));
        let group = if e3.len() >= 3 { e3 } else { o3 };
        let s4 = self.one_pair(&group, 3, true)?;
        self.st.merge(&[p4, s4], Rule::Absorb, 4)
    }

    fn type_b_quartic(&mut self, lvl0: Vec<ClassId>) -> Result<ClassId> {
        let u0 = lvl0.len();
        if let Some(&top) = self.secs(3, Some(true)).first() {
            self.tag("quartic-even-top");
            let p3 = self.quartic_to_niveau3(lvl0)?;
            return self.st.merge(&[p3, top], Rule::Absorb, 3);
        }
        if self.secs(3, None).len() >= 3 {
            return Err(Error::NeedsCycling);
        }
        self.tag("quartic-thin-top");
        let (mut p1, le, lo) = self.level0_pairs(lvl0)?;
        match u0 {
            14 | 15 => {
                self.tag("quartic-thin-top:level0-14-15");
                let partner = self.odd_partner(1, 3);
                self.top_up(&mut p1, le, lo, 7, partner)?;
                let s = self.one_even_class()?;
                contract_even_ladder(&mut self.st, p1[..7].to_vec(), vec![s], 1, 2)
            }
            13 => {
                self.tag("quartic-thin-top:level0-13");
                let s12 = self.secs_in(1, 2, None);
                if s12.len() >= 4 {
                    return contract_mixed_ladder(&mut self.st, p1[..6].to_vec(), s12[..4].to_vec(), 1, 2);
                }
                let mut evens = self.secs_in(1, 2, Some(true));
                let mut donors = self.secs(3, Some(false));
                for s in self.secs_in(1, 2, Some(false)) {
                    if evens.len() >= 2 {
                        break;
                    }
                    let d = donors.pop().ok_or_else(|| shortfall("quartic: no odd class at niveau 3"))?;
                    let j = self.st.niv(s);
                    evens.push(self.st.merge(&[s, d], Rule::ParityCorrection, j)?);
                }
                let (ps, ss) = select(&p1, &evens, 8, 4)?;
                contract_even_ladder(&mut self.st, ps, ss, 1, 2)
            }
            12 => {
                self.tag("quartic-thin-top:level0-12");
                let s12 = self.secs_in(1, 2, None);
                if p1.len() < 6 && s12.len() < 5 {
                    let partner = self.odd_partner(3, 3);
                    self.top_up(&mut p1, le, lo, 6, partner)?;
                }
                let (ps, ss) = select(&p1, &s12, 10, 4)?;
                contract_mixed_ladder(&mut self.st, ps, ss, 1, 2)
            }
            8..=11 => {
                self.tag("quartic-thin-top:level0-8-11");
                let partner = self.odd_partner(1, 3);
                self.top_up(&mut p1, le, lo, u0 / 2, partner)?;
                let s12 = self.secs_in(1, 2, None);
                let (ps, ss) = select(&p1, &s12, 10, 4)?;
                contract_mixed_ladder(&mut self.st, ps, ss, 1, 2)
            }
            7 => {
                self.tag("quartic-thin-top:level0-7");
                let s1 = self.secs(1, None);
                if s1.len() >= 7 {
                    return contract_mixed_block(&mut self.st, p1[..3].to_vec(), s1[..7].to_vec(), 1, 3);
                }
                let (e2, o2) = (self.secs(2, Some(true)), self.secs(2, Some(false)));
                if e2.len() >= 3 {
                    self.tag("quartic:even-level2");
                    return self.even_level2_finish(&p1, &e2);
                }
                if o2.len() >= 3 {
                    self.tag("quartic:odd-level2");
                    let s3 = self.one_pair(&o2, 2, true)?;
                    let mut donors = self.secs(2, Some(false));
                    let e1 = self.even_level1(1, &mut donors)?;
                    let p3 = contract_even_block(&mut self.st, p1[..3].to_vec(), e1, 1, 2)?;
                    return self.st.merge(&[p3, s3], Rule::Absorb, 3);
                }
                self.tag("quartic:mixed-level2");
                if e2.len() < 2 {
                    self.majority_pair_level1()?;
                }
                let e2 = self.secs(2, Some(true));
                if e2.len() < 2 {
                    return Err(shortfall("quartic: fewer than two even classes at niveau 2"));
                }
                let mut donors = self.secs(2, Some(false));
                let e1 = self.even_level1(1, &mut donors)?;
                let q1 = self.st.merge(&[p1[0], p1[1]], Rule::Doubling, 1)?;
                let q2 = self.st.merge(&[p1[2], e1[0]], Rule::Absorb, 1)?;
                contract_even_block(&mut self.st, vec![q1, q2], e2[..2].to_vec(), 2, 2)
            }
            6 => {
                self.tag("quartic-thin-top:level0-6");
                let s1 = self.secs(1, None);
                if s1.len() >= 8 {
                    return contract_mixed_block(&mut self.st, p1[..2].to_vec(), s1[..8].to_vec(), 1, 3);
                }
                if s1.len() == 7 {
                    let partner = self.odd_partner(2, 3);
                    if p1.len() >= 3 || partner.is_some() {
                        self.top_up(&mut p1, le, lo, 3, partner)?;
                        return contract_mixed_block(&mut self.st, p1[..3].to_vec(), s1, 1, 3);
                    }
                }
                let (e2, o2) = (self.secs(2, Some(true)), self.secs(2, Some(false)));
                if e2.len() >= 3 {
                    self.tag("quartic:even-level2");
                    return self.even_level2_finish(&p1, &e2);
                }
                if o2.len() >= 3 {
                    self.tag("quartic:odd-level2");
                    let s3 = self.one_pair(&o2, 2, true)?;
                    let partner = self.secs(2, Some(false)).first().copied();
                    if p1.len() < 3 {
                        self.top_up(&mut p1, le, lo, 3, partner)?;
                    }
                    if let Some(&e1) = self.secs(1, Some(true)).first() {
                        let p3 = contract_even_block(&mut self.st, p1[..3].to_vec(), vec![e1], 1, 2)?;
                        return self.st.merge(&[p3, s3], Rule::Absorb, 3);
                    }
                    return self.odd_level1_finish(&p1, s3);
                }
                self.tag("quartic:mixed-level2");
                self.majority_pair_level1()?;
                let e2 = self.secs(2, Some(true));
                self.even_level2_finish(&p1, &e2)
            }
            5 => {
                self.tag("quartic-thin-top:level0-5");
                let s1 = self.secs(1, None);
                if s1.len() >= 8 {
                    return contract_mixed_block(&mut self.st, p1[..2].to_vec(), s1[..8].to_vec(), 1, 3);
                }
                let (e2, o2) = (self.secs(2, Some(true)), self.secs(2, Some(false)));
                if e2.len() >= 3 {
                    self.tag("quartic:even-level2");
                    return self.even_level2_finish(&p1, &e2);
                }
                if o2.len() >= 3 {
                    self.tag("quartic:odd-level2");
                    let s3 = self.one_pair(&o2, 2, true)?;
                    let e1 = self.secs(1, Some(true));
                    if e1.len() >= 2 {
                        let p3 = contract_even_block(&mut self.st, p1[..2].to_vec(), e1[..2].to_vec(), 1, 2)?;
                        return self.st.merge(&[p3, s3], Rule::Absorb, 3);
                    }
                    return self.odd_level1_finish(&p1, s3);
                }
                self.tag("quartic:mixed-level2");
                if e2.len() < 2 {
                    return Err(shortfall("quartic: fewer than two even classes at niveau 2"));
                }
                let mut donors = self.secs(2, Some(false));
                let e1 = self.even_level1(2, &mut donors)?;
                let q1 = self.st.merge(&[p1[0], e1[0]], Rule::Absorb, 1)?;
                let q2 = self.st.merge(&[p1[1], e1[1]], Rule::Absorb, 1)?;
                contract_even_block(&mut self.st, vec![q1, q2], e2[..2].to_vec(), 2, 2)
            }
            _ => Err(shortfall(&format!("quartic type B with {u0} level-0 variables"))),
        }
    }

    /// Two niveau-1 primaries double and absorb three even niveau-2 classes.
    fn even_level2_finish(&mut self, p1: &[ClassId], e2: &[ClassId]) -> Result<ClassId> {
        if p1.len() < 2 || e2.len() < 3 {
            return Err(shortfall("quartic: too few classes for the niveau-2 block"));
        }
        let p2 = self.st.merge(&[p1[0], p1[1]], Rule::Doubling, 1)?;
        contract_even_block(&mut self.st, vec![p2], e2[..3].to_vec(), 2, 2)
    }

    /// Three odd niveau-1 classes give an even niveau-2 class; two niveau-1
    /// primaries double, absorb it, and absorb the even niveau-3 class `s3`.
    fn odd_level1_finish(&mut self, p1: &[ClassId], s3: ClassId) -> Result<ClassId> {
        let o1 = self.secs(1, Some(false));
        let s2 = self.one_pair(&o1, 1, true)?;
        let p2 = self.st.merge(&[p1[0], p1[1]], Rule::Doubling, 1)?;
        let p3 = self.st.merge(&[p2, s2], Rule::Absorb, 2)?;
        self.st.merge(&[p3, s3], Rule::Absorb, 3)
    }

    /// Merges two niveau-1 classes of the more frequent parity into an even
    /// niveau-2 class.
    fn majority_pair_level1(&mut self) -> Result<ClassId> {
        let (e1, o1) = (self.secs(1, Some(true)), self.secs(1, Some(false)));
        let group = if e1.len() >= o1.len() { e1 } else { o1 };
        self.one_pair(&group, 1, true)
    }

    /// One even secondary class at niveaux 1–3, built by parity correction
    /// or pairing when none exists.
    fn one_even_class(&mut self) -> Result<ClassId> {
        if let Some(&s) = self.secs_in(1, 3, Some(true)).first() {
            return Ok(s);
        }
        let odd: Vec<Vec<ClassId>> = (1..=3).map(|j| self.secs(j, Some(false))).collect();
        let occupied: Vec<usize> = (0..3).filter(|&j| !odd[j].is_empty()).collect();
        if occupied.len() >= 2 {
            let (a, b) = (occupied[0], occupied[1]);
            return self.st.merge(&[odd[a][0], odd[b][0]], Rule::ParityCorrection, a as u64 + 1);
        }
        let j = *occupied.first().ok_or_else(|| shortfall("no secondary class at niveaux 1-3"))?;
        self.one_pair(&odd[j].clone(), j as u64 + 1, true)
    }

    /// Level 0 → one primary class of niveau ≥ 3 (quartic type B with an
    /// even class at niveau 3).
    fn quartic_to_niveau3(&mut self, lvl0: Vec<ClassId>) -> Result<ClassId> {
        let u0 = lvl0.len();
        let (mut p1, le, lo) = self.level0_pairs(lvl0)?;
        if u0 >= 8 {
            let partner = self.odd_partner(1, 3);
            self.top_up(&mut p1, le, lo, 4, partner)?;
            return contract_even_block(&mut self.st, p1[..4].to_vec(), Vec::new(), 1, 2);
        }
        if p1.len() < 2 {
            return Err(shortfall("quartic: fewer than two level-0 pairs"));
        }
        let s1 = self.secs(1, None);
        if s1.len() >= 4 {
            self.tag("quartic:niveau1-block");
            return contract_mixed_block(&mut self.st, p1[..2].to_vec(), s1[..4].to_vec(), 1, 2);
        }
        if let Some(&e2) = self.secs(2, Some(true)).first() {
            self.tag("quartic:level2-absorb");
            let p2 = self.st.merge(&[p1[0], p1[1]], Rule::Doubling, 1)?;
            return self.st.merge(&[p2, e2], Rule::Absorb, 2);
        }
        self.tag("quartic:corrected-level1");
        let mut donors = self.secs(2, Some(false));
        let e1 = self.even_level1(2, &mut donors)?;
        contract_even_block(&mut self.st, p1[..2].to_vec(), e1, 1, 2)
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

fn require_pow2(ctx: &PadicContext) -> Result<u64> {
    if ctx.p != Int::from(2) || !matches!(ctx.k, 4 | 8 | 16 | 32) {
        return Err(Error::ContextNotApplicable);
    }
    Ok(ctx.k.trailing_zeros() as u64)
}

fn niveaux(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<Vec<u64>> {
    sys.a
        .iter()
        .map(|a| {
            vp(a, &ctx.p)
                .finite()
                .filter(|&v| v < ctx.k as u64)
                .ok_or_else(|| Error::PreconditionViolated("the system is not conditioned".into()))
        })
        .collect()
}

/// Whether a conditioned system needs the cycling transform: `k = 4`, a
/// level 0 too narrow for the wide schedule, and at least three variables at
/// niveau 3, all with odd linear coefficient.
pub fn needs_cycling(sys: &DiagLinSystem, ctx: &PadicContext) -> bool {
    let Ok(nu) = niveaux(sys, ctx) else { return false };
    if ctx.p != Int::from(2) || ctx.k != 4 {
        return false;
    }
    let u0 = nu.iter().filter(|&&v| v == 0).count();
    let top: Vec<usize> = (0..nu.len()).filter(|&i| nu[i] == 3).collect();
    u0 < 16 && top.len() >= 3 && top.iter().all(|&i| sys.b[i].is_odd())
}

/// Runs the contraction schedule on a conditioned system and returns the
/// final state, the class reaching the target niveau, and the branch tags.
pub fn pow2_schedule(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<(ContractionState, ClassId, Vec<String>)> {
    let tau = require_pow2(ctx)?;
    niveaux(sys, ctx)?;
    let st = ContractionState::from_system(sys, tau + 2);
    let mut run = Run { st, k: ctx.k as usize, tau, route: Vec::new() };
    let id = match stats(sys, ctx).system_type {
        SystemType::A => {
            run.tag("type-a");
            run.type_a()?
        }
        SystemType::B => {
            run.tag("type-b");
            run.type_b()?
        }
    };
    let cl = run.st.class(id)?;
    if !cl.primary || !cl.even() || cl.niveau() < tau + 2 {
        return Err(violation(format!("schedule ended at niveau {}", cl.niveau())));
    }
    run.st.check_invariants()?;
    Ok((run.st, id, run.route))
}

/// The pair witness encoded by a final class: its members set to 1, all
/// else 0, with a pivot pairing a zeroed (or low) odd-linear variable with an
/// odd-degree member.
pub fn realize(st: &ContractionState, id: ClassId, ctx: &PadicContext) -> Result<(Vec<Int>, (usize, usize))> {
    let sys = &st.system;
    let cl = st.class(id)?;
    let mut x = vec![Int::zero(); sys.s()];
    for &m in &cl.members {
        x[m] = Int::one();
    }
    let inside: BTreeSet<usize> = cl.members.iter().copied().collect();
    let l = *cl
        .members
        .iter()
        .find(|&&m| sys.a[m].is_odd())
        .ok_or_else(|| violation("final class has no odd degree coefficient"))?;
    let zeroed_odd = st
        .odd_zeroed_witness
        .filter(|i| !inside.contains(i))
        .or_else(|| (0..sys.s()).find(|&i| !inside.contains(&i) && sys.b[i].is_odd()));
    let low = || (0..sys.s()).find(|&i| sys.a[i].is_even() && sys.b[i].is_odd());
    let i = zeroed_odd.or_else(low).ok_or_else(|| Error::Internal("no pivot for the final class".into()))?;
    let w = HenselWitness { x: x.clone(), pivot: (i, l), context: ctx.clone(), system: sys.clone() };
    if let Some(f) = check_witness(&w).failure {
        return Err(Error::Internal(format!("constructed witness fails its check: {f}")));
    }
    Ok((x, (i, l)))
}

/// Solves a system needing the cycling transform: scale the variables of
/// niveaux 0–2 by 2 and divide the form by 8, so that the odd niveau-3
/// variables become level 0; three of them give a primary class and a zeroed
/// odd variable, and the former level 0 supplies the even secondaries.
pub fn cycling_solve(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<EngineOutcome> {
    let tau = require_pow2(ctx)?;
    if !needs_cycling(sys, ctx) {
        return Err(Error::NotApplicable("the system does not need cycling".into()));
    }
    let nu = niveaux(sys, ctx)?;
    let two = Int::from(2);
    let mults: Vec<Rat> = nu.iter().map(|&v| if v < 3 { Rat::from_integer(two.clone()) } else { Rat::one() }).collect();
    let mut transcript = Transcript::new(sys.clone(), ctx.k);
    transcript.push(TransformStep::scaling("cycle-niveaux", mults, ppow_rat(&two, -3), Rat::one()))?;
    let derived = transcript.derived.clone();
    let mut run =
        Run { st: ContractionState::from_system(&derived, tau + 2), k: 4, tau, route: vec!["pow2:cycling".into()] };
    let top = run.level0();
    if top.len() < 3 {
        return Err(shortfall("cycling: fewer than three odd variables at niveau 3"));
    }
    let p1 = run.st.merge(&[top[0], top[1]], Rule::Doubling, 0)?;
    for &t in &top[2..] {
        run.st.drop_class(t)?;
    }
    let s1 = run.secs(1, Some(true));
    let id = if s1.len() >= 7 {
        run.tag("cycling:wide");
        contract_even_block(&mut run.st, vec![p1], s1[..7].to_vec(), 1, 3)?
    } else {
        run.tag("cycling:narrow");
        let s2new = run.one_pair(&s1, 1, true)?;
        let rest = run.secs(1, Some(true));
        let s = *rest.first().ok_or_else(|| shortfall("cycling: no spare niveau-1 class"))?;
        let p2 = run.st.merge(&[p1, s], Rule::Absorb, 1)?;
        let mut s2: Vec<ClassId> = vec![s2new];
        s2.extend(run.secs(2, Some(true)).into_iter().filter(|&c| c != s2new));
        if s2.len() < 3 {
            return Err(shortfall("cycling: fewer than three even classes at niveau 2"));
        }
        contract_even_block(&mut run.st, vec![p2], s2[..3].to_vec(), 2, 2)?
    };
    run.st.check_invariants()?;
    let (x, pivot) = realize(&run.st, id, ctx)?;
    Ok(EngineOutcome { transcript, payload: Payload::Pair { x, pivot }, route: run.route })
}

/// The engine entry point for a conditioned system with `p = 2`,
/// `k ∈ {4, 8, 16, 32}` and `s ≥ k² + 2`.
pub fn solve_pow2(sys: &DiagLinSystem, ctx: &PadicContext) -> Result<EngineOutcome> {
    require_pow2(ctx)?;
    let k = ctx.k as usize;
    if sys.s() < k * k + 2 {
        return Err(Error::NotApplicable(format!("needs at least {} variables", k * k + 2)));
    }
    match pow2_schedule(sys, ctx) {
        Ok((st, id, route)) => {
            let (x, pivot) = realize(&st, id, ctx)?;
            Ok(EngineOutcome::direct(
                sys,
                ctx.k,
                Payload::Pair { x, pivot },
                &route.iter().map(String::as_str).collect::<Vec<_>>(),
            ))
        }
        Err(Error::NeedsCycling) => cycling_solve(sys, ctx),
        Err(e) => Err(e),
    }
}

/// Certificate with a lifted solution to precision `m` (0 skips the lift).
pub fn pow2_certificate(sys: &DiagLinSystem, ctx: &PadicContext, m: u32) -> Result<Certificate> {
    let out = solve_pow2(sys, ctx)?;
    let mut cert = Certificate::new(ctx, out.transcript, out.payload, out.route);
    if m > 0 {
        cert.precision_demo = Some(precision_demo(&cert, m)?);
    }
    Ok(cert)
}

// ---------------------------------------------------------------------------
// Synthetic contract checks
// ---------------------------------------------------------------------------

/// One of the four general contraction principles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Principle {
    /// [`contract_even_block`].
    EvenBlock,
    /// [`contract_even_ladder`].
    EvenLadder,
    /// [`contract_mixed_block`].
    MixedBlock,
    /// [`contract_mixed_ladder`].
    MixedLadder,
}

impl Principle {
    /// All four principles.
    pub const ALL: [Principle; 4] =
        [Principle::EvenBlock, Principle::EvenLadder, Principle::MixedBlock, Principle::MixedLadder];

    /// The smallest admissible `l`.
    pub fn min_l(self) -> u64 {
        match self {
            Principle::EvenBlock | Principle::EvenLadder => 0,
            Principle::MixedBlock | Principle::MixedLadder => 1,
        }
    }

    /// Number of input classes.
    pub fn total(self, l: u64) -> usize {
        match self {
            Principle::EvenBlock => pow2(l),
            Principle::EvenLadder => pow2(l + 1),
            Principle::MixedBlock => pow2(l) + 2,
            Principle::MixedLadder => pow2(l + 1) + 2,
        }
    }

    /// Least number of primary classes.
    pub fn min_primary(self, l: u64) -> usize {
        match self {
            Principle::EvenBlock => 1,
            Principle::EvenLadder | Principle::MixedLadder => pow2(l),
            Principle::MixedBlock => 2,
        }
    }

    /// The secondary types allowed above `ν`, as `(niveau offset, even)`.
    pub fn secondary_types(self, l: u64) -> Vec<(u64, bool)> {
        match self {
            Principle::EvenBlock => vec![(0, true)],
            Principle::EvenLadder => (0..=l).map(|j| (j, true)).collect(),
            Principle::MixedBlock => vec![(0, true), (0, false)],
            Principle::MixedLadder => (0..l).flat_map(|j| [(j, true), (j, false)]).collect(),
        }
    }

    /// The promised niveau gain.
    pub fn gain(self, l: u64) -> u64 {
        match self {
            Principle::EvenBlock | Principle::MixedBlock => l,
            Principle::EvenLadder | Principle::MixedLadder => l + 1,
        }
    }

    fn run(
        self,
        st: &mut ContractionState,
        prims: Vec<ClassId>,
        secs: Vec<ClassId>,
        nu: u64,
        l: u64,
    ) -> Result<ClassId> {
        match self {
            Principle::EvenBlock => contract_even_block(st, prims, secs, nu, l),
            Principle::EvenLadder => contract_even_ladder(st, prims, secs, nu, l),
            Principle::MixedBlock => contract_mixed_block(st, prims, secs, nu, l),
            Principle::MixedLadder => contract_mixed_ladder(st, prims, secs, nu, l),
        }
    }
}

/// A multiset of class types: a number of even primary classes and counts
/// of secondary classes per `(niveau offset, even)` type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeMultiset {
    /// Even primary classes of niveau `≥ ν`.
    pub primaries: usize,
    /// `(niveau offset above ν, even, count)`.
    pub secondaries: Vec<(u64, bool, usize)>,
}

/// Every type multiset that satisfies the hypotheses of `principle` at `l`.
pub fn type_multisets(principle: Principle, l: u64) -> Vec<TypeMultiset> {
    let total = principle.total(l);
    let types = principle.secondary_types(l);
    let mut out = Vec::new();
    for n in principle.min_primary(l)..=total {
        let m = total - n;
        let mut counts = vec![0usize; types.len()];
        compositions(m, 0, &mut counts, &mut |c: &[usize]| {
            let secondaries = types.iter().zip(c).filter(|(_, &c)| c > 0).map(|(&(j, e), &c)| (j, e, c)).collect();
            out.push(TypeMultiset { primaries: n, secondaries });
        });
    }
    out
}

fn compositions(left: usize, at: usize, counts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if at + 1 == counts.len() {
        counts[at] = left;
        f(counts);
        return;
    }
    for c in 0..=left {
        counts[at] = c;
        compositions(left - c, at + 1, counts, f);
    }
}

/// A uniformly drawn admissible multiset for `principle` at `l`.
pub fn random_multiset<R: rand::Rng>(principle: Principle, l: u64, rng: &mut R) -> TypeMultiset {
    let total = principle.total(l);
    let types = principle.secondary_types(l);
    let n = rng.gen_range(principle.min_primary(l)..=total);
    let mut counts = vec![0usize; types.len()];
    for _ in 0..total - n {
        counts[rng.gen_range(0..types.len())] += 1;
    }
    let secondaries = types.iter().zip(&counts).filter(|(_, &c)| c > 0).map(|(&(j, e), &c)| (j, e, c)).collect();
    TypeMultiset { primaries: n, secondaries }
}

/// Builds seed classes of the given types at niveau `nu` with random odd
/// parts (primaries sometimes already above `nu`), runs `principle`, and
/// checks the promise: one even primary class of niveau
/// `≥ nu + gain(l)`, consistent class sums, and (for the mixed block) at
/// most `2^l` inputs used.  Secondary classes exist only above niveau 0,
/// so `nu ≥ 1` is required when `types` has any.
pub fn check_principle<R: rand::Rng>(
    principle: Principle,
    nu: u64,
    l: u64,
    types: &TypeMultiset,
    bound: i64,
    rng: &mut R,
) -> Result<ClassId> {
    if nu == 0 && !types.secondaries.is_empty() {
        return Err(Error::InvalidInput("secondary classes need niveau ≥ 1".into()));
    }
    let two = Int::from(2);
    let odd = |rng: &mut R| Int::from(2 * rng.gen_range(0..bound.max(1)) + 1) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let (mut a, mut b, mut primary) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..types.primaries {
        let lift = if rng.gen_bool(0.75) { 0 } else { rng.gen_range(1..=2) };
        a.push(two.pow((nu + lift) as u32) * odd(rng));
        b.push(&two * odd(rng));
        primary.push(true);
    }
    for &(j, even, count) in &types.secondaries {
        for _ in 0..count {
            a.push(two.pow((nu + j) as u32) * odd(rng));
            b.push(if even { &two * odd(rng) } else { odd(rng) });
            primary.push(false);
        }
    }
    let sys = DiagLinSystem::new(a, b)?;
    let mut st = ContractionState::with_primaries(&sys, &primary, nu + principle.gain(l));
    let prims: Vec<ClassId> = (0..types.primaries).collect();
    let secs: Vec<ClassId> = (types.primaries..sys.s()).collect();
    let id = principle.run(&mut st, prims, secs, nu, l)?;
    let cl = st.class(id)?;
    if !cl.primary || !cl.even() || cl.niveau() < nu + principle.gain(l) {
        return Err(violation(format!("{principle:?} ended at niveau {}", cl.niveau())));
    }
    st.check_invariants()?;
    if principle == Principle::MixedBlock {
        let used = cl.provenance.leaves();
        if used > pow2(l) {
            return Err(violation(format!("mixed block used {used} > 2^l classes")));
        }
    }
    Ok(id)
}
