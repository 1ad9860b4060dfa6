//! Equivalence transforms and their transcripts.
//!
//! A [`TransformStep`] is a monomial substitution: each old variable is
//! either set to zero or replaced by `c_i · y_j` for a single new variable
//! `y_j`, and the two equations are multiplied by nonzero rationals.  Several
//! old variables may map to the same new variable (a contraction).  Pulling
//! back a solution is then just `x_i = c_i · y_{j(i)}`.

use crate::arith::{rat, rpow, Int, Rat};
use crate::error::{Error, Result};
use crate::system::DiagLinSystem;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// Image of one old variable under a step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarImage {
    /// `x_i = 0`.
    Zero,
    /// `x_i = mult · y_target`.
    To {
        /// Index of the new variable.
        target: usize,
        /// Nonzero rational multiplier.
        #[serde(with = "crate::serde_util::rat_str")]
        mult: Rat,
    },
}

/// One invertible-on-solutions transform of a system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformStep {
    /// Short human-readable tag (e.g. `"permute"`, `"contract"`).
    pub label: String,
    /// Image of every old variable.
    pub var_map: Vec<VarImage>,
    /// Number of new variables.
    pub new_len: usize,
    /// Multiplier applied to the degree-`k` equation.
    #[serde(with = "crate::serde_util::rat_str")]
    pub scale_a: Rat,
    /// Multiplier applied to the linear equation.
    #[serde(with = "crate::serde_util::rat_str")]
    pub scale_b: Rat,
}

impl TransformStep {
    /// The identity on `s` variables.
    pub fn identity(s: usize) -> Self {
        Self::permutation("identity", &(0..s).collect::<Vec<_>>())
    }

    /// New variable `j` is old variable `perm[j]`.
    pub fn permutation(label: &str, perm: &[usize]) -> Self {
        let mut var_map = vec![VarImage::Zero; perm.len()];
        for (j, &i) in perm.iter().enumerate() {
            var_map[i] = VarImage::To { target: j, mult: Rat::one() };
        }
        TransformStep { label: label.into(), var_map, new_len: perm.len(), scale_a: Rat::one(), scale_b: Rat::one() }
    }

    /// `x_i = mults[i] · y_i` followed by scaling the equations.
    pub fn scaling(label: &str, mults: Vec<Rat>, scale_a: Rat, scale_b: Rat) -> Self {
        let n = mults.len();
        let var_map = mults.into_iter().enumerate().map(|(i, m)| VarImage::To { target: i, mult: m }).collect();
        TransformStep { label: label.into(), var_map, new_len: n, scale_a, scale_b }
    }

    /// Partition-style contraction: `groups[j]` lists `(old index, multiplier)`
    /// pairs sharing new variable `j`; old variables not listed are zeroed.
    pub fn contraction(label: &str, s: usize, groups: &[Vec<(usize, Rat)>]) -> Self {
        let mut var_map = vec![VarImage::Zero; s];
        for (j, g) in groups.iter().enumerate() {
            for (i, m) in g {
                var_map[*i] = VarImage::To { target: j, mult: m.clone() };
            }
        }
        TransformStep { label: label.into(), var_map, new_len: groups.len(), scale_a: Rat::one(), scale_b: Rat::one() }
    }

    /// Checks structural validity against a source of `s` variables.
    pub fn validate(&self, s: usize) -> Result<()> {
        if self.var_map.len() != s {
            return Err(Error::InvalidTransform(format!(
                "step '{}' maps {} variables, system has {s}",
                self.label,
                self.var_map.len()
            )));
        }
        if self.scale_a.is_zero() || self.scale_b.is_zero() {
            return Err(Error::InvalidTransform(format!("step '{}' has a zero equation scale", self.label)));
        }
        let mut hit = vec![false; self.new_len];
        for img in &self.var_map {
            if let VarImage::To { target, mult } = img {
                if mult.is_zero() {
                    return Err(Error::InvalidTransform(format!("step '{}' has a zero multiplier", self.label)));
                }
                if *target >= self.new_len {
                    return Err(Error::InvalidTransform(format!("step '{}' targets a missing variable", self.label)));
                }
                hit[*target] = true;
            }
        }
        if hit.iter().any(|h| !h) {
            return Err(Error::InvalidTransform(format!(
                "step '{}' leaves a new variable without preimage",
                self.label
            )));
        }
        Ok(())
    }

    /// Pulls a solution of the derived system back to the source.
    pub fn pull_back(&self, y: &[Rat]) -> Vec<Rat> {
        self.var_map
            .iter()
            .map(|img| match img {
                VarImage::Zero => Rat::zero(),
                VarImage::To { target, mult } => mult * &y[*target],
            })
            .collect()
    }
}

/// Applies `step` to `sys` for degree `k`; the result must be integral.
pub fn apply_transform(sys: &DiagLinSystem, k: u32, step: &TransformStep) -> Result<DiagLinSystem> {
    step.validate(sys.s())?;
    let mut a = vec![Rat::zero(); step.new_len];
    let mut b = vec![Rat::zero(); step.new_len];
    for (i, img) in step.var_map.iter().enumerate() {
        if let VarImage::To { target, mult } = img {
            a[*target] += rat(&sys.a[i]) * rpow(mult, k);
            b[*target] += rat(&sys.b[i]) * mult;
        }
    }
    let to_int = |v: Rat, scale: &Rat| -> Result<Int> {
        let w = v * scale;
        if w.is_integer() {
            Ok(w.to_integer())
        } else {
            Err(Error::InvalidTransform(format!("step '{}' produces a non-integral coefficient", step.label)))
        }
    };
    let a = a.into_iter().map(|v| to_int(v, &step.scale_a)).collect::<Result<Vec<_>>>()?;
    let b = b.into_iter().map(|v| to_int(v, &step.scale_b)).collect::<Result<Vec<_>>>()?;
    DiagLinSystem::new(a, b)
}

/// An ordered chain of steps from a source system to a derived system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    /// Degree of the forms.
    pub k: u32,
    /// The system the chain starts from.
    pub source: DiagLinSystem,
    /// The steps, in application order.
    pub steps: Vec<TransformStep>,
    /// The system the chain ends at.
    pub derived: DiagLinSystem,
}

impl Transcript {
    /// The empty chain on `source`.
    pub fn new(source: DiagLinSystem, k: u32) -> Self {
        Transcript { k, derived: source.clone(), source, steps: Vec::new() }
    }

    /// Applies `step` to the current derived system and records it.
    pub fn push(&mut self, step: TransformStep) -> Result<()> {
        self.derived = apply_transform(&self.derived, self.k, &step)?;
        self.steps.push(step);
        Ok(())
    }

    /// Appends every step of `other`, whose source must equal our derived system.
    pub fn extend(&mut self, other: &Transcript) -> Result<()> {
        if other.source != self.derived || other.k != self.k {
            return Err(Error::InvalidTransform("cannot chain transcripts with mismatched systems".into()));
        }
        for s in &other.steps {
            self.push(s.clone())?;
        }
        Ok(())
    }

    /// Re-applies every step to `start` and returns the resulting system.
    pub fn replay_from(&self, start: &DiagLinSystem) -> Result<DiagLinSystem> {
        let mut cur = start.clone();
        for (n, s) in self.steps.iter().enumerate() {
            cur = apply_transform(&cur, self.k, s).map_err(|e| match e {
                Error::InvalidTransform(m) => Error::InvalidTransform(format!("step {n}: {m}")),
                other => other,
            })?;
        }
        Ok(cur)
    }

    /// Checks that replaying the steps on the source reproduces the derived system.
    pub fn verify_replay(&self) -> Result<()> {
        let d = self.replay_from(&self.source)?;
        if d != self.derived {
            return Err(Error::InvalidTransform("replay does not reproduce the derived system".into()));
        }
        Ok(())
    }

    /// Maps a solution of the derived system to one of the source.
    pub fn pull_back(&self, y: &[Rat]) -> Vec<Rat> {
        let mut cur = y.to_vec();
        for s in self.steps.iter().rev() {
            cur = s.pull_back(&cur);
        }
        cur
    }

    /// Composite multipliers: for each source variable, the derived index and
    /// total multiplier it is tied to, or `None` if it is zeroed.
    pub fn composite_map(&self) -> Vec<Option<(usize, Rat)>> {
        let mut cur: Vec<Option<(usize, Rat)>> = (0..self.source.s()).map(|i| Some((i, Rat::one()))).collect();
        for s in &self.steps {
            cur = cur
                .into_iter()
                .map(|e| {
                    e.and_then(|(i, m)| match &s.var_map[i] {
                        VarImage::Zero => None,
                        VarImage::To { target, mult } => Some((*target, m * mult)),
                    })
                })
                .collect();
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(int(n), int(d))
    }

    #[test]
    fn identity_step_is_identity() {
        let sys = DiagLinSystem::from_i64(&[1, -1], &[1, -1]);
        assert_eq!(apply_transform(&sys, 4, &TransformStep::identity(2)).unwrap(), sys);
    }

    #[test]
    fn cycling_step_on_power_of_two_example() {
        let mut a = vec![1i64; 15];
        a.extend([8, 8, 8]);
        let mut b = vec![0i64; 15];
        b.extend([1, 1, 1]);
        let sys = DiagLinSystem::from_i64(&a, &b);
        let mut mults = vec![r(2, 1); 15];
        mults.extend(vec![r(1, 1); 3]);
        let step = TransformStep::scaling("cycle", mults, r(1, 8), r(1, 1));
        let out = apply_transform(&sys, 4, &step).unwrap();
        let mut ea = vec![2i64; 15];
        ea.extend([1, 1, 1]);
        assert_eq!(out, DiagLinSystem::from_i64(&ea, &b));
    }

    #[test]
    fn contraction_of_one_pair() {
        let sys = DiagLinSystem::from_i64(&[3, 5], &[2, 7]);
        let step = TransformStep::contraction("contract", 2, &[vec![(0, r(7, 1)), (1, r(-2, 1))]]);
        let out = apply_transform(&sys, 4, &step).unwrap();
        // 3·7^4 + 5·(−2)^4 computed independently.
        let expected = 3 * 7i64.pow(4) + 5 * 2i64.pow(4);
        assert_eq!(expected, 7283);
        assert_eq!(out, DiagLinSystem::from_i64(&[7283], &[0]));
    }

    #[test]
    fn invalid_steps_are_rejected() {
        let sys = DiagLinSystem::from_i64(&[1, 2], &[1, 1]);
        let bad = TransformStep::scaling("zero", vec![r(0, 1), r(1, 1)], r(1, 1), r(1, 1));
        assert!(matches!(apply_transform(&sys, 4, &bad), Err(Error::InvalidTransform(_))));
        let bad = TransformStep::scaling("zero-scale", vec![r(1, 1), r(1, 1)], r(0, 1), r(1, 1));
        assert!(matches!(apply_transform(&sys, 4, &bad), Err(Error::InvalidTransform(_))));
        let bad = TransformStep::scaling("frac", vec![r(1, 2), r(1, 1)], r(1, 1), r(1, 1));
        assert!(matches!(apply_transform(&sys, 4, &bad), Err(Error::InvalidTransform(_))));
    }

    fn eval_rat(sys: &DiagLinSystem, k: u32, x: &[Rat]) -> (Rat, Rat) {
        let a = sys.a.iter().zip(x).map(|(a, x)| rat(a) * rpow(x, k)).sum();
        let b = sys.b.iter().zip(x).map(|(b, x)| rat(b) * x).sum();
        (a, b)
    }

    proptest! {
        /// Random chains of scalings, permutations and contractions: any exact
        /// rational solution of the derived system pulls back to one of the source.
        #[test]
        fn transcript_soundness(seed in any::<u64>(), n in 3usize..8) {
            let mut st = seed | 1;
            let mut next = || { st ^= st << 13; st ^= st >> 7; st ^= st << 17; st };
            let k = 4u32;
            let a: Vec<i64> = (0..n).map(|_| (next() % 41) as i64 - 20).collect();
            let b: Vec<i64> = (0..n).map(|_| (next() % 41) as i64 - 20).collect();
            let mut t = Transcript::new(DiagLinSystem::from_i64(&a, &b), k);
            for _ in 0..3 {
                let s = t.derived.s();
                match next() % 3 {
                    0 => {
                        let mults: Vec<Rat> = (0..s).map(|_| r((next() % 3) as i64 + 1, 1)).collect();
                        t.push(TransformStep::scaling("scale", mults, r(1, 1), r(2, 1))).unwrap();
                    }
                    1 => {
                        let mut perm: Vec<usize> = (0..s).collect();
                        perm.rotate_left((next() as usize) % s);
                        t.push(TransformStep::permutation("perm", &perm)).unwrap();
                    }
                    _ if s >= 3 => {
                        let mut groups = vec![vec![(0, r(1, 1)), (1, r(-1, 1))]];
                        for i in 2..s { groups.push(vec![(i, r(1, 1))]); }
                        t.push(TransformStep::contraction("contract", s, &groups)).unwrap();
                    }
                    _ => {}
                }
            }
            t.verify_replay().unwrap();
            // Plant a solution of the derived system: find one by making the
            // derived system trivially solved along a kernel direction when
            // possible, else use the zero-coefficient trick on a crafted point.
            let d = &t.derived;
            let s = d.s();
            // Search small integer points for an exact derived solution.
            let mut found = None;
            'search: for i in 0..s {
                for j in 0..s {
                    if i == j { continue; }
                    for xi in -3i64..=3 {
                        for xj in -3i64..=3 {
                            let mut y = vec![Rat::zero(); s];
                            y[i] = r(xi, 1);
                            y[j] = r(xj, 1);
                            if y.iter().all(|v| v.is_zero()) { continue; }
                            let (ea, eb) = eval_rat(d, k, &y);
                            if ea.is_zero() && eb.is_zero() { found = Some(y); break 'search; }
                        }
                    }
                }
            }
            if let Some(y) = found {
                let x = t.pull_back(&y);
                let (ea, eb) = eval_rat(&t.source, k, &x);
                prop_assert!(ea.is_zero() && eb.is_zero());
                prop_assert!(x.iter().any(|v| !v.is_zero()));
            }
            // Independently of planted solutions, the forms transform by the
            // recorded scales: A_src(pullback(y)) · Πscale_a = A_derived(y).
            let y: Vec<Rat> = (0..s).map(|_| r((next() % 7) as i64 - 3, 1)).collect();
            let x = t.pull_back(&y);
            let (sa, sb) = eval_rat(&t.source, k, &x);
            let (da, db) = eval_rat(d, k, &y);
            let pa: Rat = t.steps.iter().map(|s| s.scale_a.clone()).product();
            let pb: Rat = t.steps.iter().map(|s| s.scale_b.clone()).product();
            prop_assert_eq!(sa * pa, da);
            prop_assert_eq!(sb * pb, db);
        }
    }
}
