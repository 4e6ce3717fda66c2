//! Finite probability spaces, sub-σ-algebras as partitions, conditional expectation,
//! conditional essential sup/inf and gluing along partitions.
//!
//! Every outcome carries strictly positive mass, so almost-sure equality is plain
//! equality and a sub-σ-algebra is nothing more than a partition of the outcome
//! indices into atoms. A variable is measurable for a sub-algebra iff it is constant
//! on each of its atoms. All reductions run over atoms and outcomes in a fixed order,
//! so results are bit-for-bit reproducible.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome probabilities of a finite sample space with the discrete σ-algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProbSpace<T> {
    probs: Vec<T>,
}

impl<T: Scalar> FiniteProbSpace<T> {
    /// Probabilities must be strictly positive and sum to one within `1e-12`.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbabilities("no outcomes".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p > T::zero()) || !p.is_finite() {
                return Err(Error::InvalidProbabilities(format!(
                    "outcome {i} has probability {p}; every outcome must carry positive finite mass"
                )));
            }
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidProbabilities(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProbabilities("no outcomes".into()));
        }
        let p = T::one() / T::from_usize(n).unwrap();
        Ok(Self { probs: vec![p; n] })
    }

    #[inline]
    pub fn n_outcomes(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, i: usize) -> T {
        self.probs[i]
    }

    fn check_var(&self, x: &RandomVar<T>) -> Result<()> {
        if x.len() != self.n_outcomes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outcomes(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_alg(&self, f: &SubAlgebra) -> Result<()> {
        if f.n_outcomes() != self.n_outcomes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outcomes(),
                found: f.n_outcomes(),
            });
        }
        Ok(())
    }

    /// Unconditional expectation of a finite-valued variable.
    pub fn expectation(&self, x: &RandomVar<T>) -> Result<T> {
        self.check_var(x)?;
        finite_or_err(x, "expectation")?;
        Ok(self
            .probs
            .iter()
            .zip(x.values())
            .map(|(&p, &v)| p * v)
            .sum())
    }

    /// Probability of atom `k` of `f`.
    pub fn atom_prob(&self, f: &SubAlgebra, k: usize) -> T {
        f.atom(k).iter().map(|&i| self.probs[i]).sum()
    }

    /// Conditional weights `p_ω / P(A)` of the outcomes of atom `k`, in atom order.
    pub fn cond_weights(&self, f: &SubAlgebra, k: usize) -> Vec<T> {
        let mass = self.atom_prob(f, k);
        f.atom(k).iter().map(|&i| self.probs[i] / mass).collect()
    }

    /// `E[x|F]`: on each atom `A`, `Σ_{ω∈A} p_ω x_ω / P(A)`.
    pub fn cond_expectation(&self, x: &RandomVar<T>, f: &SubAlgebra) -> Result<RandomVar<T>> {
        self.check_var(x)?;
        self.check_alg(f)?;
        finite_or_err(x, "cond_expectation")?;
        let per_atom: Vec<T> = (0..f.n_atoms())
            .map(|k| {
                let atom = f.atom(k);
                let mass: T = atom.iter().map(|&i| self.probs[i]).sum();
                let weighted: T = atom.iter().map(|&i| self.probs[i] * x[i]).sum();
                weighted / mass
            })
            .collect();
        Ok(f.broadcast(&per_atom))
    }

    /// Per-atom maximum. Accepts infinite values.
    pub fn ess_sup_cond(&self, x: &RandomVar<T>, f: &SubAlgebra) -> Result<RandomVar<T>> {
        self.check_var(x)?;
        self.check_alg(f)?;
        Ok(ess_fold(x, f, T::neg_infinity(), T::max))
    }

    /// Per-atom minimum. Accepts infinite values.
    pub fn ess_inf_cond(&self, x: &RandomVar<T>, f: &SubAlgebra) -> Result<RandomVar<T>> {
        self.check_var(x)?;
        self.check_alg(f)?;
        Ok(ess_fold(x, f, T::infinity(), T::min))
    }
}

fn ess_fold<T: Scalar>(
    x: &RandomVar<T>,
    f: &SubAlgebra,
    init: T,
    op: impl Fn(T, T) -> T,
) -> RandomVar<T> {
    let per_atom: Vec<T> = f
        .atoms()
        .iter()
        .map(|atom| atom.iter().fold(init, |acc, &i| op(acc, x[i])))
        .collect();
    f.broadcast(&per_atom)
}

fn finite_or_err<T: Scalar>(x: &RandomVar<T>, op: &'static str) -> Result<()> {
    match x.values().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { op, index }),
        None => Ok(()),
    }
}

/// Runs `f` once per atom index and collects in atom order, on the rayon pool when
/// `parallel` is set.
pub(crate) fn map_atoms<R, F>(n_atoms: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if parallel {
        use rayon::prelude::*;
        (0..n_atoms).into_par_iter().map(f).collect()
    } else {
        (0..n_atoms).map(f).collect()
    }
}

/// A sub-σ-algebra of the discrete algebra, given by its atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubAlgebra {
    atoms: Vec<Vec<usize>>,
    atom_of: Vec<usize>,
}

impl SubAlgebra {
    /// Atoms must be nonempty, pairwise disjoint and cover `0..n`. Indices inside an
    /// atom are sorted; the order of the atoms themselves is kept.
    pub fn new(n: usize, atoms: Vec<Vec<usize>>) -> Result<Self> {
        let mut atom_of = vec![usize::MAX; n];
        let mut sorted = Vec::with_capacity(atoms.len());
        for (k, mut atom) in atoms.into_iter().enumerate() {
            if atom.is_empty() {
                return Err(Error::InvalidPartition(format!("atom {k} is empty")));
            }
            atom.sort_unstable();
            for &i in &atom {
                if i >= n {
                    return Err(Error::InvalidPartition(format!(
                        "atom {k} references outcome {i} but the space has {n} outcomes"
                    )));
                }
                if atom_of[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "outcome {i} appears in atoms {} and {k}",
                        atom_of[i]
                    )));
                }
                atom_of[i] = k;
            }
            sorted.push(atom);
        }
        if let Some(i) = atom_of.iter().position(|&k| k == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "outcome {i} is in no atom"
            )));
        }
        Ok(Self {
            atoms: sorted,
            atom_of,
        })
    }

    /// Builds the partition from an outcome → label map; atoms ordered by first occurrence.
    pub fn from_labels<L: PartialEq>(labels: &[L]) -> Self {
        let mut keys: Vec<&L> = Vec::new();
        let mut atoms: Vec<Vec<usize>> = Vec::new();
        let mut atom_of = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            let k = match keys.iter().position(|&c| c == l) {
                Some(k) => k,
                None => {
                    keys.push(l);
                    atoms.push(Vec::new());
                    keys.len() - 1
                }
            };
            atoms[k].push(i);
            atom_of.push(k);
        }
        Self { atoms, atom_of }
    }

    /// The trivial algebra `{∅, Ω}`.
    pub fn trivial(n: usize) -> Self {
        Self {
            atoms: vec![(0..n).collect()],
            atom_of: vec![0; n],
        }
    }

    /// The full power set: one atom per outcome.
    pub fn discrete(n: usize) -> Self {
        Self {
            atoms: (0..n).map(|i| vec![i]).collect(),
            atom_of: (0..n).collect(),
        }
    }

    #[inline]
    pub fn n_outcomes(&self) -> usize {
        self.atom_of.len()
    }

    #[inline]
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    #[inline]
    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    #[inline]
    pub fn atom(&self, k: usize) -> &[usize] {
        &self.atoms[k]
    }

    #[inline]
    pub fn atom_of(&self, i: usize) -> usize {
        self.atom_of[i]
    }

    /// True iff every atom of `finer` lies inside a single atom of `self`.
    pub fn is_coarser_than(&self, finer: &SubAlgebra) -> bool {
        self.n_outcomes() == finer.n_outcomes()
            && finer.atoms.iter().all(|atom| {
                let k = self.atom_of[atom[0]];
                atom.iter().all(|&i| self.atom_of[i] == k)
            })
    }

    /// Constant on every atom, compared exactly.
    pub fn is_measurable<T: Scalar>(&self, x: &RandomVar<T>) -> bool {
        x.len() == self.n_outcomes()
            && self
                .atoms
                .iter()
                .all(|atom| atom.iter().all(|&i| x[i] == x[atom[0]]))
    }

    /// The measurable variable equal to `per_atom[k]` on atom `k`.
    pub fn broadcast<T: Scalar>(&self, per_atom: &[T]) -> RandomVar<T> {
        assert_eq!(per_atom.len(), self.n_atoms(), "one value per atom");
        RandomVar {
            values: self.atom_of.iter().map(|&k| per_atom[k]).collect(),
        }
    }

    /// Value of `x` at the first outcome of each atom; the per-atom values of a
    /// measurable variable.
    pub fn atom_values<T: Scalar>(&self, x: &RandomVar<T>) -> Vec<T> {
        self.atoms.iter().map(|atom| x[atom[0]]).collect()
    }

    /// Entries of `x` on atom `k`, in atom order.
    pub fn restrict<T: Scalar>(&self, x: &RandomVar<T>, k: usize) -> Vec<T> {
        self.atoms[k].iter().map(|&i| x[i]).collect()
    }

    /// Outcome indicator of the union of the atoms whose bits are set in `mask`.
    pub fn union_indicator(&self, mask: u64) -> Vec<bool> {
        self.atom_of
            .iter()
            .map(|&k| k < 64 && mask & (1u64 << k) != 0)
            .collect()
    }

    /// Glues `pieces[k]` along atom `k`: the result agrees with piece `k` on atom `k`.
    pub fn concatenate<T: Scalar>(&self, pieces: &[RandomVar<T>]) -> Result<RandomVar<T>> {
        if pieces.len() != self.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: self.n_atoms(),
                found: pieces.len(),
            });
        }
        for piece in pieces {
            if piece.len() != self.n_outcomes() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_outcomes(),
                    found: piece.len(),
                });
            }
        }
        Ok(RandomVar {
            values: self
                .atom_of
                .iter()
                .enumerate()
                .map(|(i, &k)| pieces[k][i])
                .collect(),
        })
    }
}

/// An increasing sequence of sub-algebras: each stage is refined by the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    stages: Vec<SubAlgebra>,
}

impl Filtration {
    pub fn new(stages: Vec<SubAlgebra>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidPartition("filtration has no stages".into()));
        }
        for t in 1..stages.len() {
            if !stages[t - 1].is_coarser_than(&stages[t]) {
                return Err(Error::NotRefinement {
                    prev: t - 1,
                    stage: t,
                });
            }
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[SubAlgebra] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// A real (possibly extended) random variable indexed by outcome. Never NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVar<T> {
    values: Vec<T>,
}

impl<T: Scalar> RandomVar<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::NaN(i));
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, c: T) -> Self {
        assert!(!c.is_nan());
        Self { values: vec![c; n] }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, T::zero())
    }

    /// Indicator of a set of outcomes.
    pub fn indicator(mask: &[bool]) -> Self {
        Self {
            values: mask
                .iter()
                .map(|&b| if b { T::one() } else { T::zero() })
                .collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Applies `f` pointwise. Panics if `f` produces NaN.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let values: Vec<T> = self.values.iter().map(|&v| f(v)).collect();
        assert!(values.iter().all(|v| !v.is_nan()), "map produced NaN");
        Self { values }
    }

    /// Pointwise combination; panics on length mismatch or NaN output.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(
            self.len(),
            other.len(),
            "random variables on different spaces"
        );
        let values: Vec<T> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        assert!(values.iter().all(|v| !v.is_nan()), "zip_map produced NaN");
        Self { values }
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Zeroes the entries outside `mask`.
    pub fn masked(&self, mask: &[bool]) -> Self {
        assert_eq!(self.len(), mask.len());
        Self {
            values: self
                .values
                .iter()
                .zip(mask)
                .map(|(&v, &m)| if m { v } else { T::zero() })
                .collect(),
        }
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.len() == other.len() && self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }
}

impl<T> std::ops::Index<usize> for RandomVar<T> {
    type Output = T;

    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

macro_rules! pointwise_op {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a, T: Scalar> $trait<&'a RandomVar<T>> for &'a RandomVar<T> {
            type Output = RandomVar<T>;

            fn $method(self, rhs: &'a RandomVar<T>) -> RandomVar<T> {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
    };
}

pointwise_op!(Add, add, +);
pointwise_op!(Sub, sub, -);
pointwise_op!(Mul, mul, *);

impl<T: Scalar> Neg for &RandomVar<T> {
    type Output = RandomVar<T>;

    fn neg(self) -> RandomVar<T> {
        self.map(|v| -v)
    }
}
