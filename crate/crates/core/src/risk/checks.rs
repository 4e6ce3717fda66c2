use rand::Rng;

use crate::error::{Error, Result};
use crate::orlicz::pairing;
use crate::prob_space::{FiniteProbSpace, RandomVar, SubAlgebra};
use crate::scalar::Scalar;
use crate::solvers::coordinate_max;

use super::{check_var, fenchel_conjugate, ConditionalRisk};

fn random_var<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> RandomVar<T> {
    RandomVar::new((0..n).map(|_| T::lit(rng.gen_range(lo..hi))).collect()).unwrap()
}

fn max_abs_diff<T: Scalar>(a: &RandomVar<T>, b: &RandomVar<T>) -> T {
    a.values()
        .iter()
        .zip(b.values())
        .fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs()))
}

/// Deviation scaled by `max(1, |a|, |b|)`, coordinatewise maximum.
fn max_rel_diff<T: Scalar>(a: &RandomVar<T>, b: &RandomVar<T>) -> T {
    a.values()
        .iter()
        .zip(b.values())
        .fold(T::zero(), |m, (&u, &v)| {
            m.max((u - v).abs() / T::one().max(u.abs()).max(v.abs()))
        })
}

/// Atom-union masks to probe: all of them for at most 8 atoms, otherwise 64 random
/// ones plus the full union.
fn atom_masks<R: Rng + ?Sized>(n_atoms: usize, rng: &mut R) -> Vec<u64> {
    if n_atoms <= 8 {
        (0..1u64 << n_atoms).collect()
    } else {
        let all = if n_atoms >= 64 {
            u64::MAX
        } else {
            (1u64 << n_atoms) - 1
        };
        let mut masks: Vec<u64> = (0..64).map(|_| rng.gen::<u64>() & all).collect();
        masks.push(all);
        masks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityWitness<T> {
    pub trial: usize,
    /// Bit `k` set means atom `k` belongs to the union `A`.
    pub mask: u64,
    pub deviation: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport<T> {
    pub probes: usize,
    pub max_deviation: T,
    /// First probe exceeding the tolerance.
    pub witness: Option<LocalityWitness<T>>,
    pub tolerance: T,
    pub passed: bool,
}

/// Tests `1_A g(1_A x) = 1_A g(x)` within `1e-9` for random `x` and atom unions `A`.
pub fn locality_check<T, G, R>(
    g: G,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    trials: usize,
    rng: &mut R,
) -> Result<LocalityReport<T>>
where
    T: Scalar,
    G: Fn(&RandomVar<T>) -> Result<RandomVar<T>>,
    R: Rng + ?Sized,
{
    let n = space.n_outcomes();
    let tolerance = T::tol(1e-9);
    let mut probes = 0;
    let mut max_deviation = T::zero();
    let mut witness = None;
    for trial in 0..trials {
        let x = random_var(rng, n, -2.0, 2.0);
        let full = g(&x)?;
        for mask in atom_masks(f.n_atoms(), rng) {
            let ind = f.union_indicator(mask);
            let lhs = g(&x.masked(&ind))?.masked(&ind);
            let dev = max_rel_diff(&lhs, &full.masked(&ind));
            probes += 1;
            max_deviation = max_deviation.max(dev);
            if dev > tolerance && witness.is_none() {
                witness = Some(LocalityWitness {
                    trial,
                    mask,
                    deviation: dev,
                });
            }
        }
    }
    Ok(LocalityReport {
        probes,
        max_deviation,
        passed: witness.is_none(),
        witness,
        tolerance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionReport<T> {
    pub probes: usize,
    pub max_deviation: T,
    pub tolerance: T,
    pub passed: bool,
}

/// Tests `ρ(Σ_k 1_{B_k} x_k) = Σ_k 1_{B_k} ρ(x_k)` within `1e-9` for random pieces
/// `x_k`, where the `B_k` are the atoms of `partition`. Each `B_k` must be a union
/// of atoms of `f`.
pub fn extension_check<T, M, R>(
    rho: &M,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    partition: &SubAlgebra,
    trials: usize,
    rng: &mut R,
) -> Result<ExtensionReport<T>>
where
    T: Scalar,
    M: ConditionalRisk<T> + ?Sized,
    R: Rng + ?Sized,
{
    if !partition.is_coarser_than(f) {
        return Err(Error::InvalidPartition(
            "gluing partition must consist of unions of atoms of the conditioning algebra".into(),
        ));
    }
    let n = space.n_outcomes();
    let tolerance = T::tol(1e-9);
    let mut max_deviation = T::zero();
    for _ in 0..trials {
        let pieces: Vec<RandomVar<T>> = (0..partition.n_atoms())
            .map(|_| random_var(rng, n, -2.0, 2.0))
            .collect();
        let glued = partition.concatenate(&pieces)?;
        let lhs = rho.evaluate(space, &glued, f)?;
        let values = pieces
            .iter()
            .map(|p| rho.evaluate(space, p, f))
            .collect::<Result<Vec<_>>>()?;
        let rhs = partition.concatenate(&values)?;
        max_deviation = max_deviation.max(max_rel_diff(&lhs, &rhs));
    }
    Ok(ExtensionReport {
        probes: trials,
        max_deviation,
        tolerance,
        passed: max_deviation <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport<T> {
    pub trials: usize,
    /// Largest violation of `x <= y ⇒ ρ(x) >= ρ(y)`.
    pub monotonicity: T,
    /// Largest `|ρ(x + m) - ρ(x) + m|` over measurable `m`.
    pub cash_invariance: T,
    /// Largest violation of convexity with measurable weights in `[0, 1]`.
    pub convexity: T,
    /// `|ρ(0)|`, reported but not required to vanish.
    pub normalization: T,
    pub tolerance: T,
    pub passed: bool,
}

/// Samples the defining properties of a conditional convex risk measure.
pub fn axiom_check<T, M, R>(
    rho: &M,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    trials: usize,
    rng: &mut R,
) -> Result<AxiomReport<T>>
where
    T: Scalar,
    M: ConditionalRisk<T> + ?Sized,
    R: Rng + ?Sized,
{
    let n = space.n_outcomes();
    let tolerance = T::tol(1e-9);
    let scaled = |v: T, a: T, b: T| v / T::one().max(a.abs()).max(b.abs());
    let (mut mono, mut cash, mut conv) = (T::zero(), T::zero(), T::zero());
    let measurable = |rng: &mut R, lo: f64, hi: f64| {
        let per_atom: Vec<T> = (0..f.n_atoms())
            .map(|_| T::lit(rng.gen_range(lo..hi)))
            .collect();
        f.broadcast(&per_atom)
    };
    for _ in 0..trials {
        let x = random_var(rng, n, -2.0, 2.0);
        let bump: RandomVar<T> = random_var(rng, n, 0.0, 1.0);
        let rx = rho.evaluate(space, &x, f)?;
        let ry = rho.evaluate(space, &(&x + &bump), f)?;
        for (&a, &b) in rx.values().iter().zip(ry.values()) {
            mono = mono.max(scaled(b - a, a, b));
        }
        let m = measurable(rng, -3.0, 3.0);
        let shifted = rho.evaluate(space, &(&x + &m), f)?;
        for ((&s, &r), &mv) in shifted.values().iter().zip(rx.values()).zip(m.values()) {
            cash = cash.max(scaled((s - r + mv).abs(), s, r));
        }
        let z = random_var(rng, n, -2.0, 2.0);
        let rz = rho.evaluate(space, &z, f)?;
        let lam = measurable(rng, 0.0, 1.0);
        let one_minus = lam.map(|l| T::one() - l);
        let mix = &(&lam * &x) + &(&one_minus * &z);
        let rm = rho.evaluate(space, &mix, f)?;
        for i in 0..n {
            let bound = lam[i] * rx[i] + one_minus[i] * rz[i];
            conv = conv.max(scaled(rm[i] - bound, rm[i], bound));
        }
    }
    let normalization = rho.evaluate(space, &RandomVar::zeros(n), f)?.max_abs();
    Ok(AxiomReport {
        trials,
        monotonicity: mono,
        cash_invariance: cash,
        convexity: conv,
        normalization,
        tolerance,
        passed: mono <= tolerance && cash <= tolerance && conv <= tolerance,
    })
}

/// Deviations `max |ρ(x_n) - ρ(x)|` at the given indices of a sequence.
pub fn lebesgue_along<T, M>(
    rho: &M,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    x: &RandomVar<T>,
    sequence: impl Fn(usize) -> RandomVar<T>,
    indices: &[usize],
) -> Result<Vec<T>>
where
    T: Scalar,
    M: ConditionalRisk<T> + ?Sized,
{
    let limit = rho.evaluate(space, x, f)?;
    indices
        .iter()
        .map(|&n| Ok(max_abs_diff(&rho.evaluate(space, &sequence(n), f)?, &limit)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LebesgueReport<T> {
    pub trials: usize,
    /// `(n, max deviation over trials)` at each checkpoint.
    pub deviations: Vec<(usize, T)>,
    pub tail_index: usize,
    pub tail_deviation: T,
    pub tolerance: T,
    pub passed: bool,
}

const LEBESGUE_CHECKPOINTS: [usize; 4] = [10, 100, 1_000, 10_000];

/// Continuity smoke test along dominated sequences `x_n = x + z_n / n²`, with `x`
/// uniform on `[-2, 2]` and fresh `z_n` uniform on `[-1, 1]`. Every term is
/// dominated by `|x| + 1`. Passes when the deviation at `n = 10⁴` is at most `1e-6`.
pub fn lebesgue_check<T, M, R>(
    rho: &M,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    trials: usize,
    rng: &mut R,
) -> Result<LebesgueReport<T>>
where
    T: Scalar,
    M: ConditionalRisk<T> + ?Sized,
    R: Rng + ?Sized,
{
    let n = space.n_outcomes();
    let mut worst = vec![T::zero(); LEBESGUE_CHECKPOINTS.len()];
    for _ in 0..trials {
        let x: RandomVar<T> = random_var(rng, n, -2.0, 2.0);
        let perturb: Vec<RandomVar<T>> = LEBESGUE_CHECKPOINTS
            .iter()
            .map(|_| random_var(rng, n, -1.0, 1.0))
            .collect();
        let seq = |k: usize| {
            let j = LEBESGUE_CHECKPOINTS.iter().position(|&c| c == k).unwrap();
            let nn = T::lit(k as f64);
            &x + &perturb[j].scale(T::one() / (nn * nn))
        };
        let devs = lebesgue_along(rho, space, f, &x, seq, &LEBESGUE_CHECKPOINTS)?;
        for (w, d) in worst.iter_mut().zip(devs) {
            *w = w.max(d);
        }
    }
    let tolerance = T::lit(1e-6);
    let tail_deviation = *worst.last().unwrap();
    Ok(LebesgueReport {
        trials,
        deviations: LEBESGUE_CHECKPOINTS.iter().copied().zip(worst).collect(),
        tail_index: *LEBESGUE_CHECKPOINTS.last().unwrap(),
        tail_deviation,
        tolerance,
        passed: tail_deviation <= tolerance,
    })
}

/// The static functional `ρ₀(x) = E[ρ(x, F)]`.
pub struct Scalarized<'a, T: Scalar, M: ConditionalRisk<T> + ?Sized> {
    pub rho: &'a M,
    pub f: &'a SubAlgebra,
    _scalar: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar, M: ConditionalRisk<T> + ?Sized> Scalarized<'a, T, M> {
    pub fn new(rho: &'a M, f: &'a SubAlgebra) -> Self {
        Self {
            rho,
            f,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn evaluate(&self, space: &FiniteProbSpace<T>, x: &RandomVar<T>) -> Result<T> {
        space.expectation(&self.rho.evaluate(space, x, self.f)?)
    }

    /// `E[ρ*(y)]`, `+∞` if the penalty is infinite on some atom.
    pub fn conjugate_expected(&self, space: &FiniteProbSpace<T>, y: &RandomVar<T>) -> Result<T> {
        let pen = fenchel_conjugate(self.rho, space, y, self.f)?;
        if pen.values().iter().any(|v| v.is_infinite()) {
            return Ok(T::infinity());
        }
        space.expectation(&pen)
    }

    /// `sup_x E[xy] - ρ₀(x)` over all of `R^n` by coordinate ascent from zero. Uses
    /// only evaluations of `ρ`; `+∞` when a coordinate direction is unbounded.
    pub fn conjugate_numeric(&self, space: &FiniteProbSpace<T>, y: &RandomVar<T>) -> Result<T> {
        check_var(space, y, self.f, "conjugate_numeric")?;
        let failure = std::cell::Cell::new(None);
        let g = |x: &[T]| {
            let x = RandomVar::new(x.to_vec()).unwrap();
            let pair = space.expectation(&(&x * y));
            match pair.and_then(|p| Ok(p - self.evaluate(space, &x)?)) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    T::neg_infinity()
                }
            }
        };
        let rep = coordinate_max(g, vec![T::zero(); y.len()], T::lit(1e-15), 50_000);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(rep.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarizationReport<T> {
    /// Definitional route: numeric supremum over `x`.
    pub numeric: T,
    /// `E[ρ*(y)]`.
    pub expected: T,
    pub tolerance: T,
    pub agree: bool,
}

/// Compares both routes to `ρ₀*(y)`; they must agree within `1e-6`.
pub fn scalarization_check<T, M>(
    rho: &M,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    y: &RandomVar<T>,
) -> Result<ScalarizationReport<T>>
where
    T: Scalar,
    M: ConditionalRisk<T> + ?Sized,
{
    let s = Scalarized::new(rho, f);
    let numeric = s.conjugate_numeric(space, y)?;
    let expected = s.conjugate_expected(space, y)?;
    let tolerance = T::lit(1e-6);
    let agree = if numeric.is_infinite() || expected.is_infinite() {
        numeric == expected
    } else {
        (numeric - expected).abs() <= tolerance
    };
    Ok(ScalarizationReport {
        numeric,
        expected,
        tolerance,
        agree,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyBoundAtom<T> {
    /// `E[xy|A] - ρ*(y) >= -β` on this atom.
    pub hypothesis: bool,
    /// Normalized penalty `ρ*(y) + ρ(0)`.
    pub penalty: T,
    /// `2β + 2(ρ(-2|x|) - ρ(0))`.
    pub bound: T,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyBoundReport<T> {
    pub atoms: Vec<PenaltyBoundAtom<T>>,
    pub tolerance: T,
    /// Every atom satisfying the hypothesis satisfies the bound.
    pub passed: bool,
}

/// Checks `ρ*(y) <= 2β + 2ρ(-2|x|)` on each atom where `E[xy|A] - ρ*(y) >= -β`.
///
/// `ρ` is first normalized to `ρ(x) - ρ(0)`, which shifts its penalty by `+ρ(0)`.
/// Atoms violating the hypothesis are reported and skipped.
pub fn penalty_bound_check<T, M>(
    rho: &M,
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    y: &RandomVar<T>,
    beta: T,
    f: &SubAlgebra,
) -> Result<PenaltyBoundReport<T>>
where
    T: Scalar,
    M: ConditionalRisk<T> + ?Sized,
{
    check_var(space, x, f, "penalty_bound_check")?;
    check_var(space, y, f, "penalty_bound_check")?;
    if !(beta >= T::zero()) {
        return Err(Error::Parameter(format!(
            "beta must be nonnegative, got {beta}"
        )));
    }
    let n = space.n_outcomes();
    let r0 = f.atom_values(&rho.evaluate(space, &RandomVar::zeros(n), f)?);
    let pen = f.atom_values(&fenchel_conjugate(rho, space, y, f)?);
    let pair = f.atom_values(&pairing(space, x, y, f)?);
    let two = T::lit(2.0);
    let r2 = f.atom_values(&rho.evaluate(space, &x.abs().scale(-two), f)?);
    let tolerance = T::tol(1e-8);
    let atoms: Vec<PenaltyBoundAtom<T>> = (0..f.n_atoms())
        .map(|k| {
            let penalty = pen[k] + r0[k];
            let bound = two * beta + two * (r2[k] - r0[k]);
            let hypothesis = pair[k] - penalty >= -beta;
            PenaltyBoundAtom {
                hypothesis,
                penalty,
                bound,
                holds: !hypothesis || penalty <= bound + tolerance,
            }
        })
        .collect();
    let passed = atoms.iter().all(|a| a.holds);
    Ok(PenaltyBoundReport {
        atoms,
        tolerance,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformOrderReport<T> {
    /// `(n, max over atoms of s_n)` at powers of ten and at the last index.
    pub trace: Vec<(usize, T)>,
    /// `s_N` per atom, broadcast.
    pub tail: RandomVar<T>,
    pub tolerance: T,
    pub passed: bool,
}

/// Computes `s_n = max_{z ∈ C} E[|u_n z| | F]` for `n = 1..=n_max` and passes when
/// the tail `s_{n_max}` is below `1e-8` on every atom.
///
/// `u` must be nonnegative and pointwise nonincreasing in `n`; otherwise a contract
/// error names the first offending index.
pub fn uniform_order_continuity_check<T: Scalar>(
    space: &FiniteProbSpace<T>,
    set: &[RandomVar<T>],
    f: &SubAlgebra,
    u: impl Fn(usize) -> RandomVar<T>,
    n_max: usize,
) -> Result<UniformOrderReport<T>> {
    if n_max == 0 {
        return Err(Error::Parameter("n_max must be positive".into()));
    }
    let n = space.n_outcomes();
    let mut prev: Option<RandomVar<T>> = None;
    let mut trace = Vec::new();
    let mut tail = RandomVar::zeros(n);
    for idx in 1..=n_max {
        let un = u(idx);
        if un.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: un.len(),
            });
        }
        if un.values().iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::Contract(format!("u_{idx} has a negative entry")));
        }
        if let Some(p) = &prev {
            if !un.le(p) {
                return Err(Error::Contract(format!(
                    "u_{idx} is not below u_{} pointwise",
                    idx - 1
                )));
            }
        }
        let record = idx == n_max || is_power_of_ten(idx);
        if record {
            let mut s = RandomVar::zeros(n);
            for z in set {
                let e = space.cond_expectation(&(&un * z).abs(), f)?;
                s = s.zip_map(&e, T::max);
            }
            trace.push((idx, s.max_abs()));
            if idx == n_max {
                tail = s;
            }
        }
        prev = Some(un);
    }
    let tolerance = T::lit(1e-8);
    Ok(UniformOrderReport {
        trace,
        passed: tail.max_abs() < tolerance,
        tail,
        tolerance,
    })
}

fn is_power_of_ten(mut k: usize) -> bool {
    while k.is_multiple_of(10) && k > 1 {
        k /= 10;
    }
    k == 1
}
