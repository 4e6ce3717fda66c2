use crate::error::{Error, Result};
use crate::orlicz::pairing;
use crate::prob_space::{map_atoms, FiniteProbSpace, RandomVar, SubAlgebra};
use crate::scalar::Scalar;
use crate::solvers::{
    coordinate_max, simplex_max, simplex_mirror_max, FnObjective, NumericGradient,
    SimplexObjective, SimplexOptions, SolveReport,
};

use super::{check_var, ConditionalRisk, DualHint, MEAN_TOL, SIGN_TOL};

const ASCENT_TOL: f64 = 1e-14;
const ASCENT_SWEEPS: usize = 20_000;

/// `q = -y` on atom `k` when `y` is feasible there, clipped at zero.
fn feasible_density<T: Scalar>(y: &[T], w: &[T]) -> Option<Vec<T>> {
    let sign_tol = T::tol(SIGN_TOL);
    if y.iter().any(|&v| v > sign_tol) {
        return None;
    }
    let mean: T = y.iter().zip(w).map(|(&v, &wi)| v * wi).sum();
    if (mean + T::one()).abs() > T::tol(MEAN_TOL) {
        return None;
    }
    Some(y.iter().map(|&v| (-v).max(T::zero())).collect())
}

/// Numeric penalty on atom `k`: `sup_x E[xy|A] - ρ(x)|_A` over `x` supported on `A`,
/// by coordinate ascent from zero. Relies on locality, so `ρ` must be trusted.
fn numeric_penalty_atom<T, R>(
    rho: &R,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    k: usize,
    y: &[T],
) -> Result<T>
where
    T: Scalar,
    R: ConditionalRisk<T> + ?Sized,
{
    let atom = f.atom(k);
    let w = space.cond_weights(f, k);
    let n = space.n_outcomes();
    let first = atom[0];
    let failure = std::cell::Cell::new(None);
    let g = |xa: &[T]| {
        let mut x = vec![T::zero(); n];
        for (&i, &v) in atom.iter().zip(xa) {
            x[i] = v;
        }
        let pair: T = xa
            .iter()
            .zip(y)
            .zip(&w)
            .map(|((&a, &b), &c)| a * b * c)
            .sum();
        match RandomVar::new(x).and_then(|x| rho.evaluate(space, &x, f)) {
            Ok(r) => pair - r[first],
            Err(e) => {
                failure.set(Some(e));
                T::neg_infinity()
            }
        }
    };
    let rep = coordinate_max(
        g,
        vec![T::zero(); atom.len()],
        T::lit(ASCENT_TOL),
        ASCENT_SWEEPS,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(rep.value)
}

fn require_trusted<T: Scalar, R: ConditionalRisk<T> + ?Sized>(rho: &R) -> Result<()> {
    if rho.trusted() {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "{} has not passed locality and axiom checks; numeric conjugation refused",
            rho.tag()
        )))
    }
}

/// Penalty `ρ*(-q)` on atom `k` for a density `q` in the weighted simplex.
fn penalty_for_density<T, R>(
    rho: &R,
    space: &FiniteProbSpace<T>,
    f: &SubAlgebra,
    k: usize,
    q: &[T],
    w: &[T],
) -> Result<T>
where
    T: Scalar,
    R: ConditionalRisk<T> + ?Sized,
{
    match rho.penalty_atom(q, w) {
        Some(v) => Ok(v),
        None => {
            require_trusted(rho)?;
            let y: Vec<T> = q.iter().map(|&v| -v).collect();
            numeric_penalty_atom(rho, space, f, k, &y)
        }
    }
}

/// The penalty `ρ*(y) = ess sup_x { E[xy|F] - ρ(x) }`, per atom.
///
/// Atoms where `y` has a positive part (beyond `1e-12`) or `E[y|A] ≠ -1` (beyond
/// `1e-10`) get `+∞` without optimizing. Otherwise the closed form is used when the
/// measure has one. Failing that, the supremum is found by coordinate ascent from
/// `x = 0`, which requires a trusted measure.
pub fn fenchel_conjugate<T, R>(
    rho: &R,
    space: &FiniteProbSpace<T>,
    y: &RandomVar<T>,
    f: &SubAlgebra,
) -> Result<RandomVar<T>>
where
    T: Scalar,
    R: ConditionalRisk<T> + ?Sized,
{
    check_var(space, y, f, "fenchel_conjugate")?;
    let mut values = Vec::with_capacity(f.n_atoms());
    for k in 0..f.n_atoms() {
        let w = space.cond_weights(f, k);
        let ya = f.restrict(y, k);
        let v = match feasible_density(&ya, &w) {
            None => T::infinity(),
            Some(q) => penalty_for_density(rho, space, f, k, &q, &w)?,
        };
        values.push(v);
    }
    Ok(f.broadcast(&values))
}

#[derive(Debug, Clone, Copy)]
pub struct DualOptions<T> {
    pub simplex: SimplexOptions<T>,
    /// Solve atoms on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl<T: Scalar> Default for DualOptions<T> {
    fn default() -> Self {
        Self {
            simplex: SimplexOptions::default(),
            parallel: false,
        }
    }
}

/// A dual variable with its penalty and the primal-dual gap, per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate<T> {
    /// `y <= 0` with `E[y|F] = -1`.
    pub y: RandomVar<T>,
    /// `ρ*(y)`.
    pub penalty: RandomVar<T>,
    /// `ρ(x) - (E[xy|F] - ρ*(y))`; nonnegative up to rounding by weak duality.
    pub gap: RandomVar<T>,
    /// The risk value `ρ(x)` the gap is measured against.
    pub risk: RandomVar<T>,
    /// Per atom: the dual solver met its tolerance.
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl<T: Scalar> DualCertificate<T> {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn max_gap(&self) -> T {
        self.gap
            .values()
            .iter()
            .fold(T::zero(), |m, &g| m.max(g.abs()))
    }
}

/// Projected gradient first; if it runs out of iterations, exponentiated gradient from
/// the uniform density, keeping whichever result is better.
fn ascend<T: Scalar, G: SimplexObjective<T> + ?Sized>(
    objective: &G,
    w: &[T],
    opts: &SimplexOptions<T>,
) -> SolveReport<T> {
    let pg = simplex_max(objective, w, None, opts).unwrap_or_else(|nc| nc.best);
    if pg.converged {
        return pg;
    }
    let md = simplex_mirror_max(objective, w, None, opts).unwrap_or_else(|nc| nc.best);
    let iterations = pg.iterations + md.iterations;
    let mut best = if md.converged || md.value > pg.value {
        md
    } else {
        pg
    };
    best.iterations = iterations;
    best
}

struct AtomDual<T> {
    q: Vec<T>,
    converged: bool,
    iterations: usize,
}

fn solve_atom<T, R>(
    rho: &R,
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    k: usize,
    opts: &SimplexOptions<T>,
) -> Result<AtomDual<T>>
where
    T: Scalar,
    R: ConditionalRisk<T> + ?Sized,
{
    let w = space.cond_weights(f, k);
    let xa = f.restrict(x, k);
    let n = xa.len();
    match rho.dual_hint() {
        DualHint::Uniform => Ok(AtomDual {
            q: vec![T::one(); n],
            converged: true,
            iterations: 0,
        }),
        DualHint::Vertex => {
            let mut best: Option<(T, usize)> = None;
            for i in 0..n {
                let mut q = vec![T::zero(); n];
                q[i] = T::one() / w[i];
                let v = -xa[i] - penalty_for_density(rho, space, f, k, &q, &w)?;
                if best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, i));
                }
            }
            let (_, i) = best.expect("atoms are nonempty");
            let mut q = vec![T::zero(); n];
            q[i] = T::one() / w[i];
            Ok(AtomDual {
                q,
                converged: true,
                iterations: n,
            })
        }
        DualHint::Gradient => {
            let failure = std::cell::Cell::new(None);
            let value = |q: &[T]| {
                let lin: T = q
                    .iter()
                    .zip(&xa)
                    .zip(&w)
                    .map(|((&a, &b), &c)| -a * b * c)
                    .sum();
                match penalty_for_density(rho, space, f, k, q, &w) {
                    Ok(p) if p.is_finite() => lin - p,
                    Ok(_) => T::neg_infinity(),
                    Err(e) => {
                        failure.set(Some(e));
                        T::neg_infinity()
                    }
                }
            };
            let probe = vec![T::one(); n];
            let result = if rho.penalty_gradient_atom(&probe, &w).is_some() {
                let objective = FnObjective {
                    value: &value,
                    gradient: |q: &[T]| {
                        let pg = rho.penalty_gradient_atom(q, &w).unwrap_or_default();
                        xa.iter()
                            .zip(pg)
                            .map(|(&xi, gi)| -xi - gi)
                            .collect::<Vec<T>>()
                    },
                };
                ascend(&objective, &w, opts)
            } else {
                let objective = NumericGradient {
                    value: &value,
                    weights: &w,
                    step: T::lit(1e-7),
                };
                ascend(&objective, &w, opts)
            };
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let rep = result;
            Ok(AtomDual {
                q: rep.point,
                converged: rep.converged,
                iterations: rep.iterations,
            })
        }
    }
}

/// Solves the dual problem `sup_q E[-xq|A] - ρ*(-q)` on every atom and returns the
/// certificate `y = -q*`.
///
/// The solver is chosen by [`ConditionalRisk::dual_hint`]. A solver that exhausts its
/// iteration budget still yields its best iterate; the corresponding `converged`
/// flag is false and the gap shows how far off it is.
pub fn robust_representation<T, R>(
    rho: &R,
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    opts: &DualOptions<T>,
) -> Result<DualCertificate<T>>
where
    T: Scalar,
    R: ConditionalRisk<T> + ?Sized,
{
    check_var(space, x, f, "robust_representation")?;
    let risk = rho.evaluate(space, x, f)?;
    let solved = map_atoms(f.n_atoms(), opts.parallel, |k| {
        solve_atom(rho, space, x, f, k, &opts.simplex)
    });
    let mut y = vec![T::zero(); x.len()];
    let mut converged = Vec::with_capacity(solved.len());
    let mut iterations = Vec::with_capacity(solved.len());
    for (k, s) in solved.into_iter().enumerate() {
        let s = s?;
        for (&i, &qi) in f.atom(k).iter().zip(&s.q) {
            y[i] = -qi + T::zero();
        }
        converged.push(s.converged);
        iterations.push(s.iterations);
    }
    let y = RandomVar::new(y)?;
    let penalty = fenchel_conjugate(rho, space, &y, f)?;
    let pair = pairing(space, x, &y, f)?;
    let gap = risk
        .values()
        .iter()
        .zip(pair.values())
        .zip(penalty.values())
        .map(|((&r, &p), &c)| r - (p - c))
        .collect();
    Ok(DualCertificate {
        y,
        penalty,
        gap: RandomVar::new(gap)?,
        risk,
        converged,
        iterations,
    })
}

/// Whether the dual supremum is achieved by the returned maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttainmentReport<T> {
    pub certificate: DualCertificate<T>,
    /// `|ρ(x) - (E[xy*|F] - ρ*(y*))|` per atom.
    pub residual: RandomVar<T>,
    pub tolerance: T,
    pub attained: bool,
    pub note: &'static str,
}

const ATTAINMENT_NOTE: &str =
    "on a finite space the feasible densities form a compact simplex per atom and \
     the shipped measures are continuous, so the dual supremum is always a maximum";

/// Checks `ρ(x) = E[xy*|F] - ρ*(y*)` within `1e-6` per atom for the certificate of
/// [`robust_representation`].
pub fn attainment_check<T, R>(
    rho: &R,
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    opts: &DualOptions<T>,
) -> Result<AttainmentReport<T>>
where
    T: Scalar,
    R: ConditionalRisk<T> + ?Sized,
{
    let certificate = robust_representation(rho, space, x, f, opts)?;
    let tolerance = T::lit(1e-6);
    let residual = certificate.gap.abs();
    let attained = residual.values().iter().all(|&r| r <= tolerance);
    Ok(AttainmentReport {
        certificate,
        residual,
        tolerance,
        attained,
        note: ATTAINMENT_NOTE,
    })
}
