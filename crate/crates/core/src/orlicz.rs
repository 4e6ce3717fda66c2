//! Conditional Luxemburg and Amemiya norms, the conditional pairing `E[xy|F]`, the
//! operator norm of a pairing functional, and recovery of a density from a linear
//! local functional.
//!
//! Every quantity decomposes over the atoms of `F`. On an atom `A` with conditional
//! weights `w_ω = p_ω / P(A)` the norms reduce to one-dimensional problems in the
//! scale `λ`. The variable is first divided by its largest absolute value on the
//! atom, so each solve runs with `max |x| = 1` and the answer is scaled back.

use rand::Rng;

use crate::error::{Error, Result};
use crate::prob_space::{map_atoms, FiniteProbSpace, RandomVar, SubAlgebra};
use crate::scalar::{rel_diff, Scalar};
use crate::solvers::{bisect_monotone, golden_min, Expansion};
use crate::young::YoungFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMethod {
    Luxemburg,
    Amemiya,
}

/// Per-atom norm values with solver metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CondNorm<T> {
    /// Measurable for the conditioning algebra; nonnegative.
    pub per_atom: RandomVar<T>,
    pub method: NormMethod,
    pub tolerance_used: T,
    /// Per atom: whether the infimum over `λ` is a minimum.
    pub attained: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct NormOptions<T> {
    pub rel_tol: T,
    /// Solve atoms on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl<T: Scalar> Default for NormOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::tol(1e-10),
            parallel: false,
        }
    }
}

struct AtomData<T> {
    /// `|x_ω| / max|x|` on the atom.
    scaled: Vec<T>,
    weights: Vec<T>,
    scale: T,
}

fn atom_data<T: Scalar>(
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    k: usize,
) -> AtomData<T> {
    let abs: Vec<T> = f.atom(k).iter().map(|&i| x[i].abs()).collect();
    let scale = abs.iter().fold(T::zero(), |m, &v| m.max(v));
    let scaled = if scale > T::zero() {
        abs.iter().map(|&v| v / scale).collect()
    } else {
        abs
    };
    AtomData {
        scaled,
        weights: space.cond_weights(f, k),
        scale,
    }
}

fn check_inputs<T: Scalar>(
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    op: &'static str,
) -> Result<()> {
    if x.len() != space.n_outcomes() {
        return Err(Error::DimensionMismatch {
            expected: space.n_outcomes(),
            found: x.len(),
        });
    }
    if f.n_outcomes() != space.n_outcomes() {
        return Err(Error::DimensionMismatch {
            expected: space.n_outcomes(),
            found: f.n_outcomes(),
        });
    }
    if let Some(index) = x.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op, index });
    }
    Ok(())
}

/// `Σ w φ(b / λ)` on one atom.
fn modular<T: Scalar>(phi: &YoungFn<T>, d: &AtomData<T>, lambda: T) -> T {
    d.scaled
        .iter()
        .zip(&d.weights)
        .map(|(&b, &w)| {
            debug_assert!(w > T::zero(), "zero weight would allow 0·∞");
            if b == T::zero() {
                T::zero()
            } else {
                w * phi.eval(b / lambda)
            }
        })
        .sum()
}

const LUX_MAX_HALVINGS: usize = 60;

fn luxemburg_atom<T: Scalar>(phi: &YoungFn<T>, d: &AtomData<T>, rel_tol: T) -> Result<(T, bool)> {
    if d.scale == T::zero() {
        return Ok((T::zero(), true));
    }
    let one = T::one();
    let (t0, t_star) = phi.unit_level_bracket();
    // At λ = 1/t0 every term is at most w·φ(t0) <= w, so the modular is <= 1.
    let hi = one / t0;
    let mut lo = one / t_star;
    let m = |l: T| modular(phi, d, l);
    let mut halvings = 0;
    while m(lo) <= one {
        if halvings == LUX_MAX_HALVINGS {
            return Err(Error::Divergence {
                expansions: halvings,
            });
        }
        lo /= T::lit(2.0);
        halvings += 1;
    }
    let rep = bisect_monotone(m, one, lo, hi.max(lo), rel_tol)?;
    let mut lambda = rep.arg();
    // A jump of φ to +∞ at finite_sup puts the infimum exactly at 1/finite_sup when
    // the modular is already <= 1 just above it.
    let sup = phi.finite_sup();
    if sup.is_finite() {
        let jump = one / sup;
        let above = jump * (one + T::epsilon() * T::lit(4.0));
        if lambda <= jump * (one + rel_tol + rel_tol) && m(above) <= one {
            lambda = jump;
        }
    }
    let attained = m(lambda) <= one;
    Ok((d.scale * lambda, attained))
}

/// Conditional Luxemburg norm `inf{λ > 0 : E[φ(|x|/λ) | F] <= 1}`, per atom.
///
/// Found by bisection on `λ`; the modular is nonincreasing in `λ`. The initial
/// bracket is `[1/T*, 1/t0]` with `φ(T*) >= 1 >= φ(t0)`. The lower end is halved
/// until the modular exceeds one.
pub fn luxemburg_norm<T: Scalar>(
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    phi: &YoungFn<T>,
    opts: &NormOptions<T>,
) -> Result<CondNorm<T>> {
    check_inputs(space, x, f, "luxemburg_norm")?;
    let results = map_atoms(f.n_atoms(), opts.parallel, |k| {
        luxemburg_atom(phi, &atom_data(space, x, f, k), opts.rel_tol)
    });
    collect_norm(results, f, NormMethod::Luxemburg, opts.rel_tol)
}

fn collect_norm<T: Scalar>(
    results: Vec<Result<(T, bool)>>,
    f: &SubAlgebra,
    method: NormMethod,
    tol: T,
) -> Result<CondNorm<T>> {
    let mut values = Vec::with_capacity(results.len());
    let mut attained = Vec::with_capacity(results.len());
    for r in results {
        let (v, a) = r?;
        values.push(v);
        attained.push(a);
    }
    Ok(CondNorm {
        per_atom: f.broadcast(&values),
        method,
        tolerance_used: tol,
        attained,
    })
}

fn amemiya_atom<T: Scalar>(phi: &YoungFn<T>, d: &AtomData<T>, rel_tol: T) -> (T, bool) {
    if d.scale == T::zero() {
        return (T::zero(), true);
    }
    let one = T::one();
    let objective = |l: T| {
        let modular: T = d
            .scaled
            .iter()
            .zip(&d.weights)
            .map(|(&b, &w)| {
                if b == T::zero() {
                    T::zero()
                } else {
                    w * phi.eval(l * b)
                }
            })
            .sum();
        (one + modular) / l
    };
    let (t0, _) = phi.unit_level_bracket();
    // h(λ) >= 1/λ, so nothing below 1/h(t0) can beat λ = t0.
    let lo = one / objective(t0);
    let sup = phi.finite_sup();
    let (rep, open_edge) = if sup.is_finite() {
        let open = !phi.eval(sup).is_finite();
        let hi = if open { sup.prev_down() } else { sup };
        (
            golden_min(objective, lo, hi.max(lo), rel_tol, None),
            open.then_some(hi),
        )
    } else {
        let hi = t0.max(one) * T::lit(4.0);
        (
            golden_min(objective, lo, hi, rel_tol, Some(Expansion::default())),
            None,
        )
    };
    let at_open_edge = open_edge.is_some_and(|e| rep.arg() >= e);
    (d.scale * rep.value, rep.attained && !at_open_edge)
}

/// Conditional Amemiya norm `inf_{λ > 0} (1 + E[φ(λ|x|) | F]) / λ`, per atom.
///
/// Golden section on `λ`. The objective is quasi-convex in `λ` because it is the
/// perspective of `φ` in `1/λ`. When `φ` is finite everywhere the right edge is
/// expanded. If the objective is still decreasing when expansions stop improving by
/// `1e-12` relative, the limit value is returned with `attained = false` (the `p = 1`
/// case). When `φ` jumps to `+∞`, the search stays inside the finite region.
pub fn amemiya_norm<T: Scalar>(
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    f: &SubAlgebra,
    phi: &YoungFn<T>,
    opts: &NormOptions<T>,
) -> Result<CondNorm<T>> {
    check_inputs(space, x, f, "amemiya_norm")?;
    let results = map_atoms(f.n_atoms(), opts.parallel, |k| {
        Ok(amemiya_atom(phi, &atom_data(space, x, f, k), opts.rel_tol))
    });
    collect_norm(results, f, NormMethod::Amemiya, opts.rel_tol)
}

/// `E[xy|F]`.
pub fn pairing<T: Scalar>(
    space: &FiniteProbSpace<T>,
    x: &RandomVar<T>,
    y: &RandomVar<T>,
    f: &SubAlgebra,
) -> Result<RandomVar<T>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    space.cond_expectation(&(x * y), f)
}

/// Per-atom operator norm of `x ↦ E[xy|F]` against the conditional Luxemburg norm:
/// `sup{ |E[xy|A]| : ‖x|A‖_φ <= 1 }`.
///
/// The maximizer has `sign(x) = sign(y)`, which leaves a linear objective in `|x|` over
/// the unit ball `{E[φ(|x|)|A] <= 1}`. Lagrangian duality for that problem gives the
/// one-dimensional problem `inf_{k > 0} (1 + E[φ*(k|y|) | A]) / k`. It is solved by
/// golden section with right-edge expansion. Every `k` is an upper bound, so the
/// result never underestimates the norm.
pub fn pairing_operator_norm<T: Scalar>(
    space: &FiniteProbSpace<T>,
    y: &RandomVar<T>,
    f: &SubAlgebra,
    phi: &YoungFn<T>,
    opts: &NormOptions<T>,
) -> Result<RandomVar<T>> {
    check_inputs(space, y, f, "pairing_operator_norm")?;
    let one = T::one();
    let values = map_atoms(f.n_atoms(), opts.parallel, |k| {
        let d = atom_data(space, y, f, k);
        if d.scale == T::zero() {
            return T::zero();
        }
        let objective = |kk: T| {
            let pen: T = d
                .scaled
                .iter()
                .zip(&d.weights)
                .map(|(&c, &w)| {
                    if c == T::zero() {
                        T::zero()
                    } else {
                        w * phi.conjugate(kk * c)
                    }
                })
                .sum();
            (one + pen) / kk
        };
        // φ* is finite near zero; find k0 with φ*(k0) <= 1 so the objective is finite there.
        let mut k0 = one;
        for _ in 0..2000 {
            if phi.conjugate(k0) <= one {
                break;
            }
            k0 /= T::lit(2.0);
        }
        let lo = one / objective(k0);
        let hi = k0.max(one) * T::lit(4.0);
        let rep = golden_min(objective, lo, hi, opts.rel_tol, Some(Expansion::default()));
        d.scale * rep.value
    });
    Ok(f.broadcast(&values))
}

/// Recovers the density `y` with `μ(x) = E[xy|F]` from a linear local functional.
///
/// Linearity and locality are first tested on `probes` random pairs and atom unions.
/// `y` is then read off the indicator basis, `y_ω = μ(1_ω)(ω) · P(A(ω)) / p_ω`, and
/// must reproduce `μ` on fresh probes within `1e-9` relative.
pub fn recover_density<T, M, R>(
    space: &FiniteProbSpace<T>,
    mu: M,
    f: &SubAlgebra,
    probes: usize,
    rng: &mut R,
) -> Result<RandomVar<T>>
where
    T: Scalar,
    M: Fn(&RandomVar<T>) -> Result<RandomVar<T>>,
    R: Rng + ?Sized,
{
    let n = space.n_outcomes();
    if f.n_outcomes() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.n_outcomes(),
        });
    }
    let tol = T::tol(1e-9);
    let random_var = |rng: &mut R| {
        RandomVar::new((0..n).map(|_| T::lit(rng.gen_range(-2.0..2.0))).collect()).unwrap()
    };
    let close = |a: &RandomVar<T>, b: &RandomVar<T>| {
        a.len() == b.len()
            && a.values()
                .iter()
                .zip(b.values())
                .all(|(&u, &v)| rel_diff(u, v) <= tol)
    };
    let eval = |x: &RandomVar<T>| -> Result<RandomVar<T>> {
        let out = mu(x)?;
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: out.len(),
            });
        }
        if !f.is_measurable(&out) {
            return Err(Error::Contract(
                "functional output is not F-measurable".into(),
            ));
        }
        Ok(out)
    };
    for probe in 0..probes {
        let (x1, x2) = (random_var(rng), random_var(rng));
        let (a, b) = (
            T::lit(rng.gen_range(-2.0..2.0)),
            T::lit(rng.gen_range(-2.0..2.0)),
        );
        let combo = &x1.scale(a) + &x2.scale(b);
        let lhs = eval(&combo)?;
        let rhs = &eval(&x1)?.scale(a) + &eval(&x2)?.scale(b);
        if !close(&lhs, &rhs) {
            return Err(Error::Contract(format!(
                "functional is not linear on probe {probe}"
            )));
        }
        let mask_bits = rng.gen::<u64>();
        let mask = f.union_indicator(mask_bits);
        let local = eval(&x1.masked(&mask))?.masked(&mask);
        if !close(&local, &eval(&x1)?.masked(&mask)) {
            return Err(Error::Contract(format!(
                "functional is not local on probe {probe} (atom mask {mask_bits:#x})"
            )));
        }
    }
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        let out = eval(&RandomVar::new(e)?)?;
        let atom_mass = space.atom_prob(f, f.atom_of(i));
        y.push(out[i] * atom_mass / space.prob(i));
    }
    let y = RandomVar::new(y)?;
    for probe in 0..probes {
        let x = random_var(rng);
        if !close(&pairing(space, &x, &y, f)?, &eval(&x)?) {
            return Err(Error::Contract(format!(
                "recovered density does not reproduce the functional on probe {probe}"
            )));
        }
    }
    Ok(y)
}
