//! One-dimensional and small simplex-constrained solvers used by the norms and the
//! dual problems.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    /// Argmin or argmax (a single coordinate for the scalar solvers).
    pub point: Vec<T>,
    pub value: T,
    pub iterations: usize,
    /// The stated tolerance was met.
    pub converged: bool,
    /// The optimum is achieved at `point` rather than approached in a limit.
    pub attained: bool,
}

impl<T: Scalar> SolveReport<T> {
    fn scalar(x: T, value: T, iterations: usize, converged: bool, attained: bool) -> Self {
        Self {
            point: vec![x],
            value,
            iterations,
            converged,
            attained,
        }
    }

    /// The argument of a scalar solve.
    pub fn arg(&self) -> T {
        self.point[0]
    }
}

const BISECT_MAX_DOUBLINGS: usize = 60;
const BISECT_MAX_ITERS: usize = 400;

/// Smallest point where a nonincreasing `f` drops to `target` or below.
///
/// If `f(lo) <= target` already, `lo` is returned. Otherwise `hi` is doubled (at most
/// 60 times) until `f(hi) <= target`, then the bracket is bisected until its width is
/// below `rel_tol * hi`. The returned point is the feasible end of the final bracket.
pub fn bisect_monotone<T: Scalar>(
    f: impl Fn(T) -> T,
    target: T,
    lo: T,
    hi: T,
    rel_tol: T,
) -> Result<SolveReport<T>> {
    let mut lo = lo;
    let mut hi = hi;
    let f_lo = f(lo);
    if f_lo <= target {
        return Ok(SolveReport::scalar(lo, f_lo, 0, true, true));
    }
    let mut doublings = 0;
    let mut f_hi = f(hi);
    while !(f_hi <= target) {
        if doublings == BISECT_MAX_DOUBLINGS {
            return Err(Error::NoBracket {
                expansions: doublings,
            });
        }
        lo = hi;
        hi = if hi > T::zero() { hi + hi } else { T::one() };
        f_hi = f(hi);
        doublings += 1;
    }
    let mut iterations = 0;
    while hi - lo > rel_tol * hi.abs() && iterations < BISECT_MAX_ITERS {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid <= target {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let converged = hi - lo <= rel_tol * hi.abs() || (lo + (hi - lo) / T::lit(2.0)) >= hi;
    Ok(SolveReport::scalar(hi, f_hi, iterations, converged, true))
}

/// Right-edge bracket expansion for [`golden_min`].
#[derive(Debug, Clone, Copy)]
pub struct Expansion<T> {
    pub factor: T,
    pub max_expansions: usize,
    /// Relative improvement below which a still-decreasing edge is treated as the
    /// limit of an unattained infimum.
    pub stall_rel: T,
}

impl<T: Scalar> Default for Expansion<T> {
    fn default() -> Self {
        Self {
            factor: T::lit(4.0),
            max_expansions: 200,
            stall_rel: T::tol(1e-12),
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_MAX_ITERS: usize = 2000;

/// Golden-section minimization of a unimodal `f` on `[lo, hi]` (`0 <= lo < hi`).
///
/// With `expand`, the right edge is pushed out by `factor` while `f` keeps
/// decreasing there. If the decrease stalls below `stall_rel` the infimum is taken to
/// be approached at infinity and the report has `attained = false`. The final answer
/// is the best of the interior probes and the bracket endpoints, so minima sitting
/// on a boundary are returned exactly.
pub fn golden_min<T: Scalar>(
    f: impl Fn(T) -> T,
    lo: T,
    hi: T,
    rel_tol: T,
    expand: Option<Expansion<T>>,
) -> SolveReport<T> {
    let mut lo = lo;
    let mut hi = hi;
    let mut iterations = 0;
    if let Some(exp) = expand {
        let mut f_hi = f(hi);
        let mut count = 0;
        loop {
            let next = hi * exp.factor;
            if !next.is_finite() {
                return SolveReport::scalar(hi, f_hi, iterations, false, false);
            }
            let f_next = f(next);
            iterations += 1;
            if !(f_next < f_hi) {
                hi = next;
                break;
            }
            let improvement = f_hi - f_next;
            if improvement <= exp.stall_rel * T::one().max(f_next.abs()) {
                return SolveReport::scalar(next, f_next, iterations, true, false);
            }
            count += 1;
            if count == exp.max_expansions {
                return SolveReport::scalar(next, f_next, iterations, false, false);
            }
            lo = hi;
            hi = next;
            f_hi = f_next;
        }
    }

    let r = T::lit(INV_PHI);
    let width0 = hi - lo;
    let abs_floor = T::epsilon() * width0.max(T::min_positive_value());
    let (lo0, hi0) = (lo, hi);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut converged = false;
    for _ in 0..GOLDEN_MAX_ITERS {
        let scale = (c.abs() + d.abs()) / T::lit(2.0);
        if b - a <= rel_tol * scale || b - a <= abs_floor {
            converged = true;
            break;
        }
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mut best = (c, fc);
    for (x, fx) in [(d, fd), (a, f(a)), (b, f(b)), (lo0, f(lo0)), (hi0, f(hi0))] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    SolveReport::scalar(best.0, best.1, iterations, converged, true)
}

/// Result of maximizing a concave function along a line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMax<T> {
    pub point: T,
    pub value: T,
    /// False when the objective kept increasing through every bracket expansion.
    pub bounded: bool,
    /// False when the supremum is a limit at infinity (expansion stalled).
    pub attained: bool,
}

enum Side<T> {
    Bracket(T, T),
    Stalled(T, T),
    Unbounded,
}

/// Maximizes a concave `h` over the real line starting from `x0`.
///
/// A bracket of half-width `width` is expanded by factor 4 (at most 200 times) in
/// the ascending direction. If an expansion improves by less than `1e-12` relative,
/// the supremum is taken as a limit at infinity. An edge that is still ascending
/// after the cap reports an unbounded objective.
pub fn line_max<T: Scalar>(h: impl Fn(T) -> T, x0: T, width: T, rel_tol: T) -> LineMax<T> {
    let h0 = h(x0);
    let hr = h(x0 + width);
    let hl = h(x0 - width);
    let side = if hr > h0 {
        expand_side(&h, x0, width, h0, hr, T::one())
    } else if hl > h0 {
        expand_side(&h, x0, width, h0, hl, -T::one())
    } else {
        Side::Bracket(x0 - width, x0 + width)
    };
    let (lo, hi) = match side {
        Side::Bracket(lo, hi) => (lo, hi),
        Side::Stalled(point, value) => {
            return LineMax {
                point,
                value,
                bounded: true,
                attained: false,
            }
        }
        Side::Unbounded => {
            return LineMax {
                point: x0,
                value: T::infinity(),
                bounded: false,
                attained: false,
            }
        }
    };
    // Shift so the bracket starts at zero; golden_min's tolerance is relative to hi.
    let span = hi - lo;
    let rep = golden_min(|s| -h(lo + s), T::zero(), span, rel_tol, None);
    let mut best = (lo + rep.arg(), -rep.value);
    if h0 > best.1 {
        best = (x0, h0);
    }
    LineMax {
        point: best.0,
        value: best.1,
        bounded: true,
        attained: true,
    }
}

fn expand_side<T: Scalar>(h: &impl Fn(T) -> T, x0: T, width: T, h0: T, h1: T, dir: T) -> Side<T> {
    let stall = T::lit(1e-12);
    let mut prev = (x0, h0);
    let mut cur = (x0 + dir * width, h1);
    let mut step = width;
    for _ in 0..200 {
        step *= T::lit(4.0);
        let nx = x0 + dir * step;
        if !nx.is_finite() {
            return Side::Unbounded;
        }
        let nh = h(nx);
        if !(nh > cur.1) {
            let (a, b) = (prev.0, nx);
            return if a < b {
                Side::Bracket(a, b)
            } else {
                Side::Bracket(b, a)
            };
        }
        if nh - cur.1 <= stall * T::one().max(nh.abs()) {
            return Side::Stalled(nx, nh);
        }
        prev = cur;
        cur = (nx, nh);
    }
    Side::Unbounded
}

/// Result of [`coordinate_max`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMax<T> {
    pub point: Vec<T>,
    /// `+∞` when some coordinate line is unbounded.
    pub value: T,
    pub sweeps: usize,
    pub converged: bool,
}

/// Maximizes a concave `g: R^n → R` by cyclic coordinate ascent from `start`.
///
/// Each coordinate is optimized with [`line_max`]. Sweeps stop once a full sweep
/// improves the value by at most `rel_tol * max(1, |g|)`, or after `max_sweeps`.
pub fn coordinate_max<T: Scalar>(
    g: impl Fn(&[T]) -> T,
    start: Vec<T>,
    rel_tol: T,
    max_sweeps: usize,
) -> CoordinateMax<T> {
    let mut x = start;
    let mut val = g(&x);
    let line_tol = T::tol(1e-9);
    for sweep in 0..max_sweeps {
        let before = val;
        for i in 0..x.len() {
            let xi = x[i];
            let probe = std::cell::RefCell::new(x.clone());
            let lm = line_max(
                |t| {
                    probe.borrow_mut()[i] = t;
                    g(&probe.borrow())
                },
                xi,
                T::one().max(xi.abs()),
                line_tol,
            );
            if !lm.bounded {
                x[i] = lm.point;
                return CoordinateMax {
                    point: x,
                    value: T::infinity(),
                    sweeps: sweep + 1,
                    converged: true,
                };
            }
            if lm.value > val {
                x[i] = lm.point;
                val = lm.value;
            }
        }
        if val - before <= rel_tol * T::one().max(val.abs()) {
            return CoordinateMax {
                point: x,
                value: val,
                sweeps: sweep + 1,
                converged: true,
            };
        }
    }
    CoordinateMax {
        point: x,
        value: val,
        sweeps: max_sweeps,
        converged: false,
    }
}

/// Concave objective over the weighted simplex `{q >= 0, Σ w_i q_i = 1}`.
pub trait SimplexObjective<T> {
    /// `-∞` marks an infeasible point.
    fn value(&self, q: &[T]) -> T;

    /// Gradient in the `w`-weighted inner product, i.e. `(∂g/∂q_i) / w_i`.
    fn gradient(&self, q: &[T]) -> Vec<T>;
}

/// A [`SimplexObjective`] from a pair of closures.
pub struct FnObjective<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<T, V, G> SimplexObjective<T> for FnObjective<V, G>
where
    V: Fn(&[T]) -> T,
    G: Fn(&[T]) -> Vec<T>,
{
    fn value(&self, q: &[T]) -> T {
        (self.value)(q)
    }

    fn gradient(&self, q: &[T]) -> Vec<T> {
        (self.gradient)(q)
    }
}

/// Wraps a value-only objective with a finite-difference weighted gradient.
pub struct NumericGradient<'w, V, T> {
    pub value: V,
    pub weights: &'w [T],
    pub step: T,
}

impl<T: Scalar, V: Fn(&[T]) -> T> SimplexObjective<T> for NumericGradient<'_, V, T> {
    fn value(&self, q: &[T]) -> T {
        (self.value)(q)
    }

    fn gradient(&self, q: &[T]) -> Vec<T> {
        let mut probe = q.to_vec();
        let f0 = (self.value)(q);
        (0..q.len())
            .map(|i| {
                let h = self.step * T::one().max(q[i].abs());
                probe[i] = q[i] + h;
                let up = (self.value)(&probe);
                let d = if q[i] >= h {
                    probe[i] = q[i] - h;
                    let down = (self.value)(&probe);
                    (up - down) / (h + h)
                } else {
                    (up - f0) / h
                };
                probe[i] = q[i];
                let d = if d.is_finite() { d } else { T::zero() };
                d / self.weights[i]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions<T> {
    pub rel_tol: T,
    pub max_iter: usize,
    pub armijo: T,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::tol(1e-10),
            max_iter: 100_000,
            armijo: T::lit(1e-4),
        }
    }
}

/// `simplex_max` ran out of iterations; `best` is the last accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct NotConverged<T> {
    pub best: SolveReport<T>,
}

impl<T: Scalar> From<NotConverged<T>> for Error {
    fn from(e: NotConverged<T>) -> Self {
        Error::Convergence {
            iterations: e.best.iterations,
            best_value: e.best.value.to_f64_lossy(),
        }
    }
}

/// Euclidean projection in the `w`-weighted metric onto `{q >= 0, Σ w_i q_i = 1}`.
///
/// In that metric the projection is a uniform shift followed by clipping,
/// `q_i = max(v_i - θ, 0)`, and `θ` is found exactly after sorting `v`.
pub fn project_weighted_simplex<T: Scalar>(v: &[T], w: &[T]) -> Vec<T> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));
    let mut wsum = T::zero();
    let mut wvsum = T::zero();
    let mut theta = T::zero();
    // The active set is a prefix of the sorted order: keep the last θ_k with v_(k) > θ_k.
    for &i in &order {
        wsum += w[i];
        wvsum += w[i] * v[i];
        let t = (wvsum - T::one()) / wsum;
        if v[i] > t {
            theta = t;
        }
    }
    let mut q: Vec<T> = v.iter().map(|&vi| (vi - theta).max(T::zero())).collect();
    // Renormalize to absorb rounding in θ.
    let mass: T = q.iter().zip(w).map(|(&qi, &wi)| qi * wi).sum();
    if mass > T::zero() {
        for qi in &mut q {
            *qi /= mass;
        }
    }
    q
}

fn w_dot<T: Scalar>(a: &[T], b: &[T], w: &[T]) -> T {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((&x, &y), &wi)| wi * x * y)
        .sum()
}

/// Maximizes a concave objective over the weighted simplex by projected gradient
/// ascent.
///
/// Each step backtracks from a trial step (halving, Armijo constant `armijo`); the
/// trial step is 1 on the first iteration and the Barzilai–Borwein step afterwards.
/// Points where the objective is `-∞` are rejected by the line search. Iteration
/// stops once the projected unit step moves less than `rel_tol` in sup norm, or once
/// the Frank–Wolfe gap `max_i g_i - Σ w q g` is at round-off level. If the line search
/// stalls first, the last iterate is returned with `converged = false`.
pub fn simplex_max<T: Scalar, G: SimplexObjective<T> + ?Sized>(
    objective: &G,
    weights: &[T],
    start: Option<&[T]>,
    opts: &SimplexOptions<T>,
) -> std::result::Result<SolveReport<T>, NotConverged<T>> {
    let n = weights.len();
    let mut q = match start {
        Some(s) => project_weighted_simplex(s, weights),
        None => vec![T::one(); n],
    };
    let mut val = objective.value(&q);
    let mut grad = objective.gradient(&q);
    let mut trial = T::one();
    let tiny = T::lit(1e-12);
    for it in 0..opts.max_iter {
        if done(&q, &grad, weights, val, opts.rel_tol) {
            return Ok(finish(q, val, it, true));
        }
        let mut t = trial;
        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<T> = q.iter().zip(&grad).map(|(&a, &g)| a + t * g).collect();
            let q_new = project_weighted_simplex(&cand, weights);
            let d: Vec<T> = q_new.iter().zip(&q).map(|(&a, &b)| a - b).collect();
            let v_new = objective.value(&q_new);
            if accept_step(
                objective,
                val,
                &grad,
                &q_new,
                v_new,
                &d,
                weights,
                opts.armijo,
            ) {
                accepted = Some((q_new, v_new, d));
                break;
            }
            t /= T::lit(2.0);
        }
        let Some((q_new, v_new, s)) = accepted else {
            // Stalled at working precision before the stationarity test passed.
            return Ok(finish(q, val, it, false));
        };
        let g_new = objective.gradient(&q_new);
        let y: Vec<T> = g_new.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let ss = w_dot(&s, &s, weights);
        let sy = w_dot(&s, &y, weights);
        trial = if sy < T::zero() {
            (ss / -sy).max(tiny).min(T::lit(1e10))
        } else {
            (t + t).min(T::lit(1e10))
        };
        let moved = s.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        q = q_new;
        val = v_new;
        grad = g_new;
        if moved == T::zero() {
            let c = done(&q, &grad, weights, val, opts.rel_tol);
            return Ok(finish(q, val, it + 1, c));
        }
    }
    Err(NotConverged {
        best: finish(q, val, opts.max_iter, false),
    })
}

/// Armijo test, plus an approximate version for steps whose value change is at
/// round-off level: there the step is accepted if the directional derivative at the
/// new point shows it has not overshot the maximum along `d`.
#[allow(clippy::too_many_arguments)]
fn accept_step<T: Scalar, G: SimplexObjective<T> + ?Sized>(
    objective: &G,
    val: T,
    grad: &[T],
    q_new: &[T],
    v_new: T,
    d: &[T],
    weights: &[T],
    armijo: T,
) -> bool {
    if !v_new.is_finite() {
        return false;
    }
    let d0 = centered_dot(grad, d, weights);
    if v_new >= val + armijo * d0 {
        return true;
    }
    if !(d0 > T::zero()) || v_new < val - round_off(val) {
        return false;
    }
    // Overshooting by more than half the distance to the line maximum is refused,
    // which keeps near-optimal iterations contracting.
    let dn = centered_dot(&objective.gradient(q_new), d, weights);
    dn >= -T::lit(0.5) * d0
}

/// `max_i g_i - Σ w q g`, an upper bound on `max g - g(q)` for concave `g`.
fn frank_wolfe_gap<T: Scalar>(q: &[T], grad: &[T], weights: &[T]) -> T {
    let top = grad.iter().fold(T::neg_infinity(), |m, &g| m.max(g));
    top - w_dot(grad, q, weights)
}

/// Stationary in the projected-step sense, or optimal to working precision in value.
fn done<T: Scalar>(q: &[T], grad: &[T], weights: &[T], val: T, rel_tol: T) -> bool {
    stationarity(q, grad, weights) <= rel_tol || frank_wolfe_gap(q, grad, weights) <= round_off(val)
}

fn round_off<T: Scalar>(val: T) -> T {
    T::lit(1e3) * T::epsilon() * (val.abs() + T::one())
}

/// `<g, d>_w` for a direction with `Σ w d = 0`. Shifting `g` by its maximum leaves the
/// exact value unchanged and avoids cancellation when `g` has a large common offset.
fn centered_dot<T: Scalar>(g: &[T], d: &[T], weights: &[T]) -> T {
    let top = g.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    g.iter()
        .zip(d)
        .zip(weights)
        .map(|((&gi, &di), &wi)| wi * (gi - top) * di)
        .sum()
}

/// Sup-norm length of the projected unit gradient step.
fn stationarity<T: Scalar>(q: &[T], grad: &[T], weights: &[T]) -> T {
    let unit: Vec<T> = q.iter().zip(grad).map(|(&a, &g)| a + g).collect();
    project_weighted_simplex(&unit, weights)
        .iter()
        .zip(q)
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

/// Exponentiated-gradient ascent over `{q >= 0, Σ w_i q_i = 1}`:
/// `q_i ← q_i e^{t g_i} / Σ_j w_j q_j e^{t g_j}` with Armijo backtracking on `t`.
///
/// Iterates stay strictly positive, so this suits objectives whose curvature blows up
/// near the boundary (entropy-type penalties), where [`simplex_max`] can stall. The
/// start must be strictly positive; the default is `q = 1`. Stops on the same
/// stationarity test as [`simplex_max`].
pub fn simplex_mirror_max<T: Scalar, G: SimplexObjective<T> + ?Sized>(
    objective: &G,
    weights: &[T],
    start: Option<&[T]>,
    opts: &SimplexOptions<T>,
) -> std::result::Result<SolveReport<T>, NotConverged<T>> {
    let n = weights.len();
    let mut q = match start {
        Some(s) => {
            let z = w_dot(s, &vec![T::one(); n], weights);
            s.iter().map(|&v| v / z).collect()
        }
        None => vec![T::one(); n],
    };
    let mut val = objective.value(&q);
    let mut grad = objective.gradient(&q);
    let mut t = T::one();
    for it in 0..opts.max_iter {
        if done(&q, &grad, weights, val, opts.rel_tol) {
            return Ok(finish(q, val, it, true));
        }
        let top = grad.iter().fold(T::neg_infinity(), |m, &g| m.max(g));
        let mut accepted = None;
        for _ in 0..80 {
            let raw: Vec<T> = q
                .iter()
                .zip(&grad)
                .map(|(&a, &g)| a * (t * (g - top)).exp())
                .collect();
            let z = w_dot(&raw, &vec![T::one(); n], weights);
            let q_new: Vec<T> = raw.iter().map(|&v| v / z).collect();
            let d: Vec<T> = q_new.iter().zip(&q).map(|(&a, &b)| a - b).collect();
            let v_new = objective.value(&q_new);
            if accept_step(
                objective,
                val,
                &grad,
                &q_new,
                v_new,
                &d,
                weights,
                opts.armijo,
            ) {
                accepted = Some((q_new, v_new, d));
                break;
            }
            t /= T::lit(2.0);
        }
        let Some((q_new, v_new, d)) = accepted else {
            return Ok(finish(q, val, it, false));
        };
        let moved = d.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        q = q_new;
        val = v_new;
        grad = objective.gradient(&q);
        t = (t + t).min(T::lit(1e10));
        if moved == T::zero() {
            let c = done(&q, &grad, weights, val, opts.rel_tol);
            return Ok(finish(q, val, it + 1, c));
        }
    }
    Err(NotConverged {
        best: finish(q, val, opts.max_iter, false),
    })
}

fn finish<T: Scalar>(q: Vec<T>, value: T, iterations: usize, converged: bool) -> SolveReport<T> {
    SolveReport {
        point: q,
        value,
        iterations,
        converged,
        attained: true,
    }
}
