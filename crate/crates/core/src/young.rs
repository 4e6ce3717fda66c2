//! Young functions and their conjugates.
//!
//! A Young function is a nondecreasing, left-continuous, convex map
//! `φ: [0, ∞) → [0, ∞]` with `φ(0) = 0`, finite near the origin and tending to
//! infinity. Above `finite_sup` it is `+∞`. The conjugate is
//! `φ*(s) = sup_{t ≥ 0} (s t - φ(t))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solvers::golden_min;

type EvalFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum YoungFamily<T> {
    /// `t^p`, `p >= 1`.
    Power { p: T },
    /// `0` below one, `+∞` from one on.
    Linf,
    /// `e^t - 1`.
    Exp,
    /// Piecewise linear: slope `slopes[k]` between `breaks[k-1]` and `breaks[k]`
    /// (with `breaks[-1] = 0`), `+∞` beyond `cap` when one is given.
    Piecewise {
        breaks: Vec<T>,
        slopes: Vec<T>,
        cap: Option<T>,
    },
    /// Arbitrary user function, trusted only after [`YoungFn::validate`].
    Custom {
        label: String,
        finite_sup: T,
        eval: EvalFn<T>,
    },
}

impl<T: fmt::Debug> fmt::Debug for YoungFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power { p } => f.debug_struct("Power").field("p", p).finish(),
            Self::Linf => f.write_str("Linf"),
            Self::Exp => f.write_str("Exp"),
            Self::Piecewise {
                breaks,
                slopes,
                cap,
            } => f
                .debug_struct("Piecewise")
                .field("breaks", breaks)
                .field("slopes", slopes)
                .field("cap", cap)
                .finish(),
            Self::Custom {
                label, finite_sup, ..
            } => f
                .debug_struct("Custom")
                .field("label", label)
                .field("finite_sup", finite_sup)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct YoungFn<T> {
    family: YoungFamily<T>,
}

const CONJ_REL_TOL: f64 = 1e-10;
const CONJ_EXPANSION: f64 = 4.0;
const CONJ_MAX_EXPANSIONS: usize = 200;

impl<T: Scalar> YoungFn<T> {
    pub fn power(p: T) -> Result<Self> {
        if !(p >= T::one()) || !p.is_finite() {
            return Err(Error::Parameter(format!(
                "power Young function needs finite p >= 1, got {p}"
            )));
        }
        Ok(Self {
            family: YoungFamily::Power { p },
        })
    }

    pub fn linf() -> Self {
        Self {
            family: YoungFamily::Linf,
        }
    }

    pub fn exp() -> Self {
        Self {
            family: YoungFamily::Exp,
        }
    }

    /// `slopes` must be nonnegative and nondecreasing with one more entry than
    /// `breaks`; `breaks` strictly increasing and positive. Without a cap the last
    /// slope must be positive so that `φ` diverges.
    pub fn piecewise(breaks: Vec<T>, slopes: Vec<T>, cap: Option<T>) -> Result<Self> {
        if slopes.len() != breaks.len() + 1 {
            return Err(Error::Parameter(format!(
                "piecewise Young function needs {} slopes for {} breaks, got {}",
                breaks.len() + 1,
                breaks.len(),
                slopes.len()
            )));
        }
        if breaks.iter().any(|b| !(*b > T::zero()) || !b.is_finite())
            || breaks.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Parameter(
                "piecewise breaks must be positive, finite and strictly increasing".into(),
            ));
        }
        if slopes.iter().any(|s| !(*s >= T::zero()) || !s.is_finite())
            || slopes.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Parameter(
                "piecewise slopes must be nonnegative, finite and nondecreasing".into(),
            ));
        }
        match cap {
            Some(c) if !(c > T::zero()) || !c.is_finite() => {
                return Err(Error::Parameter(format!(
                    "piecewise cap must be positive and finite, got {c}"
                )))
            }
            None if *slopes.last().unwrap() <= T::zero() => {
                return Err(Error::Parameter(
                    "piecewise Young function without cap needs a positive last slope".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            family: YoungFamily::Piecewise {
                breaks,
                slopes,
                cap,
            },
        })
    }

    /// A user-supplied function, `+∞` above `finite_sup`.
    pub fn custom(
        label: impl Into<String>,
        finite_sup: T,
        eval: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            family: YoungFamily::Custom {
                label: label.into(),
                finite_sup,
                eval: Arc::new(eval),
            },
        }
    }

    pub fn family(&self) -> &YoungFamily<T> {
        &self.family
    }

    pub fn family_tag(&self) -> String {
        match &self.family {
            YoungFamily::Power { p } => format!("power-{p}"),
            YoungFamily::Linf => "linf".into(),
            YoungFamily::Exp => "entropic-exponential".into(),
            YoungFamily::Piecewise { .. } => "custom-piecewise".into(),
            YoungFamily::Custom { label, .. } => label.clone(),
        }
    }

    /// Supremum of the points where `φ` is finite.
    pub fn finite_sup(&self) -> T {
        match &self.family {
            YoungFamily::Power { .. } | YoungFamily::Exp => T::infinity(),
            YoungFamily::Linf => T::one(),
            YoungFamily::Piecewise { cap, .. } => cap.unwrap_or_else(T::infinity),
            YoungFamily::Custom { finite_sup, .. } => *finite_sup,
        }
    }

    /// `φ(t)` for `t >= 0`.
    pub fn eval(&self, t: T) -> T {
        debug_assert!(t >= T::zero(), "Young functions live on [0, ∞)");
        match &self.family {
            YoungFamily::Power { p } => t.powf(*p),
            YoungFamily::Linf => {
                if t < T::one() {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            YoungFamily::Exp => t.exp_m1(),
            YoungFamily::Piecewise {
                breaks,
                slopes,
                cap,
            } => {
                if cap.is_some_and(|c| t > c) {
                    return T::infinity();
                }
                let mut acc = T::zero();
                let mut left = T::zero();
                for (k, &s) in slopes.iter().enumerate() {
                    let right = breaks.get(k).copied().unwrap_or_else(T::infinity);
                    if t <= right {
                        return acc + s * (t - left);
                    }
                    acc += s * (right - left);
                    left = right;
                }
                acc
            }
            YoungFamily::Custom {
                finite_sup, eval, ..
            } => {
                if t > *finite_sup {
                    T::infinity()
                } else {
                    eval(t)
                }
            }
        }
    }

    /// Closed-form conjugate, when the family has one.
    pub fn conjugate_closed_form(&self, s: T) -> Option<T> {
        match &self.family {
            YoungFamily::Power { p } => {
                let p = *p;
                if p == T::one() {
                    Some(if s <= T::one() {
                        T::zero()
                    } else {
                        T::infinity()
                    })
                } else {
                    Some((p - T::one()) * (s / p).powf(p / (p - T::one())))
                }
            }
            YoungFamily::Linf => Some(s),
            YoungFamily::Exp => Some(if s <= T::one() {
                T::zero()
            } else {
                s * s.ln() - s + T::one()
            }),
            YoungFamily::Piecewise { .. } | YoungFamily::Custom { .. } => None,
        }
    }

    /// `φ*(s)`: closed form when available, numeric otherwise.
    pub fn conjugate(&self, s: T) -> T {
        self.conjugate_closed_form(s)
            .unwrap_or_else(|| self.conjugate_numeric(s))
    }

    /// Numeric `sup_{t ≥ 0} (s t - φ(t))`.
    ///
    /// The concave objective is maximized by golden section on `[0, finite_sup]`
    /// (the left limit when `φ(finite_sup) = ∞`). With no finite bound the right edge
    /// is pushed out by a factor of 4 while the objective still increases; an edge
    /// still ascending after 200 expansions means the supremum is `+∞`.
    pub fn conjugate_numeric(&self, s: T) -> T {
        debug_assert!(s >= T::zero());
        let g = |t: T| s * t - self.eval(t);
        let neg = |t: T| -g(t);
        let tol = T::tol(CONJ_REL_TOL);
        let sup = self.finite_sup();
        let hi = if sup.is_finite() {
            if self.eval(sup).is_finite() {
                sup
            } else {
                sup.prev_down()
            }
        } else {
            let factor = T::lit(CONJ_EXPANSION);
            let mut hi = T::one();
            let mut g_hi = g(hi);
            if g_hi > T::zero() {
                let mut count = 0;
                loop {
                    let next = hi * factor;
                    let g_next = g(next);
                    if !(g_next > g_hi) {
                        hi = next;
                        break;
                    }
                    count += 1;
                    if count == CONJ_MAX_EXPANSIONS || !next.is_finite() {
                        return T::infinity();
                    }
                    hi = next;
                    g_hi = g_next;
                }
            }
            hi
        };
        let rep = golden_min(neg, T::zero(), hi, tol, None);
        (-rep.value).max(T::zero())
    }

    /// Points `t0 <= t1` with `φ(t0) <= 1 <= φ(t1)`.
    pub fn unit_level_bracket(&self) -> (T, T) {
        let two = T::lit(2.0);
        let mut t0 = T::one();
        for _ in 0..2000 {
            if self.eval(t0) <= T::one() {
                break;
            }
            t0 /= two;
        }
        let mut t1 = T::one();
        for _ in 0..2000 {
            if self.eval(t1) >= T::one() {
                break;
            }
            t1 *= two;
        }
        (t0, t1)
    }

    /// Checks the defining properties on a geometric grid of `points` samples over
    /// the open finite domain, capped at `1e6`.
    ///
    /// Left-continuity at `finite_sup` is not observable from samples and is not
    /// checked.
    pub fn validate(&self, points: usize) -> ValidationReport<T> {
        let points = points.max(3);
        let at0 = self.eval(T::zero());
        if at0 != T::zero() {
            return ValidationReport::fail(Violation::Origin { value: at0 }, 0);
        }
        let sup = self.finite_sup();
        let cap = T::lit(1e6);
        let top = if sup <= cap { sup.prev_down() } else { cap };
        let bottom = top * T::lit(1e-9);
        let ratio = (top / bottom).powf(T::one() / T::from_usize(points - 1).unwrap());
        let mut grid = Vec::with_capacity(points + 1);
        grid.push(T::zero());
        let mut t = bottom;
        for _ in 0..points {
            grid.push(t.min(top));
            t *= ratio;
        }
        let vals: Vec<T> = grid.iter().map(|&t| self.eval(t)).collect();
        if !vals[1].is_finite() {
            return ValidationReport::fail(Violation::NotFiniteNearZero { t: grid[1] }, 1);
        }
        let slack = |v: T| T::tol(1e-12) * T::one().max(v.abs());
        for i in 1..grid.len() {
            if vals[i] < vals[i - 1] - slack(vals[i - 1]) {
                return ValidationReport::fail(
                    Violation::Decreasing {
                        a: grid[i - 1],
                        b: grid[i],
                        fa: vals[i - 1],
                        fb: vals[i],
                    },
                    i,
                );
            }
        }
        let mut checked = grid.len();
        let two = T::lit(2.0);
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                if !vals[j].is_finite() {
                    continue;
                }
                let (a, b) = (grid[i], grid[j]);
                let mid = (a + b) / two;
                let f_mid = self.eval(mid);
                let chord = (vals[i] + vals[j]) / two;
                checked += 1;
                if f_mid > chord + slack(chord) {
                    return ValidationReport::fail(
                        Violation::NotConvex {
                            a,
                            mid,
                            b,
                            fa: vals[i],
                            fmid: f_mid,
                            fb: vals[j],
                        },
                        checked,
                    );
                }
            }
        }
        let mut probe = T::one();
        let mut last = self.eval(probe);
        while probe.is_finite() {
            last = self.eval(probe);
            if last > cap {
                return ValidationReport {
                    passed: true,
                    violation: None,
                    points_checked: checked,
                };
            }
            probe *= two;
        }
        ValidationReport::fail(
            Violation::NoDivergence {
                largest_probe: T::max_value(),
                value: last,
            },
            checked,
        )
    }
}

/// First property violation found by [`YoungFn::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation<T> {
    Origin {
        value: T,
    },
    NotFiniteNearZero {
        t: T,
    },
    Decreasing {
        a: T,
        b: T,
        fa: T,
        fb: T,
    },
    NotConvex {
        a: T,
        mid: T,
        b: T,
        fa: T,
        fmid: T,
        fb: T,
    },
    NoDivergence {
        largest_probe: T,
        value: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    pub passed: bool,
    pub violation: Option<Violation<T>>,
    pub points_checked: usize,
}

impl<T> ValidationReport<T> {
    fn fail(v: Violation<T>, points_checked: usize) -> Self {
        Self {
            passed: false,
            violation: Some(v),
            points_checked,
        }
    }
}
