//! Scalar abstraction shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar the library is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// A tolerance no tighter than what the type can resolve.
    ///
    /// `f32` cannot honour `1e-12`; the floor keeps tolerance checks meaningful
    /// without special-casing each call site.
    #[inline]
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(x).max(floor)
    }

    /// Largest representable value strictly below `self` (positive finite input).
    fn prev_down(self) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn prev_down(self) -> Self {
        if self <= 0.0 || !self.is_finite() {
            return self;
        }
        f64::from_bits(self.to_bits() - 1)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn prev_down(self) -> Self {
        if self <= 0.0 || !self.is_finite() {
            return self;
        }
        f32::from_bits(self.to_bits() - 1)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

/// `a <= b` up to a mixed absolute/relative slack.
#[inline]
pub fn le_slack<T: Scalar>(a: T, b: T, tol: T) -> bool {
    if a <= b {
        return true;
    }
    let scale = T::one().max(a.abs()).max(b.abs());
    a - b <= tol * scale
}

/// `|a - b|` scaled by `max(1, |a|, |b|)`; infinite values compare equal only to themselves.
#[inline]
pub fn rel_diff<T: Scalar>(a: T, b: T) -> T {
    if a == b {
        return T::zero();
    }
    if a.is_infinite() || b.is_infinite() {
        return T::infinity();
    }
    (a - b).abs() / T::one().max(a.abs()).max(b.abs())
}
