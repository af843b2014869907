//! Floating-point scalar abstraction: `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Scalar type the numeric core is generic over.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (exact for `f64`, rounded for `f32`).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to scalar")
    }

    /// Parse the scalar from its `Display` form; round-trip exact.
    fn parse_exact(s: &str) -> Option<Self>;
}

impl Scalar for f32 {
    fn parse_exact(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Scalar for f64 {
    fn parse_exact(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

/// Probability clamp applied to classifier outputs and products before logs.
pub fn prob_eps<S: Scalar>() -> S {
    S::from_f64_lossy(1e-7)
}

/// Clamp a probability to the open interval `(eps, 1 - eps)`.
///
/// NaN passes through so that a poisoned forward pass surfaces as a NaN
/// loss instead of a silently clamped value.
pub fn clamp_prob<S: Scalar>(p: S) -> S {
    if p.is_nan() {
        return p;
    }
    let eps = prob_eps::<S>();
    p.max(eps).min(S::one() - eps)
}

/// Logistic function `1 / (1 + exp(-z))`.
pub fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}
