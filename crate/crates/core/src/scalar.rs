//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All learners, weights, probabilities and error rates are generic over
//! [`Scalar`], which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type usable as feature values, weights and scores.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant must be representable")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count must be representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when checking that a weight vector sums to one.
    ///
    /// `1e-9` for `f64`; proportionally looser for lower precision types.
    fn weight_tolerance() -> Self {
        let scaled = Self::epsilon() * Self::of(1e4);
        scaled.max(Self::of(1e-9))
    }

    /// Relative slack under which two split scores are treated as equal.
    fn tie_tolerance() -> Self {
        Self::epsilon() * Self::of(256.0)
    }

    /// Smallest error rate admitted by the stage-weight formula.
    fn error_floor() -> Self {
        Self::epsilon().max(Self::of(1e-10))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sum with Neumaier compensation; weight vectors are renormalised often
/// enough that naive summation drifts visibly in `f32`.
pub fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut c = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
