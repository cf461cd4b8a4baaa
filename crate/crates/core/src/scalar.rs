//! Scalar abstraction for objective values.
//!
//! Every numeric kernel (surrogates, correlation, pruning, variograms,
//! optimizers) is generic over [`Scalar`], implemented for `f32` and `f64`.
//! File formats and process I/O are pinned to `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::infinity)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Mean clamped to the input range, so constant inputs come back exactly.
pub(crate) fn stable_mean<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut sum = T::zero();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    let mut n = 0usize;
    for v in values {
        n += 1;
        sum = sum + v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (n > 0).then(|| (sum / T::of_usize(n)).max(lo).min(hi))
}
