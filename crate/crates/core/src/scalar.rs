//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used for color coordinates, distances and statistics.
///
/// Implemented for `f32` and `f64`. The pipeline itself runs in `f64`; the
/// crate-root aliases pin that choice.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Incremental arithmetic mean.
///
/// A sequence of identical values yields that value bit-for-bit, which the
/// cohort reductions rely on.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMean<T> {
    mean: T,
    count: usize,
}

impl<T: Scalar> RunningMean<T> {
    pub fn new() -> Self {
        Self { mean: T::zero(), count: 0 }
    }

    pub fn push(&mut self, value: T) {
        self.count += 1;
        self.mean = self.mean + (value - self.mean) / T::from_count(self.count);
    }

    /// Folds in `weight` observations whose mean is `value`. Adding a value
    /// equal to the current mean leaves the mean bit-identical.
    pub fn push_weighted(&mut self, value: T, weight: usize) {
        if weight == 0 {
            return;
        }
        self.count += weight;
        self.mean = self.mean + (value - self.mean) * (T::from_count(weight) / T::from_count(self.count));
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `None` until at least one value has been pushed.
    pub fn mean(&self) -> Option<T> {
        (self.count > 0).then_some(self.mean)
    }
}

impl<T: Scalar> FromIterator<T> for RunningMean<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = Self::new();
        for v in iter {
            m.push(v);
        }
        m
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean<T: Scalar, const D: usize>(a: &[T; D], b: &[T; D]) -> T {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean<T: Scalar, const D: usize>(a: &[T; D], b: &[T; D]) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}
