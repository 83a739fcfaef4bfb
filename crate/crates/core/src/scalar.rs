//! Floating-point abstraction used by the occupancy model and the estimator.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Real scalar the likelihood, gradient and optimizer are written against.
///
/// Implemented for `f32` and `f64`. Everything in the crate that carries
/// probabilities or unconstrained coordinates is generic over it.
pub trait Scalar: Float + FromPrimitive + Debug + Default + Sum + Send + Sync + 'static {
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Default + Sum + Send + Sync + 'static {}

/// Numerically stable `ln(sum(exp(x)))`; `-inf` when every term is `-inf`.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Logistic function `1 / (1 + exp(-x))`, evaluated without overflow.
#[inline]
pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn logit<T: Scalar>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

/// `ln(logistic(x))` without cancellation.
#[inline]
pub(crate) fn ln_logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
