//! Numeric trait bound shared by every generic kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable by the model: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when checking that probability vectors sum to one.
    #[inline]
    fn stochastic_tol() -> Self {
        Self::lit(1e-9).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable `ln Σ exp(x_i)`; returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Scalar>(values: impl IntoIterator<Item = T> + Clone) -> T {
    let max = values
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |m, v| if v > m { v } else { m });
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Index of the maximum; the lowest index wins ties.
pub fn argmax_low<T: Scalar>(values: impl IntoIterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v || (i == 0 && v == best_v) {
            best = i;
            best_v = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let v = [0.1f64, -2.0, 3.5];
        let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(v.iter().copied()) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn argmax_prefers_lower_index() {
        assert_eq!(argmax_low([1.0f64, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_low([f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
    }
}
