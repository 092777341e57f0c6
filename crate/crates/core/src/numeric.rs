//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Every signal-processing and learning routine in this crate is written
/// against this trait so the same code path serves double-precision
/// simulation and single-precision inference.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + rustfft::FftNum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Infallible for the implemented types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Widens to `f64`.
    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-12) {
        T::one()
    } else {
        let px = T::PI() * x;
        px.sin() / px
    }
}

/// Gaussian tail function `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 0.5]`, by bisection.
pub fn q_inverse(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability out of range");
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[inline]
pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_zero_crossings() {
        assert_eq!(sinc(0.0_f64), 1.0);
        for k in 1..10 {
            assert!(sinc(k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn q_roundtrip() {
        for &p in &[0.1, 1e-3, 2e-4, 1e-6] {
            let x = q_inverse(p);
            assert!((q_function(x) - p).abs() / p < 1e-9);
        }
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let (a, b) = (-1.3_f64, 0.4_f64);
        assert!((log_sum_exp(a, b) - (a.exp() + b.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_sum_exp(f64::NEG_INFINITY, 2.0), 2.0);
    }
}
