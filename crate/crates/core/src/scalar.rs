//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All of the likelihood, quadrature and optimisation code is written against
//! [`Real`], so the same algorithms run in `f64` (the default, and the only
//! precision at which the documented tolerances hold) or in `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Machine epsilon-scaled tolerance floor used by iterative routines.
    const TOL_FLOOR: f64;

    /// Converts an `f64` literal. Infallible for the two implementors.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }

    fn as_f64(self) -> f64;

    /// `ln Γ(x)` for `x > 0`.
    fn lgamma(self) -> Self {
        Self::lit(statrs::function::gamma::ln_gamma(self.as_f64()))
    }

    fn error_function(self) -> Self {
        Self::lit(statrs::function::erf::erf(self.as_f64()))
    }

    /// Standard normal CDF.
    fn norm_cdf(self) -> Self {
        Self::lit(0.5 * statrs::function::erf::erfc(-self.as_f64() / std::f64::consts::SQRT_2))
    }
}

impl Real for f64 {
    const TOL_FLOOR: f64 = 1e-15;

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    const TOL_FLOOR: f64 = 1e-6;

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log Σ exp(x_k)` with a max shift.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Nats to bits.
#[inline]
pub fn to_bits<T: Real>(nats: T) -> T {
    nats / T::LN_2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        let a = 1.3_f64;
        let b = -0.4_f64;
        assert!((log_add_exp(a, b) - (a.exp() + b.exp()).ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert!((log_add_exp(1000.0_f64, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_is_shift_stable() {
        let xs = [-1200.0_f64, -1201.0, -1199.5];
        let direct = -1200.0 + ((0.0f64).exp() + (-1.0f64).exp() + (0.5f64).exp()).ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn f32_special_functions() {
        assert!((2.0_f32.lgamma()).abs() < 1e-6);
        assert!((0.0_f32.norm_cdf() - 0.5).abs() < 1e-7);
        assert!((0.0_f32.error_function()).abs() < 1e-7);
    }
}
