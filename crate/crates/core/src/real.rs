//! Scalar abstraction shared by the analytic parts of the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar (`f32` or `f64`) with the special functions the
/// kernels and constants need.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// `ln Γ(x)` for `x > 0`.
    fn ln_gamma(self) -> Self;

    /// Error function.
    fn erf(self) -> Self;

    /// Literal conversion; every `f64` constant used in this crate is
    /// representable (possibly rounded) in both supported scalars.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f64 {
    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgamma(self)
    }

    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
}

impl Real for f32 {
    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgammaf(self)
    }

    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

/// `Γ(x)` for `x > 0`, through `ln Γ`.
#[inline]
pub fn gamma<T: Real>(x: T) -> T {
    x.ln_gamma().exp()
}

/// `ln B(a, b)` for `a, b > 0`.
#[inline]
pub fn ln_beta<T: Real>(a: T, b: T) -> T {
    a.ln_gamma() + b.ln_gamma() - (a + b).ln_gamma()
}

/// Beta function `B(a, b)`.
#[inline]
pub fn beta<T: Real>(a: T, b: T) -> T {
    ln_beta(a, b).exp()
}

/// `ln n!`.
#[inline]
pub fn ln_factorial<T: Real>(n: usize) -> T {
    (T::from_usize_lossy(n) + T::one()).ln_gamma()
}

/// Binomial coefficient as a float.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    (ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k))
        .exp()
        .round()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_is_sqrt_pi() {
        assert!((gamma(0.5f64) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!((gamma(0.5f32) - std::f32::consts::PI.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn beta_against_factorials() {
        // B(3, 4) = 2! 3! / 6!
        assert!((beta(3.0f64, 4.0) - 12.0 / 720.0).abs() < 1e-15);
        assert!((beta(0.5f64, 1.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial::<f64>(4, 2), 6.0);
        assert_eq!(binomial::<f64>(6, 3), 20.0);
        assert_eq!(binomial::<f64>(2, 3), 0.0);
    }
}
