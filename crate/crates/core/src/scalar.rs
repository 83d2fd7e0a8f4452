//! Scalar abstraction for the numeric core.
//!
//! All chain and HMM arithmetic is generic over a floating-point scalar so
//! the same code runs at `f32` or `f64` precision. Concrete aliases for the
//! common `f64` instantiation live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant must convert to scalar")
    }

    /// Lossless-enough round trip to `f64` for I/O and diagnostics.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// `base^exp` for nonnegative integer exponents, with `0^0 = 1`.
///
/// Matches the combinatorial reading of the transition-matrix products where
/// a factor with exponent zero is simply absent.
pub fn powi0<T: Scalar>(base: T, exp: usize) -> T {
    if exp == 0 {
        T::one()
    } else {
        base.powi(exp as i32)
    }
}

/// `base^exp` together with its derivative `exp * base^(exp-1)`.
///
/// The exponent-zero case returns `(1, 0)` so callers never evaluate a
/// negative power of a possibly-zero base.
pub fn powi0_d<T: Scalar>(base: T, exp: usize) -> (T, T) {
    match exp {
        0 => (T::one(), T::zero()),
        1 => (base, T::one()),
        _ => {
            let lower = base.powi(exp as i32 - 1);
            (lower * base, T::from_usize(exp).unwrap() * lower)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_to_the_zero_is_one() {
        assert_eq!(powi0(0.0f64, 0), 1.0);
        assert_eq!(powi0(0.0f32, 0), 1.0);
        assert_eq!(powi0(0.0f64, 3), 0.0);
    }

    #[test]
    fn power_derivative_pairs() {
        let (p, d) = powi0_d(0.5f64, 3);
        assert!((p - 0.125).abs() < 1e-15);
        assert!((d - 0.75).abs() < 1e-15);
        let (p, d) = powi0_d(0.0f64, 1);
        assert_eq!(p, 0.0);
        assert_eq!(d, 1.0);
        let (p, d) = powi0_d(0.0f64, 0);
        assert_eq!(p, 1.0);
        assert_eq!(d, 0.0);
    }
}
