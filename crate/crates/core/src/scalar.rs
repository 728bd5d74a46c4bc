//! Scalar abstraction for the numeric core.
//!
//! The Gaussian-process machinery is generic over any IEEE float via
//! [`Scalar`]; the rest of the pipeline uses the crate-level [`crate::Real`]
//! alias.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::float::Float;
use num_traits::NumAssign;

/// Floating-point scalar the numeric core is generic over.
pub trait Scalar:
    Float + NumAssign + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;
}

impl Scalar for f64 {
    fn erfc(self) -> Self {
        statrs::function::erf::erfc(self)
    }
}

impl Scalar for f32 {
    fn erfc(self) -> Self {
        statrs::function::erf::erfc(f64::from(self)) as f32
    }
}

/// Lift an `f64` constant into the scalar type.
#[inline]
pub fn real<F: Scalar>(x: f64) -> F {
    F::from(x).expect("constant must be representable in the scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_matches_known_points() {
        // erfc(0) = 1 exactly; erfc is strictly decreasing.
        assert_eq!(Scalar::erfc(0.0f64), 1.0);
        assert!(Scalar::erfc(1.0f64) < Scalar::erfc(0.5f64));
        assert!((Scalar::erfc(-10.0f64) - 2.0).abs() < 1e-15);
        assert!(Scalar::erfc(10.0f64).abs() < 1e-15);
    }

    #[test]
    fn real_round_trips_for_f32_and_f64() {
        assert_eq!(real::<f64>(0.25), 0.25);
        assert_eq!(real::<f32>(0.25), 0.25f32);
    }
}
