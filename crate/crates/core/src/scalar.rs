//! Scalar abstraction for the numerical kernels.
//!
//! Everything in the math core is generic over [`Real`], so the same code
//! runs at `f32` or `f64` precision. Concrete aliases for the common `f64`
//! instantiation live at the crate root.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric kernels are generic over.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync {
    /// Convert an `f64` literal into the scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal must be representable")
    }

    /// Lossy view as `f64`, for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }

    fn inf() -> Self {
        Self::lit(f64::INFINITY)
    }
}

/// Modulus of a complex number over a [`Real`] scalar.
pub(crate) fn complex_abs<F: Real>(z: &nalgebra::Complex<F>) -> F {
    (z.re * z.re + z.im * z.im).sqrt()
}

impl Real for f32 {}
impl Real for f64 {}

/// Stable logistic `1 / (1 + e^-z)`.
pub(crate) fn logistic<F: Real>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Stable logistic derivative `s (1 - s)` where `s = logistic(z)`.
pub(crate) fn logistic_prime<F: Real>(z: F) -> F {
    let e = (-z.abs()).exp();
    let denom = F::one() + e;
    e / (denom * denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_extremes() {
        assert_eq!(logistic(0.0_f64), 0.5);
        assert!(logistic(800.0_f64) == 1.0);
        assert!(logistic(-800.0_f64) == 0.0);
        assert!(logistic_prime(-800.0_f64) == 0.0);
        let z = 0.3_f64;
        let s = logistic(z);
        assert!((logistic_prime(z) - s * (1.0 - s)).abs() < 1e-15);
    }

    #[test]
    fn works_at_f32() {
        let s: f32 = logistic(0.0);
        assert_eq!(s, 0.5);
    }
}
