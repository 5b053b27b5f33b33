//! Floating-point scalar abstraction shared by the numerical modules.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type used by the spectral and finite-dimensional machinery.
///
/// Implemented for `f32` and `f64`. Tolerances are expressed in `f64` and
/// widened to the machine precision of the concrete type via [`Scalar::tol`].
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + std::fmt::Display + 'static
{
    /// Unit roundoff of the type.
    const EPS: f64;

    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite scalar")
    }

    /// `requested`, raised to a small multiple of the unit roundoff when the
    /// type cannot resolve it.
    fn tol(requested: f64) -> Self {
        Self::lit(requested.max(64.0 * Self::EPS))
    }

    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Scalar for f64 {
    const EPS: f64 = f64::EPSILON;
}

impl Scalar for f32 {
    const EPS: f64 = f32::EPSILON as f64;
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub(crate) fn weighted_norm<T: Scalar>(v: &[T], weights: &[T]) -> T {
    v.iter()
        .zip(weights)
        .fold(T::zero(), |acc, (&x, &w)| acc + w * x * x)
        .sqrt()
}

pub(crate) fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_widens_for_single_precision() {
        assert_eq!(<f64 as Scalar>::tol(1e-10), 1e-10);
        assert!(<f32 as Scalar>::tol(1e-10) > 1e-6);
    }

    #[test]
    fn norms() {
        assert_eq!(norm(&[3.0f64, 4.0]), 5.0);
        assert_eq!(weighted_norm(&[1.0f64, 1.0], &[3.0, 1.0]), 2.0);
        assert_eq!(dist(&[1.0f32, 1.0], &[4.0, 5.0]), 5.0);
    }
}
