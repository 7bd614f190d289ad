//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type the solver is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant, panicking only for values the type cannot represent at all.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm.
pub fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Maximum absolute entry; zero for an empty slice.
pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Euclidean distance between two equally sized vectors.
pub fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Signed power `x·|x|^(p−1)`.
pub fn signed_pow<T: Scalar>(x: T, p: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * x.abs().powf(p - T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        assert_eq!(norm2(&[3.0f64, 4.0]), 5.0);
        assert_eq!(norm_inf(&[-7.0f32, 4.0]), 7.0);
        assert_eq!(dist2(&[1.0f64, 0.0], &[0.0, 0.0]), 1.0);
        assert_eq!(dist2(&[2.0f64, 5.0], &[2.0, 5.0]), 0.0);
    }

    #[test]
    fn signed_pow_is_odd() {
        assert_eq!(signed_pow(3.0f64, 2.0), 9.0);
        assert_eq!(signed_pow(-3.0f64, 2.0), -9.0);
        assert_eq!(signed_pow(0.0f64, 1.852), 0.0);
    }
}
