//! Scalar abstraction for the whole crate.
//!
//! All numerical machinery is generic over [`Real`], which is satisfied by
//! `f32` and `f64`. Concrete aliases for the common `f64` instantiation live
//! at the crate root.

use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

/// Converts an `f64` literal into the working scalar type.
///
/// Panics only if the target type cannot represent any nearby value, which
/// cannot happen for the finite literals used in this crate.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable in scalar type")
}

/// Converts a `usize` (grid sizes, indices) into the working scalar type.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count not representable in scalar type")
}

/// Max-norm of a primal vector.
#[inline]
pub fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}
