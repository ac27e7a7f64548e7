//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the game, gain and simulation code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted as `f64` literals are
/// converted through [`Scalar::tol`], which never drops below a small multiple
/// of the type's machine epsilon so single precision stays usable.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(v, 16·eps)`.
    fn tol(v: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(16.0);
        let v = Self::lit(v);
        if v > floor {
            v
        } else {
            floor
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm; exact absolute value for one-dimensional vectors.
pub fn norm<T: Scalar>(v: &[T]) -> T {
    match v {
        [x] => x.abs(),
        _ => v.iter().map(|&x| x * x).sum::<T>().sqrt(),
    }
}

/// Largest absolute componentwise difference.
pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}

/// `n` log-spaced points over `[lo, hi]`, endpoints included.
pub fn log_space<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let last = T::of_usize(n - 1);
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * T::of_usize(k) / last).exp()
                    }
                })
                .collect()
        }
    }
}
