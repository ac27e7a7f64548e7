use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Projects `x` onto the axis-aligned box `[lo, hi]` by per-coordinate clamping.
///
/// This is the Euclidean projection onto the box and is therefore nonexpansive.
pub fn project_box<T: Scalar>(x: &[T], lo: &[T], hi: &[T]) -> Result<Vec<T>> {
    if lo.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: lo.len(),
        });
    }
    if hi.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: hi.len(),
        });
    }
    Ok(x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| clamp(v, l, h))
        .collect())
}

#[inline]
pub(crate) fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    v.max(lo).min(hi)
}

/// Closed axis-aligned box, the action set of one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> BoxSet<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidArgument(
                "action box must have dimension >= 1".into(),
            ));
        }
        for (k, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite()) || l > h {
                return Err(Error::InvalidArgument(format!(
                    "box face {k}: need finite lo <= hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The interval `[lo, hi]`.
    pub fn interval(lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn project(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| clamp(v, l, h))
            .collect()
    }

    pub fn project_into(&self, x: &[T], out: &mut [T]) {
        for (o, (&v, (&l, &h))) in out
            .iter_mut()
            .zip(x.iter().zip(self.lo.iter().zip(&self.hi)))
        {
            *o = clamp(v, l, h);
        }
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }
}

/// Player dimensions of a flat action profile.
///
/// Profiles are stored as one contiguous vector; player `i` owns the
/// coordinates in [`Layout::range`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    offsets: Vec<usize>,
}

impl Layout {
    /// `n` players with scalar actions.
    pub fn scalar(n: usize) -> Self {
        Self {
            offsets: (0..=n).collect(),
        }
    }

    pub fn from_dims(dims: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in dims {
            acc += d;
            offsets.push(acc);
        }
        Self { offsets }
    }

    pub fn players(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn is_scalar(&self) -> bool {
        (0..self.players()).all(|i| self.dim(i) == 1)
    }

    pub fn slice<'a, T>(&self, v: &'a [T], i: usize) -> &'a [T] {
        &v[self.range(i)]
    }

    pub fn slice_mut<'a, T>(&self, v: &'a mut [T], i: usize) -> &'a mut [T] {
        &mut v[self.range(i)]
    }
}
