use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A class-N gain: continuous, non-decreasing, zero at zero.
///
/// `Tabulated` interpolates linearly between samples, runs linearly from the
/// origin to the first sample and stays constant beyond the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainFunction<T> {
    Linear { coefficient: T },
    Tabulated { s: Vec<T>, v: Vec<T> },
}

impl<T: Scalar> GainFunction<T> {
    pub fn linear(coefficient: T) -> Result<Self> {
        let g = GainFunction::Linear { coefficient };
        g.validate()?;
        Ok(g)
    }

    pub fn tabulated(s: Vec<T>, v: Vec<T>) -> Result<Self> {
        let g = GainFunction::Tabulated { s, v };
        g.validate()?;
        Ok(g)
    }

    /// Samples `f` at the given abscissae.
    pub fn sample(s: Vec<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let v = s.iter().map(|&x| f(x)).collect();
        Self::tabulated(s, v)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GainFunction::Linear { coefficient } => {
                if !(coefficient.is_finite() && *coefficient >= T::zero()) {
                    return Err(Error::InvalidArgument(format!(
                        "linear gain coefficient must be finite and >= 0, got {coefficient}"
                    )));
                }
            }
            GainFunction::Tabulated { s, v } => {
                if s.is_empty() || s.len() != v.len() {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated gain needs matching non-empty samples, got {} abscissae and {} values",
                        s.len(),
                        v.len()
                    )));
                }
                if s.iter().chain(v).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "tabulated gain samples must be finite".into(),
                    ));
                }
                if s[0] <= T::zero() || s.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument(
                        "tabulated abscissae must be positive and strictly increasing".into(),
                    ));
                }
                if v[0] < T::zero() || v.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidArgument(
                        "tabulated values must be non-negative and non-decreasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        match self {
            GainFunction::Linear { coefficient } => *coefficient * x,
            GainFunction::Tabulated { s, v } => {
                let k = s.partition_point(|&sk| sk <= x);
                if k == 0 {
                    v[0] * x / s[0]
                } else if k == s.len() {
                    v[k - 1]
                } else {
                    let (s0, s1, v0, v1) = (s[k - 1], s[k], v[k - 1], v[k]);
                    v0 + (v1 - v0) * (x - s0) / (s1 - s0)
                }
            }
        }
    }

    pub fn coefficient(&self) -> Option<T> {
        match self {
            GainFunction::Linear { coefficient } => Some(*coefficient),
            GainFunction::Tabulated { .. } => None,
        }
    }
}

/// Off-diagonal matrix of gains `γ̃_ij`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix<T> {
    n: usize,
    entries: Vec<Option<GainFunction<T>>>,
}

impl<T: Scalar> GainMatrix<T> {
    /// Builds the matrix from `f(i, j)` for every `i != j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> GainFunction<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "gain matrix needs n >= 2, got {n}"
            )));
        }
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    entries.push(None);
                } else {
                    let g = f(i, j);
                    g.validate()?;
                    entries.push(Some(g));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Linear gains from a square coefficient matrix; the diagonal is ignored.
    pub fn linear(coefficients: &[Vec<T>]) -> Result<Self> {
        let n = coefficients.len();
        if coefficients.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "coefficient matrix must be {n}x{n}"
            )));
        }
        Self::from_fn(n, |i, j| GainFunction::Linear {
            coefficient: coefficients[i][j],
        })
    }

    /// Re-checks the invariants, for matrices obtained by deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.entries.len() != self.n * self.n {
            return Err(Error::InvalidArgument("malformed gain matrix".into()));
        }
        for i in 0..self.n {
            for j in 0..self.n {
                match (&self.entries[i * self.n + j], i == j) {
                    (None, true) => {}
                    (Some(g), false) => g.validate()?,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "gain ({}, {}) must be {}",
                            i + 1,
                            j + 1,
                            if i == j { "absent" } else { "present" }
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&GainFunction<T>> {
        self.entries[i * self.n + j].as_ref()
    }

    pub fn coefficient(&self, i: usize, j: usize) -> Option<T> {
        self.get(i, j).and_then(GainFunction::coefficient)
    }

    pub fn is_linear(&self) -> bool {
        self.entries
            .iter()
            .flatten()
            .all(|g| g.coefficient().is_some())
    }
}
