use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid and window parameters of a simulation.
///
/// `h` must divide `r`, `r` must divide `T` and `h` must divide the horizon,
/// so every window endpoint is a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    pub h: T,
    pub r: T,
    #[serde(rename = "T")]
    pub window: T,
    pub horizon: T,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimConfig<f64> {
    fn default() -> Self {
        Self {
            h: 0.25,
            r: 1.0,
            window: 2.0,
            horizon: 200.0,
            seed: 0,
        }
    }
}

/// The integer step counts behind a validated [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSteps {
    /// `r / h`
    pub r: usize,
    /// `T / h`
    pub window: usize,
    /// `horizon / h`
    pub horizon: usize,
}

impl GridSteps {
    /// Total node count, history included.
    pub fn nodes(&self) -> usize {
        self.window + self.horizon + 1
    }
}

pub(crate) fn ratio<T: Scalar>(num: T, den: T, what: &str) -> Result<usize> {
    let q = num / den;
    let k = q.round();
    let tol = T::tol(1e-9) * k.max(T::one());
    if !(q.is_finite() && k >= T::zero() && (q - k).abs() <= tol) {
        return Err(Error::InvalidArgument(format!(
            "{what} must be an integer, got {q}"
        )));
    }
    k.to_usize()
        .ok_or_else(|| Error::InvalidArgument(format!("{what} out of range")))
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(h: T, r: T, window: T, horizon: T, seed: u64) -> Self {
        Self {
            h,
            r,
            window,
            horizon,
            seed,
        }
    }

    pub fn steps(&self) -> Result<GridSteps> {
        if !(self.h > T::zero() && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "h must be positive, got {}",
                self.h
            )));
        }
        if !(self.r > T::zero() && self.r <= self.window) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < r <= T, got r = {}, T = {}",
                self.r, self.window
            )));
        }
        if self.horizon < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        let r = ratio(self.r, self.h, "r / h")?;
        ratio(self.window, self.r, "T / r")?;
        let window = ratio(self.window, self.h, "T / h")?;
        let horizon = ratio(self.horizon, self.h, "horizon / h")?;
        Ok(GridSteps { r, window, horizon })
    }
}
