use serde::{Deserialize, Serialize};

use super::config::GridSteps;
use super::expect::ExpectationRule;
use crate::error::{Error, Result};
use crate::game::Layout;
use crate::scalar::{norm, Scalar};

/// Blend weights `θ_i(t) ∈ [0, Θ]`. Scripted rows are indexed by step (`t = h, 2h, …`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSignal<T> {
    Constant {
        values: Vec<T>,
    },
    /// Uniform on `[0, Θ]`, redrawn every step.
    Seeded,
    Scripted {
        values: Vec<Vec<T>>,
    },
}

/// Delays `τ_i(t)` in grid steps, within `[r/h, T/h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelaySignal {
    Constant {
        steps: Vec<usize>,
    },
    /// Uniform over the admissible steps, redrawn every step.
    Seeded,
    Scripted {
        steps: Vec<Vec<usize>>,
    },
}

/// Direction `d_ij(t)` with `|d| <= 1` in the dimension of player `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionSignal<T> {
    Constant {
        value: Vec<T>,
    },
    /// Uniform in the closed unit ball, redrawn every step.
    Seeded,
    /// Direction of the most recent node attaining the window supremum of `x_j`.
    AdversarialSign,
    Scripted {
        values: Vec<Vec<T>>,
    },
    /// Directions reproducing an expectation rule.
    Rule {
        rule: ExpectationRule<T>,
    },
}

impl<T> DirectionSignal<T> {
    /// Signals resolved during stepping from the link window rather than drawn up front.
    pub fn is_lazy(&self) -> bool {
        matches!(
            self,
            DirectionSignal::AdversarialSign | DirectionSignal::Rule { .. }
        )
    }
}

/// One admissible choice of the unknown inputs `θ`, `τ`, `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRealization<T> {
    #[serde(rename = "Theta")]
    pub theta_bound: T,
    pub theta: ThetaSignal<T>,
    pub tau: DelaySignal,
    /// `n × n`, diagonal `None`.
    pub d: Vec<Vec<Option<DirectionSignal<T>>>>,
}

impl<T: Scalar> UncertaintyRealization<T> {
    /// The same direction signal on every ordered pair.
    pub fn uniform(
        n: usize,
        theta_bound: T,
        theta: ThetaSignal<T>,
        tau: DelaySignal,
        d: DirectionSignal<T>,
    ) -> Self {
        let d = (0..n)
            .map(|i| (0..n).map(|j| (i != j).then(|| d.clone())).collect())
            .collect();
        Self {
            theta_bound,
            theta,
            tau,
            d,
        }
    }

    /// Seeded `θ`, `τ` and `d`.
    pub fn seeded(n: usize, theta_bound: T) -> Self {
        Self::uniform(
            n,
            theta_bound,
            ThetaSignal::Seeded,
            DelaySignal::Seeded,
            DirectionSignal::Seeded,
        )
    }

    pub fn with_pair(mut self, i: usize, j: usize, signal: DirectionSignal<T>) -> Self {
        self.d[i][j] = Some(signal);
        self
    }

    pub fn direction(&self, i: usize, j: usize) -> Option<&DirectionSignal<T>> {
        self.d[i][j].as_ref()
    }

    /// Checks ranges and script lengths against a grid.
    pub fn validate(&self, layout: &Layout, steps: &GridSteps) -> Result<()> {
        let n = layout.players();
        if !(self.theta_bound >= T::zero() && self.theta_bound < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "Theta must lie in [0, 1), got {}",
                self.theta_bound
            )));
        }
        let theta_ok =
            |v: &[T]| v.len() == n && v.iter().all(|&t| t >= T::zero() && t <= self.theta_bound);
        match &self.theta {
            ThetaSignal::Constant { values } if !theta_ok(values) => {
                return Err(Error::InvalidArgument(format!(
                    "theta values {values:?} outside [0, Theta]"
                )));
            }
            ThetaSignal::Scripted { values } => {
                script_len(values.len(), steps.horizon, "theta")?;
                if let Some(k) = values.iter().take(steps.horizon).position(|v| !theta_ok(v)) {
                    return Err(Error::InvalidArgument(format!(
                        "scripted theta at step {} outside [0, Theta]",
                        k + 1
                    )));
                }
            }
            _ => {}
        }
        let tau_ok =
            |v: &[usize]| v.len() == n && v.iter().all(|&s| s >= steps.r && s <= steps.window);
        match &self.tau {
            DelaySignal::Constant { steps: v } if !tau_ok(v) => {
                return Err(Error::InvalidArgument(format!(
                    "delays {v:?} outside [r, T]"
                )));
            }
            DelaySignal::Scripted { steps: v } => {
                script_len(v.len(), steps.horizon, "tau")?;
                if let Some(k) = v.iter().take(steps.horizon).position(|v| !tau_ok(v)) {
                    return Err(Error::InvalidArgument(format!(
                        "scripted delay at step {} outside [r, T]",
                        k + 1
                    )));
                }
            }
            _ => {}
        }
        if self.d.len() != n || self.d.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "direction signals must form an {n}x{n} table"
            )));
        }
        for i in 0..n {
            for j in 0..n {
                match (&self.d[i][j], i == j) {
                    (None, true) => {}
                    (Some(sig), false) => check_direction(sig, layout.dim(j), steps, i, j)?,
                    (Some(_), true) => {}
                    (None, false) => {
                        return Err(Error::InvalidArgument(format!(
                            "missing direction signal ({}, {})",
                            i + 1,
                            j + 1
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

fn script_len(len: usize, needed: usize, what: &str) -> Result<()> {
    if len < needed {
        return Err(Error::InvalidArgument(format!(
            "{what} script covers {len} steps, horizon needs {needed}"
        )));
    }
    Ok(())
}

fn unit_ball<T: Scalar>(v: &[T], dim: usize) -> bool {
    v.len() == dim && norm(v) <= T::one() + T::tol(1e-12)
}

fn check_direction<T: Scalar>(
    sig: &DirectionSignal<T>,
    dim: usize,
    steps: &GridSteps,
    i: usize,
    j: usize,
) -> Result<()> {
    let pair = format!("({}, {})", i + 1, j + 1);
    match sig {
        DirectionSignal::Constant { value } if !unit_ball(value, dim) => {
            Err(Error::InvalidArgument(format!(
                "direction {pair} = {value:?} must have dimension {dim} and norm <= 1"
            )))
        }
        DirectionSignal::Scripted { values } => {
            script_len(values.len(), steps.horizon, "direction")?;
            match values
                .iter()
                .take(steps.horizon)
                .position(|v| !unit_ball(v, dim))
            {
                Some(k) => Err(Error::InvalidArgument(format!(
                    "scripted direction {pair} at step {} invalid",
                    k + 1
                ))),
                None => Ok(()),
            }
        }
        DirectionSignal::Rule { rule } => rule.validate(),
        _ => Ok(()),
    }
}

/// Deviation history on `[-T, 0]` in mode units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialHistory<T> {
    Constant(Vec<T>),
    /// One flat deviation per history node, oldest first.
    Nodes(Vec<Vec<T>>),
}

impl<T: Scalar> InitialHistory<T> {
    pub fn zero(dim: usize) -> Self {
        InitialHistory::Constant(vec![T::zero(); dim])
    }

    /// Samples `f(t)` at the history nodes `t = -T, …, 0`.
    pub fn from_fn(h: T, window_steps: usize, f: impl Fn(T) -> Vec<T>) -> Self {
        InitialHistory::Nodes(
            (0..=window_steps)
                .map(|k| f((T::of_usize(k) - T::of_usize(window_steps)) * h))
                .collect(),
        )
    }

    pub(crate) fn expand(&self, nodes: usize, dim: usize) -> Result<Vec<Vec<T>>> {
        let rows = match self {
            InitialHistory::Constant(x) => vec![x.clone(); nodes],
            InitialHistory::Nodes(rows) => {
                if rows.len() != nodes {
                    return Err(Error::DimensionMismatch {
                        expected: nodes,
                        got: rows.len(),
                    });
                }
                rows.clone()
            }
        };
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "initial history must be finite".into(),
            ));
        }
        Ok(rows)
    }
}
