use serde::{Deserialize, Serialize};

use super::boxes::{clamp, BoxSet, Layout};
use super::general::Game;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Raw Cournot oligopoly parameters: linear inverse demand `p = b(a - Σq)`,
/// marginal costs `c`, quadratic cost coefficients `K` and capacities `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CournotParams<T> {
    pub a: T,
    pub b: T,
    pub c: Vec<T>,
    #[serde(rename = "K")]
    pub k: Vec<T>,
    #[serde(rename = "Q")]
    pub q: Vec<T>,
}

/// Price and payoff of one player at a given production profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff<T> {
    pub price: T,
    pub payoff: T,
}

/// A validated Cournot game.
///
/// Invariants: `n >= 2`, `b > 0`, `Q_i > 0`, `a >= ΣQ_i` and
/// `2b + K_i > 0` for every player, so every `R_i = b/(2b + K_i)` is positive
/// and each payoff is strictly concave in the player's own quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct CournotGame<T> {
    params: CournotParams<T>,
    layout: Layout,
    boxes: Vec<BoxSet<T>>,
    r: Vec<T>,
}

impl<T: Scalar> CournotGame<T> {
    pub fn validate(params: CournotParams<T>) -> Result<Self> {
        let n = params.q.len();
        if n < 2 {
            return Err(Error::ConstraintViolation(format!(
                "n >= 2 players required, got {n}"
            )));
        }
        for (name, len) in [("c", params.c.len()), ("K", params.k.len())] {
            if len != n {
                return Err(Error::ConstraintViolation(format!(
                    "parameter list {name} has length {len}, expected {n}"
                )));
            }
        }
        let finite = params.a.is_finite()
            && params.b.is_finite()
            && params
                .c
                .iter()
                .chain(&params.k)
                .chain(&params.q)
                .all(|v| v.is_finite());
        if !finite {
            return Err(Error::ConstraintViolation(
                "all parameters must be finite".into(),
            ));
        }
        if params.b <= T::zero() {
            return Err(Error::ConstraintViolation(format!(
                "b > 0 violated (b = {})",
                params.b
            )));
        }
        if let Some((i, q)) = params.q.iter().enumerate().find(|(_, &q)| q <= T::zero()) {
            return Err(Error::ConstraintViolation(format!(
                "Q_{} > 0 violated (Q = {q})",
                i + 1
            )));
        }
        let total: T = params.q.iter().copied().sum();
        if params.a < total {
            return Err(Error::ConstraintViolation(format!(
                "a >= sum Q_i violated (a = {}, sum Q_i = {total})",
                params.a
            )));
        }
        let k_min = params.k.iter().copied().fold(T::infinity(), T::min);
        let half = T::lit(0.5);
        if params.b <= -half * k_min {
            return Err(Error::ConstraintViolation(format!(
                "b > -(1/2) min K_i violated (b = {}, -(1/2) min K_i = {})",
                params.b,
                -half * k_min
            )));
        }
        let two = T::lit(2.0);
        let r = params
            .k
            .iter()
            .map(|&k| params.b / (two * params.b + k))
            .collect();
        let boxes = params
            .q
            .iter()
            .map(|&q| BoxSet::interval(T::zero(), q))
            .collect::<Result<_>>()?;
        Ok(Self {
            layout: Layout::scalar(n),
            boxes,
            r,
            params,
        })
    }

    pub fn params(&self) -> &CournotParams<T> {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.q.len()
    }

    /// `R_i = b / (2b + K_i)`.
    pub fn r(&self) -> &[T] {
        &self.r
    }

    pub fn capacity(&self, i: usize) -> T {
        self.params.q[i]
    }

    pub fn capacities(&self) -> &[T] {
        &self.params.q
    }

    /// Capacity ratio `g_ij = Q_j / Q_i`.
    pub fn g(&self, i: usize, j: usize) -> T {
        self.params.q[j] / self.params.q[i]
    }

    /// Unconstrained reply to a zero aggregate, `(ab - c_i)/(2b + K_i)`.
    pub fn intercept(&self, i: usize) -> T {
        let p = &self.params;
        (p.a * p.b - p.c[i]) / (T::lit(2.0) * p.b + p.k[i])
    }

    /// `M_i = (ab - c_i)/((2b + K_i) Q_i)`.
    pub fn m_constant(&self, i: usize) -> T {
        self.intercept(i) / self.params.q[i]
    }

    /// Best reply as a function of the aggregate output of the other players.
    pub fn reply_to_aggregate(&self, i: usize, others: T) -> T {
        clamp(
            self.intercept(i) - self.r[i] * others,
            T::zero(),
            self.params.q[i],
        )
    }

    /// Price and payoff `π_i = p q_i - c_i q_i - K_i q_i² / 2`.
    pub fn payoff(&self, q: &[T], i: usize) -> Result<Payoff<T>> {
        self.check_profile(q)?;
        let p = &self.params;
        let total: T = q.iter().copied().sum();
        let price = p.b * (p.a - total);
        let qi = q[i];
        let payoff = price * qi - p.c[i] * qi - T::lit(0.5) * p.k[i] * qi * qi;
        Ok(Payoff { price, payoff })
    }

    /// Best reply of player `i` to the quantities of the other `n - 1` players.
    pub fn best_reply_to(&self, i: usize, q_minus_i: &[T]) -> Result<T> {
        let n = self.n();
        if q_minus_i.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                expected: n - 1,
                got: q_minus_i.len(),
            });
        }
        let tol = T::tol(1e-12);
        for (slot, &v) in q_minus_i.iter().enumerate() {
            let j = if slot < i { slot } else { slot + 1 };
            if v < -tol || v > self.params.q[j] + tol {
                return Err(Error::Infeasible(format!(
                    "q_{} = {v} outside [0, {}]",
                    j + 1,
                    self.params.q[j]
                )));
            }
        }
        Ok(self.reply_to_aggregate(i, q_minus_i.iter().copied().sum()))
    }

    fn check_profile(&self, q: &[T]) -> Result<()> {
        if q.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: q.len(),
            });
        }
        let tol = T::tol(1e-12);
        for (i, (&v, b)) in q.iter().zip(&self.boxes).enumerate() {
            if !b.contains(&[v], tol) {
                return Err(Error::Infeasible(format!(
                    "q_{} = {v} outside [0, {}]",
                    i + 1,
                    self.params.q[i]
                )));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Game<T> for CournotGame<T> {
    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn action_box(&self, i: usize) -> &BoxSet<T> {
        &self.boxes[i]
    }

    fn best_reply(&self, i: usize, profile: &[T]) -> Vec<T> {
        let others = profile
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .sum();
        vec![self.reply_to_aggregate(i, others)]
    }

    fn as_cournot(&self) -> Option<&CournotGame<T>> {
        Some(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_game() -> CournotGame<f64> {
        CournotGame::validate(CournotParams {
            a: 10.0,
            b: 1.0,
            c: vec![1.0, 1.0],
            k: vec![0.0, 0.0],
            q: vec![5.0, 5.0],
        })
        .unwrap()
    }

    #[test]
    fn derived_constants() {
        let g = example_game();
        assert_eq!(g.r(), &[0.5, 0.5]);
        assert_eq!(g.g(0, 1), 1.0);
        assert_eq!(g.g(1, 0), 1.0);
    }

    #[test]
    fn rejects_short_intercept() {
        let err = CournotGame::validate(CournotParams {
            a: 9.0,
            b: 1.0,
            c: vec![1.0, 1.0],
            k: vec![0.0, 0.0],
            q: vec![5.0, 5.0],
        })
        .unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(ref m) if m.contains("a >= sum Q_i")));
    }

    #[test]
    fn rejects_concavity_bound() {
        // b = 1 <= -K_1/2 = 1.25
        let err = CournotGame::validate(CournotParams {
            a: 10.0,
            b: 1.0,
            c: vec![1.0, 1.0],
            k: vec![-2.5, 0.0],
            q: vec![5.0, 5.0],
        })
        .unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(ref m) if m.contains("min K_i")));
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let err = CournotGame::validate(CournotParams {
            a: 10.0,
            b: 1.0,
            c: vec![1.0],
            k: vec![0.0, 0.0],
            q: vec![5.0, 5.0],
        })
        .unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation(_)));
    }

    #[test]
    fn payoff_values() {
        let g = example_game();
        let p = g.payoff(&[3.0, 3.0], 0).unwrap();
        assert_eq!(p.price, 4.0);
        assert_eq!(p.payoff, 9.0);
        assert_eq!(g.payoff(&[0.0, 4.0], 0).unwrap().payoff, 0.0);

        let mut params = g.params().clone();
        params.k[0] = 2.0;
        let g2 = CournotGame::validate(params).unwrap();
        assert_eq!(g2.payoff(&[3.0, 3.0], 0).unwrap().payoff, 0.0);
    }

    #[test]
    fn payoff_rejects_outside_profile() {
        let g = example_game();
        assert!(matches!(
            g.payoff(&[6.0, 1.0], 0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn best_reply_values() {
        let g = example_game();
        assert_eq!(g.best_reply_to(0, &[3.0]).unwrap(), 3.0);
        assert_eq!(g.best_reply_to(0, &[5.0]).unwrap(), 2.0);

        let mut params = g.params().clone();
        params.q[0] = 4.0;
        let g2 = CournotGame::validate(params).unwrap();
        assert_eq!(g2.best_reply_to(0, &[0.0]).unwrap(), 4.0);
        assert!(matches!(
            g.best_reply_to(0, &[5.5]),
            Err(Error::Infeasible(_))
        ));
    }
}
