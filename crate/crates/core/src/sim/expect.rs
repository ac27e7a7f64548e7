use serde::{Deserialize, Serialize};

use super::config::ratio;
use crate::error::{Error, Result};
use crate::game::BoxSet;
use crate::scalar::{norm, Scalar};

fn consistency_slack<T: Scalar>(bound: T) -> T {
    T::tol(1e-12) * (T::one() + bound)
}

/// Recovers the direction `d` with `Pr_S(q* + d s) = exp` for one node.
///
/// `s` is the raw window supremum `‖q_j - q*_j‖` over the link window. Scalar
/// boxes follow the face rule: an expectation on the lower face gives `-1`, on
/// the upper face `+1`, otherwise the ratio `(exp - q*)/s`. Vector boxes use the
/// ratio directly. A zero supremum returns `d = 0`.
pub fn realize_expectation_d<T: Scalar>(
    exp: &[T],
    q_star: &[T],
    s: T,
    set: &BoxSet<T>,
) -> Result<Vec<T>> {
    realize_at(exp, q_star, s, set, 0, 0, 0)
}

pub(crate) fn realize_at<T: Scalar>(
    exp: &[T],
    q_star: &[T],
    s: T,
    set: &BoxSet<T>,
    node: usize,
    observer: usize,
    target: usize,
) -> Result<Vec<T>> {
    if exp.len() != set.dim() || q_star.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: exp.len(),
        });
    }
    let gap: Vec<T> = exp.iter().zip(q_star).map(|(&e, &q)| e - q).collect();
    let deviation = norm(&gap);
    let violation = || Error::ConsistencyViolation {
        node,
        observer: observer + 1,
        target: target + 1,
        deviation: deviation.as_f64(),
        bound: s.as_f64(),
    };
    if deviation > s + consistency_slack(s) || !set.contains(exp, consistency_slack(s)) {
        return Err(violation());
    }
    if s <= T::zero() {
        return Ok(vec![T::zero(); exp.len()]);
    }
    if let [e] = exp {
        if *e == set.lo[0] {
            return Ok(vec![-T::one()]);
        }
        if *e == set.hi[0] {
            return Ok(vec![T::one()]);
        }
    }
    let mut d: Vec<T> = gap.iter().map(|&g| g / s).collect();
    // rounding can push |d| a hair above one
    let len = norm(&d);
    if len > T::one() {
        d.iter_mut().for_each(|v| *v /= len);
    }
    Ok(d)
}

/// `Pr_S(q* + d s)`.
pub fn reconstruct_expectation<T: Scalar>(d: &[T], q_star: &[T], s: T, set: &BoxSet<T>) -> Vec<T> {
    let raw: Vec<T> = q_star.iter().zip(d).map(|(&q, &d)| q + d * s).collect();
    set.project(&raw)
}

/// Node-wise [`realize_expectation_d`] over a series; errors name the first
/// offending node.
pub fn realize_expectation_series<T: Scalar>(
    exps: &[Vec<T>],
    sups: &[T],
    q_star: &[T],
    set: &BoxSet<T>,
    observer: usize,
    target: usize,
) -> Result<Vec<Vec<T>>> {
    if exps.len() != sups.len() {
        return Err(Error::DimensionMismatch {
            expected: exps.len(),
            got: sups.len(),
        });
    }
    exps.iter()
        .zip(sups)
        .enumerate()
        .map(|(k, (e, &s))| realize_at(e, q_star, s, set, k, observer, target))
        .collect()
}

/// One lag of a weighted-delay rule; `delay` in time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap<T> {
    pub delay: T,
    pub weight: T,
}

/// Backward-looking expectation rules
/// `exp(t) = a Σ_l w_l q_j(t - δ_l) + (1 - a) q*_j` and the kernel form
/// `exp(t) = a ∫ k(s) q_j(t - s) ds + (1 - a) q*_j`.
///
/// Kernels are stored as piecewise-linear knots `(lag, density)` and evaluated
/// by trapezoid quadrature on the simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectationRule<T> {
    WeightedDelay { blend: T, taps: Vec<Tap<T>> },
    Kernel { blend: T, knots: Vec<(T, T)> },
}

/// A rule resolved to grid lags: `(steps, weight)` with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledRule<T> {
    pub blend: T,
    pub taps: Vec<(usize, T)>,
}

impl<T: Scalar> CompiledRule<T> {
    pub fn max_lag(&self) -> usize {
        self.taps.iter().map(|t| t.0).max().unwrap_or(0)
    }

    pub fn min_lag(&self) -> usize {
        self.taps.iter().map(|t| t.0).min().unwrap_or(0)
    }

    /// Expectation deviation `a Σ w x_j(node - lag)` given lagged deviations.
    pub fn apply(&self, mut lagged: impl FnMut(usize) -> Vec<T>) -> Vec<T> {
        let mut acc: Option<Vec<T>> = None;
        for &(lag, w) in &self.taps {
            let v = lagged(lag);
            let acc = acc.get_or_insert_with(|| vec![T::zero(); v.len()]);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * x;
            }
        }
        let mut out = acc.unwrap_or_default();
        out.iter_mut().for_each(|v| *v *= self.blend);
        out
    }
}

impl<T: Scalar> ExpectationRule<T> {
    pub fn blend(&self) -> T {
        match self {
            ExpectationRule::WeightedDelay { blend, .. }
            | ExpectationRule::Kernel { blend, .. } => *blend,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let blend = self.blend();
        if !(blend >= T::zero() && blend <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "blend must lie in [0, 1], got {blend}"
            )));
        }
        match self {
            ExpectationRule::WeightedDelay { taps, .. } => {
                if taps.is_empty() {
                    return Err(Error::InvalidArgument(
                        "weighted-delay rule needs at least one tap".into(),
                    ));
                }
                if taps
                    .iter()
                    .any(|t| !(t.weight >= T::zero()) || !(t.delay >= T::zero()))
                {
                    return Err(Error::InvalidArgument(
                        "tap weights and delays must be >= 0".into(),
                    ));
                }
                let total: T = taps.iter().map(|t| t.weight).sum();
                if (total - T::one()).abs() > T::tol(1e-12) {
                    return Err(Error::Normalization(format!("tap weights sum to {total}")));
                }
            }
            ExpectationRule::Kernel { knots, .. } => {
                if knots.len() < 2
                    || knots.windows(2).any(|w| w[1].0 <= w[0].0)
                    || knots[0].0 < T::zero()
                {
                    return Err(Error::InvalidArgument(
                        "kernel knots need >= 2 strictly increasing non-negative lags".into(),
                    ));
                }
                if knots.iter().any(|k| !(k.1 >= T::zero())) {
                    return Err(Error::InvalidArgument(
                        "kernel density must be non-negative".into(),
                    ));
                }
                let integral: T = knots
                    .windows(2)
                    .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / T::lit(2.0))
                    .sum();
                if (integral - T::one()).abs() > T::tol(1e-10) {
                    return Err(Error::Normalization(format!(
                        "kernel integrates to {integral}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Resolves the rule on a grid of step `h`.
    pub fn compile(&self, h: T) -> Result<CompiledRule<T>> {
        self.validate()?;
        let blend = self.blend();
        let taps = match self {
            ExpectationRule::WeightedDelay { taps, .. } => taps
                .iter()
                .map(|t| Ok((ratio(t.delay, h, "tap delay / h")?, t.weight)))
                .collect::<Result<Vec<_>>>()?,
            ExpectationRule::Kernel { knots, .. } => {
                let (a, b) = (knots[0].0, knots[knots.len() - 1].0);
                let first = (a / h - T::tol(1e-9)).ceil().to_usize().unwrap_or(0);
                let last = (b / h + T::tol(1e-9)).floor().to_usize().unwrap_or(0);
                if last < first {
                    return Err(Error::InvalidArgument(
                        "kernel support contains no grid node".into(),
                    ));
                }
                let density = |s: T| -> T {
                    let k = knots.partition_point(|kn| kn.0 <= s);
                    if k == 0 {
                        knots[0].1
                    } else if k == knots.len() {
                        knots[k - 1].1
                    } else {
                        let (s0, v0) = knots[k - 1];
                        let (s1, v1) = knots[k];
                        v0 + (v1 - v0) * (s - s0) / (s1 - s0)
                    }
                };
                let mut taps: Vec<(usize, T)> = (first..=last)
                    .map(|l| {
                        let end = l == first || l == last;
                        let w = density(T::of_usize(l) * h)
                            * if end && first != last {
                                T::lit(0.5)
                            } else {
                                T::one()
                            };
                        (l, w)
                    })
                    .collect();
                let total: T = taps.iter().map(|t| t.1).sum();
                if total <= T::zero() {
                    return Err(Error::Normalization("kernel vanishes on the grid".into()));
                }
                taps.iter_mut().for_each(|t| t.1 /= total);
                taps
            }
        };
        Ok(CompiledRule { blend, taps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoxSet<f64> {
        BoxSet::interval(0.0, 5.0).unwrap()
    }

    #[test]
    fn scalar_cases() {
        assert_eq!(
            realize_expectation_d(&[3.0], &[3.0], 0.0, &unit()).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            realize_expectation_d(&[4.0], &[3.0], 2.0, &unit()).unwrap(),
            vec![0.5]
        );
        assert_eq!(
            realize_expectation_d(&[0.0], &[3.0], 4.0, &unit()).unwrap(),
            vec![-1.0]
        );
        assert_eq!(
            realize_expectation_d(&[5.0], &[3.0], 2.5, &unit()).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn inconsistent_expectation() {
        let err = realize_expectation_d(&[4.5], &[3.0], 1.0, &unit()).unwrap_err();
        assert!(matches!(err, Error::ConsistencyViolation { .. }));
        let err = realize_expectation_d(&[3.1], &[3.0], 0.0, &unit()).unwrap_err();
        assert!(matches!(err, Error::ConsistencyViolation { .. }));
    }

    #[test]
    fn vector_roundtrip() {
        let b = BoxSet::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let q = [1.0, 1.0];
        let e = [1.5, 0.25];
        let s = 1.0;
        let d = realize_expectation_d(&e, &q, s, &b).unwrap();
        assert_eq!(reconstruct_expectation(&d, &q, s, &b), e.to_vec());
    }

    #[test]
    fn series_reports_node() {
        let exps = vec![vec![3.0], vec![3.5], vec![9.0]];
        let err =
            realize_expectation_series(&exps, &[0.0, 1.0, 1.0], &[3.0], &unit(), 0, 1).unwrap_err();
        assert!(matches!(err, Error::ConsistencyViolation { node: 2, .. }));
    }

    #[test]
    fn rule_normalization() {
        let bad = ExpectationRule::WeightedDelay {
            blend: 1.0,
            taps: vec![
                Tap {
                    delay: 1.0,
                    weight: 0.5,
                },
                Tap {
                    delay: 2.0,
                    weight: 0.4,
                },
            ],
        };
        assert!(matches!(bad.validate(), Err(Error::Normalization(_))));
        let kernel = ExpectationRule::Kernel {
            blend: 1.0,
            knots: vec![(1.0, 1.0), (2.0, 1.0)],
        };
        let c = kernel.compile(0.25).unwrap();
        assert_eq!(c.taps.len(), 5);
        assert_eq!(c.taps[0], (4, 0.125));
        let sum: f64 = c.taps.iter().map(|t| t.1).sum();
        assert!((sum - 1.0).abs() < 1e-15);
        let lopsided = ExpectationRule::Kernel {
            blend: 1.0,
            knots: vec![(1.0, 0.5), (2.0, 0.5)],
        };
        assert!(matches!(lopsided.validate(), Err(Error::Normalization(_))));
    }
}
