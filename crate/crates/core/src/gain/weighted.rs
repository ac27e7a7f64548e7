use super::cycles::simple_cycles;
use super::report::{Condition, ConditionKind, Evidence, Family, SmallGainReport, STRICT_MARGIN};
use crate::error::{Error, Result};
use crate::scalar::{log_space, Scalar};

/// Weighted cycle conditions `a_{i1,i2} a_{i2,i3} … a_{ip,i1} R_{i1} … R_{ip} < 1`.
///
/// Each row must first satisfy `Σ_{j≠i} 1/a_ij <= 1`, which is equivalent to
/// `Σ_{j≠i} x_j <= max_{j≠i} a_ij x_j` for all `x >= 0`. Row checks are
/// reported under `feasibility` and may sit exactly on the boundary.
pub fn check_weighted_small_gain<T: Scalar>(r: &[T], a: &[Vec<T>]) -> Result<SmallGainReport> {
    let n = r.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2 slopes, got {n}"
        )));
    }
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "weight matrix must be {n}x{n}"
        )));
    }
    for (i, row) in a.iter().enumerate() {
        for j in (0..n).filter(|&j| j != i) {
            if !(row[j] > T::zero() && row[j].is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "weight a_({},{}) must be positive, got {}",
                    i + 1,
                    j + 1,
                    row[j]
                )));
            }
        }
    }
    let feasibility = (0..n)
        .map(|i| {
            let sum: T = (0..n).filter(|&j| j != i).map(|j| T::one() / a[i][j]).sum();
            Condition {
                kind: ConditionKind::Row,
                players: vec![i + 1],
                coefficient: None,
                value: sum.as_f64(),
                margin: (T::one() - sum).as_f64(),
                evidence: Evidence::Analytic,
            }
        })
        .collect();
    let conditions = simple_cycles(n)
        .into_iter()
        .map(|cycle| {
            let p = cycle.len();
            let weight = (0..p).fold(T::one(), |acc, k| acc * a[cycle[k]][cycle[(k + 1) % p]]);
            let value = cycle.iter().fold(weight, |acc, &i| acc * r[i]);
            Condition {
                kind: ConditionKind::Cycle,
                players: cycle.iter().map(|i| i + 1).collect(),
                coefficient: Some(weight.as_f64()),
                value: value.as_f64(),
                margin: (T::one() - value).as_f64(),
                evidence: Evidence::Analytic,
            }
        })
        .collect();
    Ok(SmallGainReport::assemble(
        Family::Weighted,
        None,
        conditions,
        feasibility,
    ))
}

/// Whether `Σ_{j≠i} x_j <= max_{j≠i} a_ij x_j` for one row and one sample `x`.
pub fn row_dominates<T: Scalar>(row: &[T], i: usize, x: &[T]) -> bool {
    let (sum, max) = (0..row.len())
        .filter(|&j| j != i)
        .fold((T::zero(), T::zero()), |(s, m), j| {
            (s + x[j], m.max(row[j] * x[j]))
        });
    sum <= max * (T::one() + T::tol(1e-12))
}

/// Weights of the three-player family: `a_12 = 1+ε_1`, `a_13 = 1+1/ε_1`,
/// `a_21 = 1+ε_2`, `a_23 = 1+1/ε_2`, `a_31 = 1+ε_3`, `a_32 = 1+1/ε_3`.
pub fn epsilon_weights<T: Scalar>(eps: [T; 3]) -> Vec<Vec<T>> {
    let one = T::one();
    let [e1, e2, e3] = eps;
    vec![
        vec![T::zero(), one + e1, one + one / e1],
        vec![one + e2, T::zero(), one + one / e2],
        vec![one + e3, one + one / e3, T::zero()],
    ]
}

/// Left-hand sides of the five three-player inequalities, in the order
/// `{1,2}`, `{1,3}`, `{2,3}`, `1→2→3→1`, `1→3→2→1`.
pub fn weighted_n3_values<T: Scalar>(r: [T; 3], eps: [T; 3]) -> [T; 5] {
    let one = T::one();
    let [r1, r2, r3] = r;
    let [e1, e2, e3] = eps;
    [
        r1 * r2 * (one + e1) * (one + e2),
        r1 * r3 * (one + one / e1) * (one + e3),
        r2 * r3 * (one + one / e2) * (one + one / e3),
        r1 * r2 * r3 * (one + e1) * (one + one / e2) * (one + e3),
        r1 * r2 * r3 * (one + one / e1) * (one + e2) * (one + one / e3),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSearch<T> {
    pub epsilon: [T; 3],
    pub values: [T; 5],
    /// `1 - max(values)`.
    pub margin: T,
}

fn min_margin<T: Scalar>(r: [T; 3], eps: [T; 3]) -> T {
    let v = weighted_n3_values(r, eps);
    T::one() - v.into_iter().fold(T::zero(), T::max)
}

const COARSE: usize = 41;

/// Searches `ε ∈ [1e-3, 1e3]^3` for weights satisfying the five inequalities.
///
/// A 41-point log grid per axis picks the first triple with the largest minimum
/// margin; a log-space pattern search then polishes it. Returns `None` when no
/// visited triple has margin above `1e-12`.
pub fn search_weights_n3<T: Scalar>(r: [T; 3]) -> Result<Option<WeightSearch<T>>> {
    check_slopes(&r)?;
    let axis: Vec<T> = log_space(T::lit(1e-3), T::lit(1e3), COARSE);
    let mut best = ([axis[0]; 3], T::neg_infinity());
    for &e1 in &axis {
        for &e2 in &axis {
            for &e3 in &axis {
                let m = min_margin(r, [e1, e2, e3]);
                if m > best.1 {
                    best = ([e1, e2, e3], m);
                }
            }
        }
    }

    let (lo, hi) = (T::lit(1e-3).ln(), T::lit(1e3).ln());
    let mut logs = best.0.map(|e| e.ln());
    let mut margin = best.1;
    let mut step = (hi - lo) / T::of_usize(COARSE - 1);
    let floor = T::tol(1e-9);
    while step > floor {
        let mut improved = false;
        for k in 0..3 {
            for sign in [T::one(), -T::one()] {
                let mut trial = logs;
                trial[k] = (trial[k] + sign * step).max(lo).min(hi);
                let m = min_margin(r, trial.map(T::exp));
                if m > margin {
                    logs = trial;
                    margin = m;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= T::lit(2.0);
        }
    }
    let polished = logs.map(T::exp);
    let (epsilon, margin) = if margin >= best.1 {
        (polished, margin)
    } else {
        best
    };
    if margin.as_f64() <= STRICT_MARGIN {
        return Ok(None);
    }
    Ok(Some(WeightSearch {
        epsilon,
        values: weighted_n3_values(r, epsilon),
        margin,
    }))
}

fn check_slopes<T: Scalar>(r: &[T]) -> Result<()> {
    if let Some((i, v)) = r
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > T::zero()))
    {
        return Err(Error::InvalidArgument(format!(
            "R_{} must be positive and finite, got {v}",
            i + 1
        )));
    }
    Ok(())
}
