use super::cycles::{simple_cycles, subsets};
use super::function::{GainFunction, GainMatrix};
use super::report::{Condition, ConditionKind, Evidence, Family, SmallGainReport};
use crate::error::{Error, Result};
use crate::game::CournotGame;
use crate::scalar::{log_space, Scalar};

/// Upper end of the ω search.
pub const OMEGA_CAP: f64 = 10.0;

/// 121 log-spaced points over `[1e-6, 1e6]`.
pub fn default_s_grid<T: Scalar>() -> Vec<T> {
    log_space(T::lit(1e-6), T::lit(1e6), 121)
}

/// Linear gains `γ̃_ij(s) = R_i (n-1) s`.
pub fn cournot_gain_matrix<T: Scalar>(game: &CournotGame<T>) -> GainMatrix<T> {
    let n = game.n();
    let factor = T::of_usize(n - 1);
    GainMatrix::from_fn(n, |i, _| GainFunction::Linear {
        coefficient: game.r()[i] * factor,
    })
    .expect("positive reply slopes give valid linear gains")
}

fn check_r<T: Scalar>(r: &[T]) -> Result<()> {
    if r.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2 slopes, got {}",
            r.len()
        )));
    }
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

/// Evaluates `R_{i_1} ... R_{i_p} (n-1)^p < 1` on every index subset of size
/// `p = 2..n`; there are `2^n - n - 1` of them.
pub fn check_cournot_small_gain<T: Scalar>(r: &[T]) -> Result<SmallGainReport> {
    check_r(r)?;
    let n = r.len();
    let base = T::of_usize(n - 1);
    let conditions = subsets(n)
        .into_iter()
        .map(|set| {
            let coefficient = (0..set.len()).fold(T::one(), |acc, _| acc * base);
            let value = set.iter().fold(T::one(), |acc, &i| acc * r[i]) * coefficient;
            Condition {
                kind: ConditionKind::Subset,
                players: set.iter().map(|i| i + 1).collect(),
                coefficient: Some(coefficient.as_f64()),
                value: value.as_f64(),
                margin: (T::one() - value).as_f64(),
                evidence: Evidence::Analytic,
            }
        })
        .collect();
    Ok(SmallGainReport::assemble(
        Family::CournotSubset,
        None,
        conditions,
        Vec::new(),
    ))
}

fn check_matrix<T: Scalar>(gains: &GainMatrix<T>) -> Result<()> {
    gains.validate()
}

/// `(γ_{i1,i2} ∘ γ_{i2,i3} ∘ … ∘ γ_{ip,i1})(s)` with `γ_ij(s) = ω γ̃_ij(ω s)`.
pub fn cycle_composition<T: Scalar>(gains: &GainMatrix<T>, cycle: &[usize], omega: T, s: T) -> T {
    let p = cycle.len();
    let mut v = s;
    for k in (0..p).rev() {
        let (i, j) = (cycle[k], cycle[(k + 1) % p]);
        let g = gains.get(i, j).expect("off-diagonal gain");
        v = omega * g.eval(omega * v);
    }
    v
}

fn cycle_linear_product<T: Scalar>(gains: &GainMatrix<T>, cycle: &[usize]) -> Option<T> {
    let p = cycle.len();
    (0..p).try_fold(T::one(), |acc, k| {
        Some(acc * gains.coefficient(cycle[k], cycle[(k + 1) % p])?)
    })
}

/// Checks every directed simple cycle of the complete digraph.
///
/// All-linear cycles are decided exactly through `Π c · ω^{2p} < 1`; a cycle
/// with a tabulated entry reports the worst ratio `composition(s)/s` over
/// `s_grid` and is marked as sampled evidence.
pub fn check_cyclic_small_gain<T: Scalar>(
    gains: &GainMatrix<T>,
    omega: T,
    s_grid: &[T],
) -> Result<SmallGainReport> {
    check_matrix(gains)?;
    if !(omega > T::one() && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "omega must exceed 1, got {omega}"
        )));
    }
    if s_grid.is_empty() || s_grid.iter().any(|&s| !(s > T::zero() && s.is_finite())) {
        return Err(Error::InvalidArgument(
            "s grid must be non-empty and positive".into(),
        ));
    }
    let conditions = simple_cycles(gains.n())
        .into_iter()
        .map(|cycle| cyclic_condition(gains, &cycle, omega, s_grid))
        .collect();
    Ok(SmallGainReport::assemble(
        Family::Cyclic,
        Some(omega.as_f64()),
        conditions,
        Vec::new(),
    ))
}

fn cyclic_condition<T: Scalar>(
    gains: &GainMatrix<T>,
    cycle: &[usize],
    omega: T,
    s_grid: &[T],
) -> Condition {
    let players = cycle.iter().map(|i| i + 1).collect();
    match cycle_linear_product(gains, cycle) {
        Some(product) => {
            let inflation = omega.powi(2 * cycle.len() as i32);
            let value = product * inflation;
            Condition {
                kind: ConditionKind::Cycle,
                players,
                coefficient: Some(inflation.as_f64()),
                value: value.as_f64(),
                margin: (T::one() - value).as_f64(),
                evidence: Evidence::Analytic,
            }
        }
        None => {
            let worst = s_grid
                .iter()
                .map(|&s| cycle_composition(gains, cycle, omega, s) / s)
                .fold(T::zero(), T::max);
            Condition {
                kind: ConditionKind::Cycle,
                players,
                coefficient: None,
                value: worst.as_f64(),
                margin: (T::one() - worst).as_f64(),
                evidence: Evidence::Sampled,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaChoice<T> {
    pub omega: T,
    /// Supremum of admissible ω found (capped).
    pub omega_max: T,
    pub evidence: Evidence,
}

/// Finds some `ω > 1` for which the cyclic conditions hold.
///
/// All-linear gains: `ω_max = min_cycles (Π c)^{-1/(2p)}` capped at 10 and the
/// geometric mean `√ω_max` is returned. Otherwise the admissible boundary is
/// bisected over `(1, 10]` with the sampled check.
pub fn search_omega<T: Scalar>(
    gains: &GainMatrix<T>,
    s_grid: &[T],
) -> Result<Option<OmegaChoice<T>>> {
    check_matrix(gains)?;
    let cap = T::lit(OMEGA_CAP);
    let cycles = simple_cycles(gains.n());
    if gains.is_linear() {
        let mut omega_max = cap;
        for cycle in &cycles {
            let product = cycle_linear_product(gains, cycle).expect("linear");
            if product > T::zero() {
                let root = product.powf(-T::one() / T::of_usize(2 * cycle.len()));
                omega_max = omega_max.min(root);
            }
        }
        if omega_max <= T::one() {
            return Ok(None);
        }
        return Ok(Some(OmegaChoice {
            omega: omega_max.sqrt(),
            omega_max,
            evidence: Evidence::Analytic,
        }));
    }

    let passes =
        |omega: T| -> Result<bool> { Ok(check_cyclic_small_gain(gains, omega, s_grid)?.passed()) };
    let mut lo = T::one() + T::tol(1e-9);
    if !passes(lo)? {
        return Ok(None);
    }
    let omega_max = if passes(cap)? {
        cap
    } else {
        let mut hi = cap;
        for _ in 0..60 {
            let mid = (lo * hi).sqrt();
            if passes(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(Some(OmegaChoice {
        omega: omega_max.sqrt(),
        omega_max,
        evidence: Evidence::Sampled,
    }))
}
