use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::general::{stacked_reply, Game};
use crate::error::{Error, Result};
use crate::scalar::{max_abs_diff, Scalar};

/// Damped best-reply iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// Cournot constants available once the equilibrium is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CournotEquilibrium<T> {
    /// `L_i = q*_i / Q_i`.
    #[serde(rename = "L")]
    pub l: Vec<T>,
    /// `M_i = (ab - c_i)/((2b + K_i) Q_i)`.
    #[serde(rename = "M")]
    pub m: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashPoint<T> {
    pub q_star: Vec<T>,
    /// `max_k |F(q*)_k - q*_k|`.
    pub residual: T,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cournot: Option<CournotEquilibrium<T>>,
}

impl<T: Scalar> NashPoint<T> {
    /// Wraps a known point, computing its residual and Cournot constants.
    pub fn at<G: Game<T> + ?Sized>(game: &G, q: Vec<T>) -> Result<Self> {
        let residual = fixed_point_residual(game, &q)?;
        let cournot = cournot_constants(game, &q);
        Ok(Self {
            q_star: q,
            residual,
            iterations: 0,
            cournot,
        })
    }
}

/// `max_k |F(q)_k - q_k|` for a feasible `q`.
pub fn fixed_point_residual<T: Scalar, G: Game<T> + ?Sized>(game: &G, q: &[T]) -> Result<T> {
    let f = super::general::best_reply_map(game, q)?;
    Ok(max_abs_diff(&f, q))
}

fn cournot_constants<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    q: &[T],
) -> Option<CournotEquilibrium<T>> {
    let c = game.as_cournot()?;
    let l = q
        .iter()
        .zip(c.capacities())
        .map(|(&q, &cap)| q / cap)
        .collect();
    let m = (0..c.n()).map(|i| c.m_constant(i)).collect();
    Some(CournotEquilibrium { l, m })
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    Ok(())
}

/// Iterates `q <- (1 - δ) q + δ F(q)` until `max |F(q) - q| <= tol`.
///
/// The residual is checked before every update, so a start point that is
/// already a fixed point returns with zero iterations.
pub fn solve_nash_iterate<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    q0: &[T],
    opts: &SolverOptions,
) -> Result<NashPoint<T>> {
    check_options(opts)?;
    let layout = game.layout();
    if q0.len() != layout.total() {
        return Err(Error::DimensionMismatch {
            expected: layout.total(),
            got: q0.len(),
        });
    }
    if !game.contains(q0, T::tol(1e-12)) {
        return Err(Error::Infeasible(format!("start point {q0:?} outside S")));
    }
    let (q, residual, iterations) = iterate(game, q0.to_vec(), opts);
    if residual > T::tol(opts.tol) {
        return Err(Error::MaxIterExceeded {
            iterations,
            residual: residual.as_f64(),
            last: q.iter().map(|v| v.as_f64()).collect(),
        });
    }
    let cournot = cournot_constants(game, &q);
    Ok(NashPoint {
        q_star: q,
        residual,
        iterations,
        cournot,
    })
}

fn iterate<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    mut q: Vec<T>,
    opts: &SolverOptions,
) -> (Vec<T>, T, usize) {
    let delta = T::lit(opts.damping);
    let keep = T::one() - delta;
    let tol = T::tol(opts.tol);
    let mut iterations = 0;
    loop {
        let f = stacked_reply(game, &q);
        let residual = max_abs_diff(&f, &q);
        if residual <= tol || iterations >= opts.max_iter {
            return (q, residual, iterations);
        }
        for (x, y) in q.iter_mut().zip(&f) {
            *x = keep * *x + delta * *y;
        }
        iterations += 1;
    }
}

/// Settings of the grid fixed-point oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub resolution: usize,
    pub cluster_tol: f64,
    pub budget: usize,
    pub solver: SolverOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            resolution: 21,
            cluster_tol: 1e-6,
            budget: 1_000_000,
            solver: SolverOptions {
                damping: 0.5,
                tol: 1e-12,
                max_iter: 20_000,
            },
        }
    }
}

/// Seeds damped iteration from every node of a uniform grid over `S` and
/// returns the distinct limits.
///
/// Limits within `cluster_tol` (max norm) of an earlier one are merged; the
/// earliest seed in lexicographic grid order represents the cluster. Seeds that
/// do not converge are dropped.
pub fn find_fixed_points_grid<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    resolution: usize,
    cluster_tol: f64,
) -> Result<Vec<NashPoint<T>>> {
    find_fixed_points_with(
        game,
        &FixedPointOptions {
            resolution,
            cluster_tol,
            ..Default::default()
        },
    )
}

pub fn find_fixed_points_with<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    opts: &FixedPointOptions,
) -> Result<Vec<NashPoint<T>>> {
    check_options(&opts.solver)?;
    if opts.resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "resolution must be >= 2, got {}",
            opts.resolution
        )));
    }
    let layout = game.layout();
    let dim = layout.total();
    let seeds = u32::try_from(dim)
        .ok()
        .and_then(|d| opts.resolution.checked_pow(d))
        .filter(|&s| s <= opts.budget)
        .ok_or(Error::BudgetExceeded {
            requested: opts.resolution.saturating_pow(dim as u32),
            budget: opts.budget,
        })?;

    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for i in 0..layout.players() {
        let b = game.action_box(i);
        lo.extend_from_slice(&b.lo);
        hi.extend_from_slice(&b.hi);
    }
    let steps = T::of_usize(opts.resolution - 1);
    let seed_point = |index: usize| -> Vec<T> {
        // last coordinate varies fastest
        let mut rem = index;
        let mut q = vec![T::zero(); dim];
        for k in (0..dim).rev() {
            let c = rem % opts.resolution;
            rem /= opts.resolution;
            q[k] = lo[k] + (hi[k] - lo[k]) * T::of_usize(c) / steps;
        }
        q
    };

    let tol = T::tol(opts.solver.tol);
    let limits: Vec<Option<(Vec<T>, T, usize)>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let (q, res, it) = iterate(game, seed_point(s), &opts.solver);
            (res <= tol).then(|| polish(game, q, res, it))
        })
        .collect();

    let cluster = T::lit(opts.cluster_tol);
    let mut found: Vec<NashPoint<T>> = Vec::new();
    for (q, residual, iterations) in limits.into_iter().flatten() {
        if found.iter().all(|p| max_abs_diff(&p.q_star, &q) > cluster) {
            let cournot = cournot_constants(game, &q);
            found.push(NashPoint {
                q_star: q,
                residual,
                iterations,
                cournot,
            });
        }
    }
    Ok(found)
}

/// One undamped step when it does not increase the residual.
fn polish<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    q: Vec<T>,
    res: T,
    it: usize,
) -> (Vec<T>, T, usize) {
    let f = stacked_reply(game, &q);
    let f_res = max_abs_diff(&stacked_reply(game, &f), &f);
    if f_res <= res {
        (f, f_res, it + 1)
    } else {
        (q, res, it)
    }
}

/// Coordinates of deviation variables.
///
/// `Scaled` divides by capacity (`x_i = (q_i - q*_i)/Q_i`) and is available for
/// Cournot games only; `Raw` uses `x_i = q_i - q*_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationMode {
    #[default]
    Scaled,
    Raw,
}

impl std::fmt::Display for DeviationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeviationMode::Scaled => "scaled",
            DeviationMode::Raw => "raw",
        })
    }
}

/// Per-coordinate divisor of the deviation transform.
pub fn deviation_scale<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    mode: DeviationMode,
) -> Result<Vec<T>> {
    match mode {
        DeviationMode::Raw => Ok(vec![T::one(); game.layout().total()]),
        DeviationMode::Scaled => game
            .as_cournot()
            .map(|c| c.capacities().to_vec())
            .ok_or_else(|| {
                Error::InvalidArgument("scaled deviations require a Cournot game".into())
            }),
    }
}

pub fn deviation_transform<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    q: &[T],
    q_star: &[T],
    mode: DeviationMode,
) -> Result<Vec<T>> {
    let scale = deviation_scale(game, mode)?;
    check_len(scale.len(), q)?;
    check_len(scale.len(), q_star)?;
    Ok(q.iter()
        .zip(q_star)
        .zip(&scale)
        .map(|((&q, &s), &k)| (q - s) / k)
        .collect())
}

pub fn deviation_inverse<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    x: &[T],
    q_star: &[T],
    mode: DeviationMode,
) -> Result<Vec<T>> {
    let scale = deviation_scale(game, mode)?;
    check_len(scale.len(), x)?;
    check_len(scale.len(), q_star)?;
    Ok(x.iter()
        .zip(q_star)
        .zip(&scale)
        .map(|((&x, &s), &k)| s + k * x)
        .collect())
}

fn check_len<T>(expected: usize, v: &[T]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}
