use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::engine::simulate_fde;
use super::expect::realize_at;
use super::signals::{
    DelaySignal, DirectionSignal, InitialHistory, ThetaSignal, UncertaintyRealization,
};
use super::system::DeviationSystem;
use super::trajectory::TrajectoryGrid;
use crate::error::{Error, Result};
use crate::game::{deviation_inverse, deviation_transform, Game};
use crate::scalar::{max_abs_diff, norm, Scalar};

/// A value that is either fixed or given per discrete step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule<V> {
    Constant(V),
    Steps(Vec<V>),
}

impl<V> Schedule<V> {
    pub fn at(&self, k: usize) -> &V {
        match self {
            Schedule::Constant(v) => v,
            Schedule::Steps(vs) => &vs[k],
        }
    }

    fn entries(&self) -> &[V] {
        match self {
            Schedule::Constant(v) => std::slice::from_ref(v),
            Schedule::Steps(vs) => vs,
        }
    }

    fn covers(&self, steps: usize) -> bool {
        match self {
            Schedule::Constant(_) => true,
            Schedule::Steps(vs) => vs.len() >= steps,
        }
    }
}

/// Discrete-time adjustment with lagged expectations:
///
/// `q_i(k+1) = θ_i(k) q_i(k) + (1 - θ_i(k)) f_i(exp_i(k+1))`,
/// `exp_ij(k+1) = a_ij(k) Σ_l w_ijl(k) q_j(k-l) + (1 - a_ij(k)) q*_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel<T> {
    /// Lag depth `m`.
    pub lags: usize,
    /// `θ_i(k)`, one entry per player.
    pub theta: Schedule<Vec<T>>,
    /// `a_ij(k)`, `n × n`, diagonal ignored.
    pub blend: Schedule<Vec<Vec<T>>>,
    /// `w_ijl(k)`, `n × n × (m + 1)`, diagonal ignored.
    pub weights: Schedule<Vec<Vec<Vec<T>>>>,
}

impl<T: Scalar> DiscreteModel<T> {
    /// Naive best-reply dynamics: `θ = 0`, `a = 1`, all weight on the last value.
    pub fn naive(n: usize) -> Self {
        Self {
            lags: 0,
            theta: Schedule::Constant(vec![T::zero(); n]),
            blend: Schedule::Constant(vec![vec![T::one(); n]; n]),
            weights: Schedule::Constant(vec![vec![vec![T::one()]; n]; n]),
        }
    }

    pub fn validate(&self, n: usize, steps: usize) -> Result<()> {
        if !(self.theta.covers(steps) && self.blend.covers(steps) && self.weights.covers(steps)) {
            return Err(Error::InvalidArgument(format!(
                "schedules must cover {steps} steps"
            )));
        }
        for theta in self.theta.entries() {
            if theta.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: theta.len(),
                });
            }
            if let Some(t) = theta.iter().find(|t| !(**t >= T::zero() && **t < T::one())) {
                return Err(Error::InvalidArgument(format!(
                    "theta must lie in [0, 1), got {t}"
                )));
            }
        }
        for blend in self.blend.entries() {
            if blend.len() != n || blend.iter().any(|row| row.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: blend.len(),
                });
            }
            for (i, row) in blend.iter().enumerate() {
                for (j, &a) in row.iter().enumerate() {
                    if i != j && !(a >= T::zero() && a <= T::one()) {
                        return Err(Error::InvalidArgument(format!(
                            "a_{},{} = {a} outside [0, 1]",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        for weights in self.weights.entries() {
            if weights.len() != n || weights.iter().any(|row| row.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: weights.len(),
                });
            }
            for (i, row) in weights.iter().enumerate() {
                for (j, w) in row.iter().enumerate().filter(|(j, _)| *j != i) {
                    if w.len() != self.lags + 1 {
                        return Err(Error::DimensionMismatch {
                            expected: self.lags + 1,
                            got: w.len(),
                        });
                    }
                    if w.iter().any(|v| !(*v >= T::zero())) {
                        return Err(Error::InvalidArgument(format!(
                            "negative weight for pair ({}, {})",
                            i + 1,
                            j + 1
                        )));
                    }
                    let total: T = w.iter().copied().sum();
                    if (total - T::one()).abs() > T::tol(1e-12) {
                        return Err(Error::Normalization(format!(
                            "weights of pair ({}, {}) sum to {total}",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Expectation of player `j` held by `i` at step `k + 1`; `past(l)` returns `q_j(k - l)`.
    fn expectation<'a>(
        &self,
        k: usize,
        i: usize,
        j: usize,
        q_star: &[T],
        past: impl Fn(usize) -> &'a [T],
    ) -> Vec<T> {
        let a = self.blend.at(k)[i][j];
        let w = &self.weights.at(k)[i][j];
        let mut acc = vec![T::zero(); q_star.len()];
        for (l, &wl) in w.iter().enumerate() {
            for (s, &q) in acc.iter_mut().zip(past(l)) {
                *s += wl * q;
            }
        }
        acc.iter()
            .zip(q_star)
            .map(|(&s, &q)| a * s + (T::one() - a) * q)
            .collect()
    }
}

/// Iterates the discrete model. `history` lists `q(-m), …, q(0)`; returns `q(0), …, q(steps)`.
pub fn simulate_discrete<T: Scalar, G: Game<T> + ?Sized>(
    model: &DiscreteModel<T>,
    game: &G,
    q_star: &[T],
    history: &[Vec<T>],
    steps: usize,
) -> Result<Vec<Vec<T>>> {
    Ok(run_discrete(model, game, q_star, history, steps)?.0)
}

/// Path plus the expectations `exp_ij(k+1)` (flat, block `j`) per step and observer.
#[allow(clippy::type_complexity)]
fn run_discrete<T: Scalar, G: Game<T> + ?Sized>(
    model: &DiscreteModel<T>,
    game: &G,
    q_star: &[T],
    history: &[Vec<T>],
    steps: usize,
) -> Result<(Vec<Vec<T>>, Vec<Vec<Vec<T>>>)> {
    let layout = game.layout();
    let n = layout.players();
    model.validate(n, steps)?;
    if history.len() != model.lags + 1 {
        return Err(Error::DimensionMismatch {
            expected: model.lags + 1,
            got: history.len(),
        });
    }
    if q_star.len() != layout.total() {
        return Err(Error::DimensionMismatch {
            expected: layout.total(),
            got: q_star.len(),
        });
    }
    for q in history {
        if q.len() != layout.total() {
            return Err(Error::DimensionMismatch {
                expected: layout.total(),
                got: q.len(),
            });
        }
        if !game.contains(q, T::zero()) {
            return Err(Error::Infeasible(format!("history point {q:?} outside S")));
        }
    }
    // path[m + k] = q(k)
    let mut path: Vec<Vec<T>> = history.to_vec();
    let mut expectations = Vec::with_capacity(steps);
    for k in 0..steps {
        let theta = model.theta.at(k);
        let now = model.lags + k;
        let mut next = path[now].clone();
        let mut exp_k = Vec::with_capacity(n);
        for (i, &th) in theta.iter().enumerate().take(n) {
            let mut exp = q_star.to_vec();
            for j in (0..n).filter(|&j| j != i) {
                let range = layout.range(j);
                let e = model.expectation(k, i, j, &q_star[range.clone()], |l| {
                    &path[now - l][range.clone()]
                });
                exp[range].copy_from_slice(&e);
            }
            let reply = game.best_reply(i, &exp);
            for (slot, (&own, &f)) in layout
                .slice_mut(&mut next, i)
                .iter_mut()
                .zip(layout.slice(&path[now], i).iter().zip(&reply))
            {
                *slot = th * own + (T::one() - th) * f;
            }
            exp_k.push(exp);
        }
        path.push(next);
        expectations.push(exp_k);
    }
    Ok((path.split_off(model.lags), expectations))
}

/// Outcome of running a discrete model through the functional-difference form.
#[derive(Debug, Clone)]
pub struct DiscreteEmbedding<T> {
    pub realization: UncertaintyRealization<T>,
    pub config: SimConfig<T>,
    pub history: InitialHistory<T>,
    pub trajectory: TrajectoryGrid<T>,
    /// `q(0), …, q(steps)` of the discrete model.
    pub discrete: Vec<Vec<T>>,
    /// Largest `|q_fde(k) - q(k)|` over integer times, in action units.
    pub max_discrepancy: T,
}

/// Rewrites the discrete model as grid signals on `h = 1/p` with `r = h` and
/// `T = m + 1`, reruns [`simulate_fde`], and compares at integer times.
///
/// The grid node at offset `u` carries `q(⌈u/p⌉)`, so the step into `(k, k+1]`
/// uses `θ_i(k)`, a delay reaching back to node `kp`, and directions that
/// reproduce `exp_ij(k+1)` against the window `[t - T, t - h]`.
pub fn embed_discrete<T: Scalar, G: Game<T> + ?Sized>(
    model: &DiscreteModel<T>,
    system: &DeviationSystem<'_, T, G>,
    history: &[Vec<T>],
    steps: usize,
    p: usize,
) -> Result<DiscreteEmbedding<T>> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    let game = system.game();
    let layout = system.layout().clone();
    let n = layout.players();
    let q_star = system.q_star();
    let (discrete, expectations) = run_discrete(model, game, q_star, history, steps)?;

    let m = model.lags;
    let window = (m + 1) * p;
    let h = T::one() / T::of_usize(p);
    let config = SimConfig::new(h, h, T::of_usize(m + 1), T::of_usize(steps), 0);

    // q at node offset u (relative to t = 0), u in [-window, steps·p]
    let at = |u: isize| -> &[T] {
        let k = if u <= 0 {
            -((-u) / p as isize)
        } else {
            (u + p as isize - 1) / p as isize
        };
        let k = k.max(-(m as isize));
        if k <= 0 {
            &history[(m as isize + k) as usize]
        } else {
            &discrete[k as usize]
        }
    };
    let raw_dev = |u: isize, j: usize| -> T {
        let range = layout.range(j);
        let d: Vec<T> = at(u)[range.clone()]
            .iter()
            .zip(&q_star[range])
            .map(|(&q, &s)| q - s)
            .collect();
        norm(&d)
    };

    let nodes: Vec<Vec<T>> = (0..=window)
        .map(|k| {
            deviation_transform(
                game,
                at(k as isize - window as isize),
                q_star,
                system.mode(),
            )
        })
        .collect::<Result<_>>()?;
    let init = InitialHistory::Nodes(nodes);

    let mut thetas = Vec::with_capacity(steps * p);
    let mut taus = Vec::with_capacity(steps * p);
    let mut dirs: Vec<Vec<Vec<Vec<T>>>> = vec![vec![Vec::with_capacity(steps * p); n]; n];
    for s in 0..steps * p {
        let u = s as isize + 1;
        let k = s / p;
        thetas.push(model.theta.at(k).clone());
        taus.push(vec![s + 1 - k * p; n]);
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let sup = (u - window as isize..u)
                    .map(|v| raw_dev(v, j))
                    .fold(T::zero(), T::max);
                let range = layout.range(j);
                let d = realize_at(
                    &expectations[k][i][range.clone()],
                    &q_star[range],
                    sup,
                    game.action_box(j),
                    window + 1 + s,
                    i,
                    j,
                )?;
                dirs[i][j].push(d);
            }
        }
    }
    let bound = thetas.iter().flatten().copied().fold(T::zero(), T::max);
    let d = dirs
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, values)| (i != j).then_some(DirectionSignal::Scripted { values }))
                .collect()
        })
        .collect();
    let realization = UncertaintyRealization {
        theta_bound: bound,
        theta: ThetaSignal::Scripted { values: thetas },
        tau: DelaySignal::Scripted { steps: taus },
        d,
    };

    let trajectory = simulate_fde(system, &init, &realization, &config)?;
    let mut max_discrepancy = T::zero();
    for (k, q) in discrete.iter().enumerate().skip(1) {
        let node = trajectory.origin() + k * p;
        let fde = deviation_inverse(game, trajectory.x(node), q_star, system.mode())?;
        max_discrepancy = max_discrepancy.max(max_abs_diff(&fde, q));
    }
    Ok(DiscreteEmbedding {
        realization,
        config,
        history: init,
        trajectory,
        discrete,
        max_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CournotGame, CournotParams, DeviationMode, NashPoint};

    fn duopoly() -> CournotGame<f64> {
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
    fn naive_iterates() {
        let game = duopoly();
        let path = simulate_discrete(
            &DiscreteModel::naive(2),
            &game,
            &[3.0, 3.0],
            &[vec![0.0, 0.0]],
            3,
        )
        .unwrap();
        assert_eq!(path[1], vec![4.5, 4.5]);
        assert_eq!(path[2], vec![2.25, 2.25]);
        assert_eq!(path[3], vec![3.375, 3.375]);
    }

    #[test]
    fn weights_must_normalize() {
        let mut model = DiscreteModel::<f64>::naive(2);
        model.weights = Schedule::Constant(vec![vec![vec![0.9]; 2]; 2]);
        let err =
            simulate_discrete(&model, &duopoly(), &[3.0, 3.0], &[vec![0.0, 0.0]], 3).unwrap_err();
        assert!(matches!(err, Error::Normalization(_)));
    }

    #[test]
    fn embedding_with_lags_and_inertia() {
        let game = duopoly();
        let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
        let model = DiscreteModel {
            lags: 2,
            theta: Schedule::Steps((0..20).map(|k| vec![0.1 * (k % 4) as f64, 0.3]).collect()),
            blend: Schedule::Constant(vec![vec![0.8; 2]; 2]),
            weights: Schedule::Constant(vec![vec![vec![0.5, 0.25, 0.25]; 2]; 2]),
        };
        let history = vec![vec![5.0, 0.0], vec![1.0, 4.0], vec![0.0, 5.0]];
        for mode in [DeviationMode::Scaled, DeviationMode::Raw] {
            let system = DeviationSystem::new(&game, &nash, mode).unwrap();
            for p in [1, 3] {
                let emb = embed_discrete(&model, &system, &history, 20, p).unwrap();
                assert!(
                    emb.max_discrepancy <= 1e-12,
                    "{mode} p={p}: {}",
                    emb.max_discrepancy
                );
            }
        }
    }
}
