use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::engine::simulate_fde_with;
use super::expect::{realize_at, CompiledRule, ExpectationRule};
use super::signals::{
    DelaySignal, DirectionSignal, InitialHistory, ThetaSignal, UncertaintyRealization,
};
use super::system::DeviationSystem;
use super::trajectory::TrajectoryGrid;
use crate::error::{Error, Result};
use crate::game::{deviation_inverse, Game};
use crate::scalar::{max_abs_diff, norm, Scalar};

/// Continuous adjustment `q_i' = μ_i (f_i(exp_i(t)) - q_i)` with backward-looking
/// expectation rules on every ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeModel<T> {
    pub rates: Vec<T>,
    /// `rules[i][j]` is the rule player `i` uses for player `j`; the diagonal is ignored.
    pub rules: Vec<Vec<Option<ExpectationRule<T>>>>,
}

impl<T: Scalar> OdeModel<T> {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.rates.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.rates.len(),
            });
        }
        if let Some(mu) = self
            .rates
            .iter()
            .find(|m| !(**m > T::zero() && m.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "rates must be positive, got {mu}"
            )));
        }
        if self.rules.len() != n || self.rules.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "rules must form an {n}x{n} table"
            )));
        }
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                match &self.rules[i][j] {
                    Some(rule) => rule.validate()?,
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "missing rule ({}, {})",
                            i + 1,
                            j + 1
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// `max_i exp(-μ_i r)`.
    pub fn theta_bound(&self, r: T) -> T {
        self.rates
            .iter()
            .map(|&mu| (-mu * r).exp())
            .fold(T::zero(), T::max)
    }
}

struct OdeRun<T> {
    trajectory: TrajectoryGrid<T>,
    /// Raw best reply per stepped node, `steps × total`.
    reply: Vec<Vec<T>>,
    /// Expectations per stepped node and observer, each a full profile.
    expectations: Vec<Vec<Vec<T>>>,
}

/// Integrates the model with one exact exponential step per grid interval,
/// holding the best reply at its value at the right node. Expectation rules
/// must look back at least one step.
pub fn simulate_ode<T: Scalar, G: Game<T> + ?Sized>(
    model: &OdeModel<T>,
    system: &DeviationSystem<'_, T, G>,
    history: &InitialHistory<T>,
    config: &SimConfig<T>,
) -> Result<TrajectoryGrid<T>> {
    Ok(integrate(model, system, history, config)?.trajectory)
}

/// Runs the ODE for `warmup` time units from `start` and returns its last
/// window as a history. The result is a solution segment, so a run started
/// from it has no kink at `t = 0`.
pub fn settled_history<T: Scalar, G: Game<T> + ?Sized>(
    model: &OdeModel<T>,
    system: &DeviationSystem<'_, T, G>,
    start: &InitialHistory<T>,
    config: &SimConfig<T>,
    warmup: T,
) -> Result<InitialHistory<T>> {
    let warm = SimConfig {
        horizon: warmup,
        ..*config
    };
    let steps = warm.steps()?;
    if steps.horizon < steps.window {
        return Err(Error::InvalidArgument(
            "warmup must cover at least one window".into(),
        ));
    }
    let traj = simulate_ode(model, system, start, &warm)?;
    let last = traj.nodes();
    Ok(InitialHistory::Nodes(
        (last - steps.window - 1..last)
            .map(|k| traj.x(k).to_vec())
            .collect(),
    ))
}

fn integrate<T: Scalar, G: Game<T> + ?Sized>(
    model: &OdeModel<T>,
    system: &DeviationSystem<'_, T, G>,
    history: &InitialHistory<T>,
    config: &SimConfig<T>,
) -> Result<OdeRun<T>> {
    let steps = config.steps()?;
    let game = system.game();
    let layout = system.layout().clone();
    let n = layout.players();
    let total = layout.total();
    model.validate(n)?;
    let mut rules: Vec<Option<CompiledRule<T>>> = vec![None; n * n];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let rule = model.rules[i][j]
                .as_ref()
                .expect("validated")
                .compile(config.h)?;
            if rule.min_lag() < 1 || rule.max_lag() > steps.window {
                return Err(Error::InvalidArgument(format!(
                    "rule ({}, {}) must use lags in [h, T]",
                    i + 1,
                    j + 1
                )));
            }
            rules[i * n + j] = Some(rule);
        }
    }
    let rows = history.expand(steps.window + 1, total)?;
    let mut traj = TrajectoryGrid::with_history(
        config.h,
        steps,
        layout.clone(),
        system.mode(),
        system.q_star().to_vec(),
        system.scale().to_vec(),
        &rows,
    );
    for (k, row) in rows.iter().enumerate() {
        for i in 0..n {
            if !system.in_range(i, layout.slice(row, i)) {
                return Err(Error::RangeViolation {
                    t: traj.time(k).as_f64(),
                    player: i + 1,
                    detail: "initial history outside the admissible set".into(),
                });
            }
        }
    }
    let decay: Vec<T> = model
        .rates
        .iter()
        .map(|&mu| (-mu * config.h).exp())
        .collect();
    let scale = system.scale();
    let q_star = system.q_star();
    let reply_star = system.reply_star();
    let mut replies = Vec::with_capacity(steps.horizon);
    let mut expectations = Vec::with_capacity(steps.horizon);
    let mut next = vec![T::zero(); total];
    for step in 0..steps.horizon {
        let node = steps.window + 1 + step;
        let mut reply = vec![T::zero(); total];
        let mut exps = Vec::with_capacity(n);
        for i in 0..n {
            let mut exp = q_star.to_vec();
            for j in (0..n).filter(|&j| j != i) {
                let range = layout.range(j);
                let dev = rules[i * n + j].as_ref().expect("compiled").apply(|lag| {
                    traj.x_player(node - lag, j)
                        .iter()
                        .zip(&scale[range.clone()])
                        .map(|(&x, &k)| x * k)
                        .collect()
                });
                for ((e, &q), v) in exp[range.clone()]
                    .iter_mut()
                    .zip(&q_star[range.clone()])
                    .zip(dev)
                {
                    *e = q + v;
                }
            }
            let f = game.best_reply(i, &exp);
            let range = layout.range(i);
            for (k, c) in range.clone().enumerate() {
                let prev = traj.x(node - 1)[c] * scale[c];
                let drive = f[k] - reply_star[c];
                next[c] = (decay[i] * prev + (T::one() - decay[i]) * drive) / scale[c];
            }
            reply[range].copy_from_slice(&f);
            exps.push(exp);
        }
        traj.set(node, &next);
        replies.push(reply);
        expectations.push(exps);
    }
    Ok(OdeRun {
        trajectory: traj,
        reply: replies,
        expectations,
    })
}

/// ODE run against the functional-difference form with `θ_i ≡ exp(-μ_i r)`, `τ_i ≡ r`.
#[derive(Debug, Clone)]
pub struct OdeEmbedding<T> {
    /// `max_i exp(-μ_i r)`.
    pub theta_bound: T,
    pub ode: TrajectoryGrid<T>,
    /// Starts at ODE time `r`; its `t = 0` is ODE time `r`.
    pub fde: TrajectoryGrid<T>,
    pub realization: UncertaintyRealization<T>,
    /// Largest node discrepancy in action units.
    pub max_discrepancy: T,
}

/// Runs the ODE, then the functional-difference form from ODE time `r` on.
///
/// At each node the integral form asks for a reply at some intermediate time
/// `g ∈ (t - r, t]`. On the grid the expectations are held per step, so `g` is
/// taken as the node whose best reply lies closest to the value that would put
/// the functional-difference path exactly on the ODE path given its own delayed
/// state. The expectation at `g` becomes a direction against the window
/// `[t - r - D, t - h]`, where `D` is the longest rule lag; when the tracking
/// error leaves it a hair outside that window's bound it is pulled radially
/// onto the bound.
pub fn embed_ode<T: Scalar, G: Game<T> + ?Sized>(
    model: &OdeModel<T>,
    system: &DeviationSystem<'_, T, G>,
    history: &InitialHistory<T>,
    config: &SimConfig<T>,
) -> Result<OdeEmbedding<T>> {
    let run = integrate(model, system, history, config)?;
    let ode = run.trajectory;
    let steps = ode.grid;
    if steps.horizon < steps.r {
        return Err(Error::InvalidArgument("horizon must reach r".into()));
    }
    let game = system.game();
    let layout = system.layout().clone();
    let n = layout.players();
    let total = layout.total();
    let q_star = system.q_star();
    let scale = system.scale();
    let h = config.h;
    let rs = steps.r;
    let lag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| {
            model.rules[i][j]
                .as_ref()
                .expect("validated")
                .compile(h)
                .map(|c| c.max_lag())
        })
        .try_fold(0, |acc, l| l.map(|l| acc.max(l)))?;
    if lag > steps.window {
        return Err(Error::InvalidArgument(
            "rule lags exceed the ODE history".into(),
        ));
    }
    let fde_window = rs + lag;
    let fde_config = SimConfig::new(
        h,
        h,
        h * T::of_usize(fde_window),
        h * T::of_usize(steps.horizon - rs),
        0,
    );
    let theta: Vec<T> = model
        .rates
        .iter()
        .map(|&mu| (-mu * config.r).exp())
        .collect();
    let theta_bound = theta.iter().copied().fold(T::zero(), T::max);

    // ODE node of FDE node k
    let shift = steps.window + rs - fde_window;
    let init = InitialHistory::Nodes(
        (0..=fde_window)
            .map(|k| ode.x(shift + k).to_vec())
            .collect(),
    );
    let placeholder = UncertaintyRealization {
        theta_bound,
        theta: ThetaSignal::Constant {
            values: theta.clone(),
        },
        tau: DelaySignal::Constant { steps: vec![rs; n] },
        d: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (i != j).then(|| DirectionSignal::Constant {
                            value: vec![T::zero(); layout.dim(j)],
                        })
                    })
                    .collect()
            })
            .collect(),
    };

    let mut hook = |node: usize, i: usize, fde: &TrajectoryGrid<T>, sups: &[T]| -> Result<Vec<T>> {
        let at = shift + node;
        let range = layout.range(i);
        let w = theta[i];
        let target: Vec<T> = range
            .clone()
            .map(|c| {
                let now = ode.x(at)[c] * scale[c];
                let before = fde.x(node - rs)[c] * scale[c];
                (now - w * before) / (T::one() - w) + system.reply_star()[c]
            })
            .collect();
        let g = (at - rs + 1..=at)
            .min_by(|&a, &b| {
                let da = distance(&run.reply[a - steps.window - 1][range.clone()], &target);
                let db = distance(&run.reply[b - steps.window - 1][range.clone()], &target);
                da.partial_cmp(&db).expect("finite replies")
            })
            .expect("r >= 1 step");
        let exp = &run.expectations[g - steps.window - 1][i];
        let mut row = vec![T::zero(); total];
        for j in (0..n).filter(|&j| j != i) {
            let rj = layout.range(j);
            let bound = system.to_raw_sup(j, sups[j]);
            let mut gap: Vec<T> = exp[rj.clone()]
                .iter()
                .zip(&q_star[rj.clone()])
                .map(|(&e, &q)| e - q)
                .collect();
            let len = norm(&gap);
            if len > bound {
                let shrink = if len > T::zero() {
                    bound / len
                } else {
                    T::zero()
                };
                gap.iter_mut().for_each(|v| *v *= shrink);
            }
            let e: Vec<T> = gap
                .iter()
                .zip(&q_star[rj.clone()])
                .map(|(&v, &q)| q + v)
                .collect();
            let d = realize_at(
                &e,
                &q_star[rj.clone()],
                bound,
                game.action_box(j),
                node,
                i,
                j,
            )?;
            row[rj].copy_from_slice(&d);
        }
        Ok(row)
    };
    let fde = simulate_fde_with(system, &init, &placeholder, &fde_config, &mut hook)?;

    let record = fde.signals.as_ref().expect("stepped run records signals");
    let fde_steps = fde.grid.horizon;
    let d = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (i != j).then(|| DirectionSignal::Scripted {
                        values: (0..fde_steps)
                            .map(|s| {
                                record.d[(s * n + i) * total..(s * n + i + 1) * total]
                                    [layout.range(j)]
                                .to_vec()
                            })
                            .collect(),
                    })
                })
                .collect()
        })
        .collect();
    let realization = UncertaintyRealization { d, ..placeholder };
    let mut max_discrepancy = T::zero();
    for k in fde.origin() + 1..fde.nodes() {
        let a = deviation_inverse(game, fde.x(k), q_star, system.mode())?;
        let b = deviation_inverse(game, ode.x(shift + k), q_star, system.mode())?;
        max_discrepancy = max_discrepancy.max(max_abs_diff(&a, &b));
    }
    Ok(OdeEmbedding {
        theta_bound,
        ode,
        fde,
        realization,
        max_discrepancy,
    })
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    norm(&a.iter().zip(b).map(|(&x, &y)| x - y).collect::<Vec<_>>())
}

/// Least-squares slope of `ln err` against `ln h`.
pub fn observed_order(h: &[f64], err: &[f64]) -> Option<f64> {
    if h.len() != err.len() || h.len() < 2 || err.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}
