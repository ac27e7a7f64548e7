use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{GridSteps, SimConfig};
use super::expect::{realize_at, CompiledRule};
use super::signals::{
    DelaySignal, DirectionSignal, InitialHistory, ThetaSignal, UncertaintyRealization,
};
use super::system::DeviationSystem;
use super::trajectory::{SignalRecord, TrajectoryGrid};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::scalar::{norm, Scalar};

/// Disjoint player groups `J_1, …, J_m` covering every player.
///
/// A link `i -> j` is rational (window `[t-T, t]`) when `j` sits in a strictly
/// higher group than `i`; every other link is consistent (`[t-T, t-r]`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerAssignment {
    layers: Vec<Vec<usize>>,
    level: Vec<usize>,
}

impl LayerAssignment {
    /// `layers[l]` lists the 0-based players of `J_{l+1}`.
    pub fn new(layers: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Partition("at least one layer required".into()));
        }
        let mut level = vec![usize::MAX; n];
        for (l, group) in layers.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Partition(format!("layer J_{} is empty", l + 1)));
            }
            for &i in group {
                if i >= n {
                    return Err(Error::Partition(format!(
                        "player {} does not exist (n = {n})",
                        i + 1
                    )));
                }
                if level[i] != usize::MAX {
                    return Err(Error::Partition(format!(
                        "player {} appears in J_{} and J_{}",
                        i + 1,
                        level[i] + 1,
                        l + 1
                    )));
                }
                level[i] = l;
            }
        }
        if let Some(i) = level.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Partition(format!(
                "player {} belongs to no layer",
                i + 1
            )));
        }
        let layers = layers
            .into_iter()
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        Ok(Self { layers, level })
    }

    /// Same as [`new`](Self::new) with 1-based player labels.
    pub fn from_labels(layers: &[Vec<usize>], n: usize) -> Result<Self> {
        let zero_based = layers
            .iter()
            .map(|g| {
                g.iter()
                    .map(|&i| {
                        i.checked_sub(1)
                            .ok_or_else(|| Error::Partition("player labels start at 1".into()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based, n)
    }

    pub fn single(n: usize) -> Self {
        Self::new(vec![(0..n).collect()], n).expect("one layer with every player")
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    /// 0-based index of the group containing player `i`.
    pub fn level(&self, i: usize) -> usize {
        self.level[i]
    }

    pub fn is_rational(&self, i: usize, j: usize) -> bool {
        self.level[j] > self.level[i]
    }

    /// Resolution order: `J_m` first, down to `J_1`.
    pub fn order(&self) -> Vec<usize> {
        self.layers.iter().rev().flatten().copied().collect()
    }
}

pub(crate) struct LinkPlan {
    order: Vec<usize>,
    rational: Vec<bool>,
    n: usize,
}

impl LinkPlan {
    fn consistent(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            rational: vec![false; n * n],
            n,
        }
    }

    fn layered(layers: &LayerAssignment, n: usize) -> Self {
        let rational = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| layers.is_rational(i, j))
            .collect();
        Self {
            order: layers.order(),
            rational,
            n,
        }
    }

    fn rational(&self, i: usize, j: usize) -> bool {
        self.rational[i * self.n + j]
    }
}

/// Simulates the deviation equations by the method of steps with every
/// expectation consistent (window `[t-T, t-r]`).
pub fn simulate_fde<T: Scalar, G: Game<T> + ?Sized>(
    system: &DeviationSystem<'_, T, G>,
    history: &InitialHistory<T>,
    realization: &UncertaintyRealization<T>,
    config: &SimConfig<T>,
) -> Result<TrajectoryGrid<T>> {
    run(
        system,
        history,
        realization,
        config,
        &LinkPlan::consistent(system.players()),
        None,
    )
}

/// Simulates the layered system: groups are resolved from `J_m` down to `J_1`
/// at every node, so rational links read values already computed this step.
pub fn simulate_layered<T: Scalar, G: Game<T> + ?Sized>(
    system: &DeviationSystem<'_, T, G>,
    history: &InitialHistory<T>,
    realization: &UncertaintyRealization<T>,
    layers: &LayerAssignment,
    config: &SimConfig<T>,
) -> Result<TrajectoryGrid<T>> {
    let n = system.players();
    if layers.level.len() != n {
        return Err(Error::Partition(format!(
            "assignment covers {} players, game has {n}",
            layers.level.len()
        )));
    }
    run(
        system,
        history,
        realization,
        config,
        &LinkPlan::layered(layers, n),
        None,
    )
}

struct Draws<T> {
    theta: Vec<T>,
    tau: Vec<usize>,
    /// `n × total`, lazy links left at zero.
    d: Vec<T>,
}

fn unit_ball_sample<T: Scalar>(rng: &mut ChaCha8Rng, dim: usize) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return v.into_iter().map(T::lit).collect();
        }
    }
}

fn draw<T: Scalar>(
    realization: &UncertaintyRealization<T>,
    rng: &mut ChaCha8Rng,
    step: usize,
    steps: &GridSteps,
    layout: &crate::game::Layout,
) -> Draws<T> {
    let n = layout.players();
    let total = layout.total();
    let bound = realization.theta_bound.as_f64();
    let theta = match &realization.theta {
        ThetaSignal::Constant { values } => values.clone(),
        ThetaSignal::Seeded => (0..n).map(|_| T::lit(rng.gen_range(0.0..=bound))).collect(),
        ThetaSignal::Scripted { values } => values[step].clone(),
    };
    let tau = match &realization.tau {
        DelaySignal::Constant { steps } => steps.clone(),
        DelaySignal::Seeded => (0..n)
            .map(|_| rng.gen_range(steps.r..=steps.window))
            .collect(),
        DelaySignal::Scripted { steps } => steps[step].clone(),
    };
    let mut d = vec![T::zero(); n * total];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let block = &mut d[i * total..(i + 1) * total][layout.range(j)];
            match realization.direction(i, j).expect("validated") {
                DirectionSignal::Constant { value } => block.copy_from_slice(value),
                DirectionSignal::Seeded => {
                    block.copy_from_slice(&unit_ball_sample::<T>(rng, layout.dim(j)))
                }
                DirectionSignal::Scripted { values } => block.copy_from_slice(&values[step]),
                DirectionSignal::AdversarialSign | DirectionSignal::Rule { .. } => {}
            }
        }
    }
    Draws { theta, tau, d }
}

/// Supplies the whole direction row of player `i` at a node from the
/// trajectory so far and the link suprema (mode units).
pub(crate) type DirectionHook<'a, T> =
    &'a mut dyn FnMut(usize, usize, &TrajectoryGrid<T>, &[T]) -> Result<Vec<T>>;

/// [`simulate_fde`] with directions chosen online by `hook`; the recorded
/// signals replay the run as a scripted realization.
pub(crate) fn simulate_fde_with<T: Scalar, G: Game<T> + ?Sized>(
    system: &DeviationSystem<'_, T, G>,
    history: &InitialHistory<T>,
    realization: &UncertaintyRealization<T>,
    config: &SimConfig<T>,
    hook: DirectionHook<'_, T>,
) -> Result<TrajectoryGrid<T>> {
    run(
        system,
        history,
        realization,
        config,
        &LinkPlan::consistent(system.players()),
        Some(hook),
    )
}

fn run<T: Scalar, G: Game<T> + ?Sized>(
    system: &DeviationSystem<'_, T, G>,
    history: &InitialHistory<T>,
    realization: &UncertaintyRealization<T>,
    config: &SimConfig<T>,
    plan: &LinkPlan,
    mut hook: Option<DirectionHook<'_, T>>,
) -> Result<TrajectoryGrid<T>> {
    let steps = config.steps()?;
    let layout = system.layout().clone();
    let n = layout.players();
    let total = layout.total();
    realization.validate(&layout, &steps)?;

    let mut rules: Vec<Option<CompiledRule<T>>> = vec![None; n * n];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            if let Some(DirectionSignal::Rule { rule }) = realization.direction(i, j) {
                let compiled = rule.compile(config.h)?;
                let lo = if plan.rational(i, j) { 0 } else { steps.r };
                if compiled.min_lag() < lo || compiled.max_lag() > steps.window {
                    return Err(Error::InvalidArgument(format!(
                        "rule ({}, {}) uses lags outside its window [{lo}, {}] steps",
                        i + 1,
                        j + 1,
                        steps.window
                    )));
                }
                rules[i * n + j] = Some(compiled);
            }
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
                    detail: format!(
                        "initial history {:?} outside the admissible set",
                        layout.slice(row, i)
                    ),
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut record = SignalRecord {
        theta: Vec::with_capacity(steps.horizon * n),
        tau: Vec::with_capacity(steps.horizon * n),
        d: Vec::with_capacity(steps.horizon * n * total),
    };
    let step_tol = T::tol(1e-12);
    let mut sups = vec![T::zero(); n];
    let mut out = vec![T::zero(); total];
    let mut resolved = vec![false; n];

    for step in 0..steps.horizon {
        let node = steps.window + 1 + step;
        let mut draws = draw(realization, &mut rng, step, &steps, &layout);
        resolved.iter_mut().for_each(|r| *r = false);

        for &i in &plan.order {
            for j in (0..n).filter(|&j| j != i) {
                let rational = plan.rational(i, j);
                if rational && !resolved[j] {
                    return Err(Error::Ordering(format!(
                        "player {} reads player {} before it is resolved at node {node}",
                        i + 1,
                        j + 1
                    )));
                }
                let hi = if rational { 0 } else { steps.r };
                sups[j] = traj.window_sup(j, node, steps.window, hi)?;
                let signal = realization.direction(i, j).expect("validated");
                if !signal.is_lazy() {
                    continue;
                }
                let dir = match signal {
                    DirectionSignal::AdversarialSign => {
                        adversarial(&traj, j, node, steps.window, hi, sups[j])
                    }
                    DirectionSignal::Rule { .. } => {
                        let rule = rules[i * n + j].as_ref().expect("compiled");
                        let range = layout.range(j);
                        let dev = rule.apply(|lag| {
                            traj.x_player(node - lag, j)
                                .iter()
                                .zip(&system.scale()[range.clone()])
                                .map(|(&x, &k)| x * k)
                                .collect()
                        });
                        let exp: Vec<T> = system.q_star()[range.clone()]
                            .iter()
                            .zip(&dev)
                            .map(|(&q, &v)| q + v)
                            .collect();
                        let raw_sup = system.to_raw_sup(j, sups[j]);
                        realize_at(
                            &exp,
                            &system.q_star()[range],
                            raw_sup,
                            system.game().action_box(j),
                            node,
                            i,
                            j,
                        )?
                    }
                    _ => unreachable!(),
                };
                draws.d[i * total..(i + 1) * total][layout.range(j)].copy_from_slice(&dir);
            }

            if let Some(hook) = hook.as_mut() {
                let row = hook(node, i, &traj, &sups)?;
                if row.len() != total {
                    return Err(Error::DimensionMismatch {
                        expected: total,
                        got: row.len(),
                    });
                }
                draws.d[i * total..(i + 1) * total].copy_from_slice(&row);
            }
            let theta = draws.theta[i];
            let delayed = traj.x_player(node - draws.tau[i], i).to_vec();
            let d_row = &draws.d[i * total..(i + 1) * total];
            let xi = &mut out[layout.range(i)];
            system.evaluate(i, theta, &delayed, d_row, &sups, xi);

            let t = traj.time(node).as_f64();
            if !system.in_range(i, xi) {
                return Err(Error::RangeViolation {
                    t,
                    player: i + 1,
                    detail: format!("x = {xi:?} left the admissible set"),
                });
            }
            if system.step_bound_coefficient(i, (i + 1) % n).is_some() {
                let own = traj.window_sup(i, node, steps.window, steps.r)?;
                let coupling: T = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| system.step_bound_coefficient(i, j).unwrap_or(T::zero()) * sups[j])
                    .sum();
                let bound = theta * own + (T::one() - theta) * coupling;
                let size = norm(xi);
                if size > bound + step_tol {
                    return Err(Error::RangeViolation {
                        t,
                        player: i + 1,
                        detail: format!(
                            "|x| = {:e} exceeds the per-step bound {:e}",
                            size.as_f64(),
                            bound.as_f64()
                        ),
                    });
                }
            }
            traj.set_player(node, i, xi);
            resolved[i] = true;
        }
        record.theta.extend_from_slice(&draws.theta);
        record.tau.extend_from_slice(&draws.tau);
        record.d.extend_from_slice(&draws.d);
    }
    traj.signals = Some(record);
    Ok(traj)
}

/// Unit direction of the latest node in the window attaining `sup`; zero when `sup = 0`.
fn adversarial<T: Scalar>(
    traj: &TrajectoryGrid<T>,
    j: usize,
    node: usize,
    lo: usize,
    hi: usize,
    sup: T,
) -> Vec<T> {
    let dim = traj.layout.dim(j);
    if sup <= T::zero() {
        return vec![T::zero(); dim];
    }
    let at = (node - lo..=node - hi)
        .rev()
        .find(|&k| traj.norm(k, j) == sup)
        .expect("supremum attained on the grid");
    traj.x_player(at, j).iter().map(|&v| v / sup).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CournotGame, CournotParams, DeviationMode, NashPoint};

    fn cournot(c: f64, k: f64) -> CournotGame<f64> {
        CournotGame::validate(CournotParams {
            a: 10.0,
            b: 1.0,
            c: vec![c, c],
            k: vec![k, k],
            q: vec![5.0, 5.0],
        })
        .unwrap()
    }

    fn config(seed: u64) -> SimConfig<f64> {
        SimConfig {
            seed,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_history_stays_zero() {
        let game = cournot(1.0, 0.0);
        let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
        for mode in [DeviationMode::Scaled, DeviationMode::Raw] {
            let system = DeviationSystem::new(&game, &nash, mode).unwrap();
            for real in [
                UncertaintyRealization::seeded(2, 0.5),
                UncertaintyRealization::uniform(
                    2,
                    0.5,
                    ThetaSignal::Seeded,
                    DelaySignal::Seeded,
                    DirectionSignal::AdversarialSign,
                ),
            ] {
                let traj =
                    simulate_fde(&system, &InitialHistory::zero(2), &real, &config(7)).unwrap();
                assert!((0..traj.nodes()).all(|k| traj.x(k) == [0.0, 0.0]));
            }
        }
    }

    #[test]
    fn adversarial_run_decays_monotonically() {
        let game = cournot(1.0, 0.0);
        let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let real = UncertaintyRealization::uniform(
            2,
            0.5,
            ThetaSignal::Seeded,
            DelaySignal::Seeded,
            DirectionSignal::AdversarialSign,
        );
        let traj = simulate_fde(
            &system,
            &InitialHistory::Constant(vec![0.4, -0.6]),
            &real,
            &config(3),
        )
        .unwrap();
        let metric = traj.metric_series();
        assert!(metric.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*metric.last().unwrap() < 1e-6);
    }

    #[test]
    fn counterexample_is_stationary() {
        let game = cournot(8.0, -1.5);
        let nash = NashPoint::at(&game, vec![4.0 / 3.0, 4.0 / 3.0]).unwrap();
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let y = vec![-4.0 / 15.0, 8.0 / 15.0];
        let real = UncertaintyRealization::uniform(
            2,
            0.0,
            ThetaSignal::Constant {
                values: vec![0.0, 0.0],
            },
            DelaySignal::Constant { steps: vec![4, 4] },
            DirectionSignal::Constant { value: vec![1.0] },
        )
        .with_pair(1, 0, DirectionSignal::Constant { value: vec![-1.0] });
        let traj = simulate_fde(&system, &InitialHistory::Constant(y), &real, &config(0)).unwrap();
        assert!(traj.max_drift() <= 1e-12);
    }

    #[test]
    fn determinism_and_single_layer() {
        let game = cournot(1.0, 0.0);
        let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let real = UncertaintyRealization::seeded(2, 0.5);
        let init = InitialHistory::Constant(vec![0.2, -0.5]);
        let a = simulate_fde(&system, &init, &real, &config(11)).unwrap();
        let b = simulate_fde(&system, &init, &real, &config(11)).unwrap();
        let c = simulate_layered(
            &system,
            &init,
            &real,
            &LayerAssignment::single(2),
            &config(11),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let d = simulate_fde(&system, &init, &real, &config(12)).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn two_layers_converge() {
        let game = cournot(1.0, 0.0);
        let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let layers = LayerAssignment::from_labels(&[vec![1], vec![2]], 2).unwrap();
        assert!(layers.is_rational(0, 1) && !layers.is_rational(1, 0));
        assert_eq!(layers.order(), vec![1, 0]);
        let real = UncertaintyRealization::uniform(
            2,
            0.5,
            ThetaSignal::Seeded,
            DelaySignal::Seeded,
            DirectionSignal::AdversarialSign,
        );
        let traj = simulate_layered(
            &system,
            &InitialHistory::Constant(vec![0.4, -0.6]),
            &real,
            &layers,
            &config(5),
        )
        .unwrap();
        assert!(*traj.metric_series().last().unwrap() < 1e-6);
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(
            LayerAssignment::new(vec![vec![0, 1], vec![1]], 2),
            Err(Error::Partition(_))
        ));
        assert!(matches!(
            LayerAssignment::new(vec![vec![0]], 2),
            Err(Error::Partition(_))
        ));
        assert!(matches!(
            LayerAssignment::new(vec![vec![0, 2]], 2),
            Err(Error::Partition(_))
        ));
        assert!(matches!(
            LayerAssignment::from_labels(&[vec![0, 1]], 2),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn rule_directions_stay_consistent() {
        use crate::sim::expect::{ExpectationRule, Tap};
        let game = cournot(1.0, 0.0);
        let nash = NashPoint::at(&game, vec![3.0, 3.0]).unwrap();
        let system = DeviationSystem::new(&game, &nash, DeviationMode::Scaled).unwrap();
        let rule = ExpectationRule::WeightedDelay {
            blend: 0.9,
            taps: vec![
                Tap {
                    delay: 1.0,
                    weight: 0.5,
                },
                Tap {
                    delay: 2.0,
                    weight: 0.5,
                },
            ],
        };
        let real = UncertaintyRealization::uniform(
            2,
            0.3,
            ThetaSignal::Seeded,
            DelaySignal::Seeded,
            DirectionSignal::Rule { rule },
        );
        let traj = simulate_fde(
            &system,
            &InitialHistory::Constant(vec![0.4, -0.6]),
            &real,
            &config(1),
        )
        .unwrap();
        let rec = traj.signals.as_ref().unwrap();
        assert!(rec.d.iter().all(|d| d.abs() <= 1.0));
        assert!(*traj.metric_series().last().unwrap() < 1e-6);
    }
}
