use anyhow::{ensure, Context, Result};
use dyngame::diag::{
    convergence_verdict, lyapunov_series, monitor_cournot, monitor_inequality, MonitorReport,
    Verdict,
};
use dyngame::gain::{
    check_cournot_small_gain, check_cyclic_small_gain, check_weighted_small_gain, default_s_grid,
    epsilon_weights, search_omega, search_weights_n3, SmallGainReport,
};
use dyngame::game::{
    deviation_transform, find_fixed_points_with, solve_nash_iterate, FixedPointOptions, NashPoint,
};
use dyngame::scalar::norm;
use dyngame::sim::{
    simulate_fde, simulate_layered, DelaySignal, DeviationSystem, DirectionSignal, InitialHistory,
    LayerAssignment, ThetaSignal, TrajectoryGrid, UncertaintyRealization,
};

use crate::config::{
    BuiltGame, DirectionKind, DirectionSpec, ExperimentConfig, InitialSpec, TauKind, ThetaKind,
};

/// Equilibrium used to centre the deviations: the declared one for linear
/// games, damped best-reply iteration otherwise.
pub fn nash_point(config: &ExperimentConfig, game: &BuiltGame) -> Result<NashPoint<f64>> {
    match game {
        BuiltGame::Linear(g) => Ok(NashPoint::at(g, g.q_star().to_vec())?),
        BuiltGame::Cournot(g) => {
            let start = match &config.nash.start {
                Some(s) => s.clone(),
                None => (0..g.n())
                    .map(|i| dyngame::game::Game::action_box(g, i).lo[0])
                    .collect(),
            };
            solve_nash_iterate(g, &start, &config.nash.solver).context("Nash iteration failed")
        }
    }
}

/// Small-gain checks applicable to the game. Three-player Cournot games that
/// fail the subset conditions are retried with searched weights.
pub fn small_gain(game: &BuiltGame) -> Result<Vec<SmallGainReport>> {
    match game {
        BuiltGame::Cournot(g) => {
            let plain = check_cournot_small_gain(g.r())?;
            let mut out = vec![plain];
            if !out[0].passed() && g.n() == 3 {
                let r = [g.r()[0], g.r()[1], g.r()[2]];
                if let Some(found) = search_weights_n3(r)? {
                    out.push(check_weighted_small_gain(
                        g.r(),
                        &epsilon_weights(found.epsilon),
                    )?);
                }
            }
            Ok(out)
        }
        BuiltGame::Linear(g) => {
            let gains = g.gain_matrix();
            let grid = default_s_grid();
            // No admissible ω: report the conditions just above 1.
            let omega = search_omega(&gains, &grid)?.map_or(1.0 + 1e-9, |c| c.omega);
            Ok(vec![check_cyclic_small_gain(&gains, omega, &grid)?])
        }
    }
}

pub fn any_passed(reports: &[SmallGainReport]) -> bool {
    reports.iter().any(SmallGainReport::passed)
}

pub fn fixed_points(config: &ExperimentConfig, game: &BuiltGame) -> Result<Vec<NashPoint<f64>>> {
    let opts = FixedPointOptions {
        resolution: config.fixed_points.resolution,
        cluster_tol: config.fixed_points.cluster_tol,
        ..Default::default()
    };
    Ok(find_fixed_points_with(game.as_dyn(), &opts)?)
}

fn initial_deviation(
    config: &ExperimentConfig,
    game: &BuiltGame,
    nash: &NashPoint<f64>,
) -> Result<Vec<f64>> {
    let dim = game.as_dyn().layout().total();
    let y = match &config.initial {
        InitialSpec::Zero => vec![0.0; dim],
        InitialSpec::Constant(y) => y.clone(),
        InitialSpec::Profile(q) => {
            deviation_transform(game.as_dyn(), q, &nash.q_star, config.mode())?
        }
    };
    ensure!(
        y.len() == dim,
        "initial history has {} entries, expected {dim}",
        y.len()
    );
    Ok(y)
}

fn direction(
    kind: &DirectionKind,
    y: &[f64],
    range: std::ops::Range<usize>,
) -> DirectionSignal<f64> {
    match kind {
        DirectionKind::Seeded => DirectionSignal::Seeded,
        DirectionKind::AdversarialSign => DirectionSignal::AdversarialSign,
        DirectionKind::Constant(v) => DirectionSignal::Constant { value: v.clone() },
        DirectionKind::InitialSign => {
            let yj = &y[range];
            let len = norm(yj);
            let value = if len > 0.0 {
                yj.iter().map(|v| v / len).collect()
            } else {
                vec![0.0; yj.len()]
            };
            DirectionSignal::Constant { value }
        }
    }
}

pub fn realization(
    config: &ExperimentConfig,
    game: &BuiltGame,
    y: &[f64],
) -> Result<UncertaintyRealization<f64>> {
    let spec = &config.uncertainty;
    let layout = game.as_dyn().layout();
    let n = layout.players();
    let steps = config.sim.steps()?;
    let theta = match &spec.theta_kind {
        ThetaKind::Seeded => ThetaSignal::Seeded,
        ThetaKind::Zero => ThetaSignal::Constant {
            values: vec![0.0; n],
        },
        ThetaKind::Max => ThetaSignal::Constant {
            values: vec![spec.theta_bound; n],
        },
        ThetaKind::Constant(v) => ThetaSignal::Constant { values: v.clone() },
    };
    let tau = match spec.tau_kind {
        TauKind::Seeded => DelaySignal::Seeded,
        TauKind::Min => DelaySignal::Constant {
            steps: vec![steps.r; n],
        },
        TauKind::Max => DelaySignal::Constant {
            steps: vec![steps.window; n],
        },
    };
    let kind = |i: usize, j: usize| -> Option<&DirectionKind> {
        match &spec.d_kind {
            DirectionSpec::Global(k) => Some(k),
            DirectionSpec::PerPair(rows) => rows[i][j].as_ref(),
        }
    };
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        for j in (0..n).filter(|&j| j != i) {
            let k = kind(i, j)
                .with_context(|| format!("d_kind missing for pair ({}, {})", i + 1, j + 1))?;
            row[j] = Some(direction(k, y, layout.range(j)));
        }
    }
    Ok(UncertaintyRealization {
        theta_bound: spec.theta_bound,
        theta,
        tau,
        d,
    })
}

/// Everything a simulation produces.
pub struct Simulation {
    pub trajectory: TrajectoryGrid<f64>,
    pub verdict: Verdict,
    pub monitor: Option<MonitorReport>,
    /// `V_i` per node from `t = 0`, when monitored.
    pub functionals: Option<Vec<f64>>,
}

pub fn simulate(
    config: &ExperimentConfig,
    game: &BuiltGame,
    nash: &NashPoint<f64>,
) -> Result<Simulation> {
    let system = DeviationSystem::new(game.as_dyn(), nash, config.mode())?;
    let y = initial_deviation(config, game, nash)?;
    let real = realization(config, game, &y)?;
    let history = InitialHistory::Constant(y);
    let trajectory = match &config.layers {
        Some(layers) => {
            let layers = LayerAssignment::from_labels(&layers.groups, game.n())?;
            simulate_layered(&system, &history, &real, &layers, &config.sim)?
        }
        None => simulate_fde(&system, &history, &real, &config.sim)?,
    };
    let mut verdict = convergence_verdict(&trajectory, config.tolerance);
    let (monitor, functionals) = match &config.monitor {
        Some(spec) => {
            let mc = config.monitor_config(spec)?;
            let report = match game {
                BuiltGame::Cournot(g) => monitor_cournot(&trajectory, &mc, g)?,
                BuiltGame::Linear(g) => monitor_inequality(&trajectory, &mc, &g.gain_matrix())?,
            };
            verdict = verdict.with_monitor(&report);
            (Some(report), Some(lyapunov_series(&trajectory, mc.sigma)))
        }
        None => (None, None),
    };
    Ok(Simulation {
        trajectory,
        verdict,
        monitor,
        functionals,
    })
}
