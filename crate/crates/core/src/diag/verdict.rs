use serde::{Deserialize, Serialize};

use super::monitor::{MonitorReport, Violation};
use crate::error::{Error, Result};
use crate::game::{deviation_transform, fixed_point_residual, Game};
use crate::scalar::{norm, Scalar};
use crate::sim::{
    simulate_fde, DelaySignal, DeviationSystem, DirectionSignal, InitialHistory, SimConfig,
    ThetaSignal, TrajectoryGrid, UncertaintyRealization,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub converged: bool,
    /// First `t` from which the window metric stays below tolerance.
    pub convergence_time: Option<f64>,
    pub max_violation: f64,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn with_monitor(mut self, report: &MonitorReport) -> Self {
        self.max_violation = self.max_violation.max(report.max_violation);
        self.violations.extend(report.violations.iter().cloned());
        self
    }
}

/// Converged iff `max_i ‖x_i‖_{[t-T, t]} < tol` from some node up to the horizon.
pub fn convergence_verdict<T: Scalar>(traj: &TrajectoryGrid<T>, tol: T) -> Verdict {
    let metric = traj.metric_series();
    let tail = metric.iter().rev().take_while(|&&m| m < tol).count();
    let first = metric.len() - tail;
    let convergence_time = (tail > 0).then(|| (T::of_usize(first) * traj.h).as_f64());
    Verdict {
        converged: tail > 0,
        convergence_time,
        max_violation: 0.0,
        violations: Vec::new(),
    }
}

/// Tolerance on the fixed-point residual of the second equilibrium.
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// Allowed node-to-node drift of the stationary trajectory.
pub const STATIONARY_TOL: f64 = 1e-12;

/// Builds the stationary solution at a second fixed point `q'` of the
/// best-reply map: history `x ≡ y` with `y` the deviation of `q'`, `θ ≡ 0`,
/// `d_ij = y_j/|y_j|` (the sign for scalar players), and checks that the
/// simulated path never moves.
pub fn stationary_counterexample<T: Scalar, G: Game<T> + ?Sized>(
    system: &DeviationSystem<'_, T, G>,
    other: &[T],
    config: &SimConfig<T>,
) -> Result<(UncertaintyRealization<T>, TrajectoryGrid<T>)> {
    let game = system.game();
    let residual = fixed_point_residual(game, other)?;
    if residual.as_f64() > FIXED_POINT_TOL {
        return Err(Error::NotFixedPoint {
            residual: residual.as_f64(),
        });
    }
    let layout = system.layout();
    let n = layout.players();
    let y = deviation_transform(game, other, system.q_star(), system.mode())?;
    let steps = config.steps()?;
    let direction = |j: usize| -> Vec<T> {
        let yj = layout.slice(&y, j);
        let len = norm(yj);
        if len > T::zero() {
            yj.iter().map(|&v| v / len).collect()
        } else {
            vec![T::zero(); yj.len()]
        }
    };
    let d = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (i != j).then(|| DirectionSignal::Constant {
                        value: direction(j),
                    })
                })
                .collect()
        })
        .collect();
    let realization = UncertaintyRealization {
        theta_bound: T::zero(),
        theta: ThetaSignal::Constant {
            values: vec![T::zero(); n],
        },
        tau: DelaySignal::Constant {
            steps: vec![steps.r; n],
        },
        d,
    };
    let traj = simulate_fde(system, &InitialHistory::Constant(y), &realization, config)?;
    let drift = traj.max_drift();
    if drift.as_f64() > STATIONARY_TOL {
        return Err(Error::NonConstant {
            drift: drift.as_f64(),
        });
    }
    Ok((realization, traj))
}
