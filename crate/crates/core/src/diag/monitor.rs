use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::{cournot_gain_matrix, GainMatrix};
use crate::game::CournotGame;
use crate::scalar::Scalar;
use crate::sim::TrajectoryGrid;

/// Breaches below this are attributed to rounding.
pub const VIOLATION_THRESHOLD: f64 = 1e-9;

/// Parameters of the weighted window functionals and the decay estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig<T> {
    pub sigma: T,
    pub mu: T,
    #[serde(rename = "Theta")]
    pub theta_bound: T,
}

impl<T: Scalar> MonitorConfig<T> {
    /// `μ = (1 + Θ)/2`, `σ = min(ln 2 / T, ln(1/μ) / (2T))`, giving `μ e^{σT} <= √μ`.
    pub fn auto(theta_bound: T, window: T) -> Result<Self> {
        let two = T::lit(2.0);
        let mu = (T::one() + theta_bound) / two;
        let sigma = (two.ln() / window).min((T::one() / mu).ln() / (two * window));
        let config = Self {
            sigma,
            mu,
            theta_bound,
        };
        config.validate(window)?;
        Ok(config)
    }

    pub fn validate(&self, window: T) -> Result<()> {
        let Self {
            sigma,
            mu,
            theta_bound,
        } = *self;
        if !(theta_bound >= T::zero() && theta_bound < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "Theta must lie in [0, 1), got {theta_bound}"
            )));
        }
        if !(sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if sigma * window > T::lit(2.0).ln() * (T::one() + T::tol(1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "sigma = {sigma} exceeds ln 2 / T"
            )));
        }
        if !(mu > theta_bound && mu < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "mu must lie in (Theta, 1), got {mu}"
            )));
        }
        if !(mu * (sigma * window).exp() < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "mu exp(sigma T) = {} is not below 1",
                mu * (sigma * window).exp()
            )));
        }
        Ok(())
    }

    /// `(μ - μΘ) / (μ - Θ)`.
    pub fn coupling_factor(&self) -> T {
        (self.mu - self.mu * self.theta_bound) / (self.mu - self.theta_bound)
    }
}

/// Per-player multiplier turning mode-unit deviations into action units.
pub fn functional_scale<T: Scalar>(traj: &TrajectoryGrid<T>, i: usize) -> T {
    traj.scale[traj.layout.range(i).start]
}

/// `V_i = max_{τ ∈ [-T, 0]} scale·|x_i(t + τ)| e^{στ}` at a node.
pub fn lyapunov_v<T: Scalar>(
    traj: &TrajectoryGrid<T>,
    i: usize,
    node: usize,
    sigma: T,
    scale: T,
) -> Result<T> {
    let w = traj.grid.window;
    if node < w {
        return Err(Error::WindowUnderflow {
            start: (traj.time(node) - T::of_usize(w) * traj.h).as_f64(),
            earliest: traj.time(0).as_f64(),
        });
    }
    let mut best = T::zero();
    for k in node - w..=node {
        let tau = T::of_usize(node - k) * traj.h;
        best = best.max(scale * traj.norm(k, i) * (-sigma * tau).exp());
    }
    Ok(best)
}

/// `V_i` at every node from `t = 0` on, `nodes × n` flattened by node.
pub fn lyapunov_series<T: Scalar>(traj: &TrajectoryGrid<T>, sigma: T) -> Vec<T> {
    let n = traj.players();
    let mut out = Vec::with_capacity((traj.nodes() - traj.origin()) * n);
    for node in traj.origin()..traj.nodes() {
        for i in 0..n {
            out.push(
                lyapunov_v(traj, i, node, sigma, functional_scale(traj, i))
                    .expect("node at or after the origin"),
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    /// 1-based.
    pub player: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub sigma: f64,
    pub mu: f64,
    #[serde(rename = "Theta")]
    pub theta_bound: f64,
    pub checked_nodes: usize,
    /// Largest `lhs - rhs` seen, floored at zero.
    pub max_violation: f64,
    pub violations: Vec<Violation>,
}

impl MonitorReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks at every node `t >= 0`
///
/// `V_i(t) <= max{ e^{-σt} V_i(0), μ e^{σT} sup_{s<=t} V_i(s), c max_{j≠i} γ_ij(e^{σT} sup_{s<=t} V_j(s)) }`
///
/// with `c = (μ - μΘ)/(μ - Θ)` and `γ_ij` the gains bounding reply deviations in action units.
pub fn monitor_inequality<T: Scalar>(
    traj: &TrajectoryGrid<T>,
    config: &MonitorConfig<T>,
    gains: &GainMatrix<T>,
) -> Result<MonitorReport> {
    let n = traj.players();
    if gains.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gains.n(),
        });
    }
    let window = T::of_usize(traj.grid.window) * traj.h;
    config.validate(window)?;
    let inflate = (config.sigma * window).exp();
    let factor = config.coupling_factor();
    let series = lyapunov_series(traj, config.sigma);
    let initial: Vec<T> = series[..n].to_vec();
    let mut running = initial.clone();
    let mut violations = Vec::new();
    let mut worst = T::zero();
    let nodes = traj.nodes() - traj.origin();
    for step in 0..nodes {
        let v = &series[step * n..(step + 1) * n];
        for (r, &x) in running.iter_mut().zip(v) {
            *r = r.max(x);
        }
        let t = T::of_usize(step) * traj.h;
        for i in 0..n {
            let decay = (-config.sigma * t).exp() * initial[i];
            let own = config.mu * inflate * running[i];
            let cross = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    gains
                        .get(i, j)
                        .expect("off-diagonal")
                        .eval(inflate * running[j])
                })
                .fold(T::zero(), T::max);
            let rhs = decay.max(own).max(factor * cross);
            let gap = v[i] - rhs;
            worst = worst.max(gap);
            if gap.as_f64() > VIOLATION_THRESHOLD {
                violations.push(Violation {
                    t: t.as_f64(),
                    player: i + 1,
                    lhs: v[i].as_f64(),
                    rhs: rhs.as_f64(),
                });
            }
        }
    }
    Ok(MonitorReport {
        sigma: config.sigma.as_f64(),
        mu: config.mu.as_f64(),
        theta_bound: config.theta_bound.as_f64(),
        checked_nodes: nodes,
        max_violation: worst.as_f64(),
        violations,
    })
}

/// [`monitor_inequality`] with the Cournot gains `γ_ij(s) = R_i (n-1) s`.
pub fn monitor_cournot<T: Scalar>(
    traj: &TrajectoryGrid<T>,
    config: &MonitorConfig<T>,
    game: &CournotGame<T>,
) -> Result<MonitorReport> {
    monitor_inequality(traj, config, &cournot_gain_matrix(game))
}
