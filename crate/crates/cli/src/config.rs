use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use dyngame::diag::MonitorConfig;
use dyngame::game::{
    BoxSet, CournotGame, CournotParams, DeviationMode, Game, LinearReplyGame, SolverOptions,
};
use dyngame::sim::{LayerAssignment, SimConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One experiment as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    /// Defaults to `scaled` for Cournot games and `raw` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<DeviationMode>,
    #[serde(default)]
    pub nash: NashSpec,
    #[serde(default)]
    pub sim: SimConfig<f64>,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<LayersSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<MonitorSpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    /// Convergence threshold on the windowed deviation.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub fixed_points: FixedPointSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameSpec {
    Cournot(CournotSpec),
    LinearGains(LinearSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CournotSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub c: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub n: usize,
    pub coefficients: Vec<Vec<f64>>,
    pub boxes: Vec<BoxSet<f64>>,
    /// Declared equilibrium, one vector per player.
    pub q_star: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NashSpec {
    /// Starting profile of the damped iteration; the lower box corner by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(default = "default_solver")]
    pub solver: SolverOptions,
}

fn default_solver() -> SolverOptions {
    SolverOptions {
        tol: 1e-13,
        ..Default::default()
    }
}

impl Default for NashSpec {
    fn default() -> Self {
        Self {
            start: None,
            solver: default_solver(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaKind {
    Seeded,
    Zero,
    /// `θ ≡ Θ`.
    Max,
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauKind {
    Seeded,
    /// `τ ≡ r`.
    Min,
    /// `τ ≡ T`.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    Seeded,
    AdversarialSign,
    /// `d_ij = y_j/|y_j|` with `y` the constant initial deviation.
    InitialSign,
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionSpec {
    Global(DirectionKind),
    /// `n × n`, diagonal `null`.
    PerPair(Vec<Vec<Option<DirectionKind>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    #[serde(rename = "Theta")]
    pub theta_bound: f64,
    pub theta_kind: ThetaKind,
    pub tau_kind: TauKind,
    pub d_kind: DirectionSpec,
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        Self {
            theta_bound: 0.5,
            theta_kind: ThetaKind::Seeded,
            tau_kind: TauKind::Seeded,
            d_kind: DirectionSpec::Global(DirectionKind::Seeded),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayersSpec {
    /// 1-based player groups `J_1, …, J_m`.
    #[serde(rename = "J")]
    pub groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Auto {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Auto(Auto),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSpec {
    pub sigma: Param,
    pub mu: Param,
}

/// Constant initial history.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    #[default]
    Zero,
    /// Deviation in mode units.
    Constant(Vec<f64>),
    /// Action profile, converted to its deviation.
    Profile(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSpec {
    pub resolution: usize,
    pub cluster_tol: f64,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        Self {
            resolution: 21,
            cluster_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// JSON pointer into the config, e.g. `/game/cournot/K/0`.
    pub path: String,
    pub values: AxisValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl AxisValues {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            AxisValues::List(ref v) => v.clone(),
            AxisValues::Linspace { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..count)
                    .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub trajectory_csv: String,
    pub report_json: String,
    pub sweep_csv: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            trajectory_csv: "trajectory.csv".into(),
            report_json: "report.json".into(),
            sweep_csv: "sweep.csv".into(),
        }
    }
}

/// The validated game behind a config.
#[derive(Debug, Clone)]
pub enum BuiltGame {
    Cournot(CournotGame<f64>),
    Linear(LinearReplyGame<f64>),
}

impl BuiltGame {
    pub fn as_dyn(&self) -> &dyn Game<f64> {
        match self {
            BuiltGame::Cournot(g) => g,
            BuiltGame::Linear(g) => g,
        }
    }

    pub fn n(&self) -> usize {
        self.as_dyn().layout().players()
    }
}

impl GameSpec {
    pub fn build(&self) -> Result<BuiltGame> {
        match self {
            GameSpec::Cournot(s) => {
                for (name, len) in [("c", s.c.len()), ("K", s.k.len()), ("Q", s.q.len())] {
                    ensure!(len == s.n, "cournot: {name} has {len} entries, n = {}", s.n);
                }
                let params = CournotParams {
                    a: s.a,
                    b: s.b,
                    c: s.c.clone(),
                    k: s.k.clone(),
                    q: s.q.clone(),
                };
                Ok(BuiltGame::Cournot(CournotGame::validate(params)?))
            }
            GameSpec::LinearGains(s) => {
                ensure!(
                    s.boxes.len() == s.n,
                    "linear_gains: {} boxes, n = {}",
                    s.boxes.len(),
                    s.n
                );
                let boxes = s
                    .boxes
                    .iter()
                    .map(|b| BoxSet::new(b.lo.clone(), b.hi.clone()))
                    .collect::<dyngame::Result<Vec<_>>>()?;
                Ok(BuiltGame::Linear(LinearReplyGame::new(
                    s.coefficients.clone(),
                    boxes,
                    s.q_star.clone(),
                )?))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn mode(&self) -> DeviationMode {
        self.mode.unwrap_or(match self.game {
            GameSpec::Cournot(_) => DeviationMode::Scaled,
            GameSpec::LinearGains(_) => DeviationMode::Raw,
        })
    }

    /// Re-checks every downstream invariant that does not need a simulation.
    pub fn validate(&self) -> Result<()> {
        let game = self.game.build()?;
        let n = game.n();
        if matches!(game, BuiltGame::Linear(_)) && self.mode() == DeviationMode::Scaled {
            bail!("scaled deviations require a Cournot game");
        }
        self.sim.steps()?;
        let theta = self.uncertainty.theta_bound;
        ensure!(
            (0.0..1.0).contains(&theta),
            "Theta must lie in [0, 1), got {theta}"
        );
        if let Some(layers) = &self.layers {
            LayerAssignment::from_labels(&layers.groups, n)?;
        }
        if let Some(spec) = &self.monitor {
            self.monitor_config(spec)?;
        }
        if let DirectionSpec::PerPair(rows) = &self.uncertainty.d_kind {
            ensure!(
                rows.len() == n && rows.iter().all(|r| r.len() == n),
                "d_kind must be an {n}x{n} table"
            );
        }
        ensure!(self.tolerance > 0.0, "tolerance must be positive");
        if let Some(sweep) = &self.sweep {
            let cells = sweep_cells(sweep);
            ensure!(
                cells <= sweep.budget,
                "sweep of {cells} cells exceeds the budget of {}",
                sweep.budget
            );
        }
        Ok(())
    }

    pub fn monitor_config(&self, spec: &MonitorSpec) -> Result<MonitorConfig<f64>> {
        let theta = self.uncertainty.theta_bound;
        let window = self.sim.window;
        let auto = MonitorConfig::auto(theta, window)?;
        let mu = match spec.mu {
            Param::Auto(_) => auto.mu,
            Param::Value(v) => v,
        };
        let sigma = match spec.sigma {
            Param::Auto(_) => (2f64.ln() / window).min((1.0 / mu).ln() / (2.0 * window)),
            Param::Value(v) => v,
        };
        let config = MonitorConfig {
            sigma,
            mu,
            theta_bound: theta,
        };
        config.validate(window)?;
        Ok(config)
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Product of the axis lengths; zero when there are no axes.
pub fn sweep_cells(sweep: &SweepSpec) -> usize {
    if sweep.axes.is_empty() {
        return 0;
    }
    sweep
        .axes
        .iter()
        .map(|a| a.values.points().len())
        .fold(1usize, |acc, k| acc.saturating_mul(k))
}
