//! Method-of-steps simulation of the uncertain deviation dynamics.

mod config;
mod discrete;
mod engine;
mod expect;
mod ode;
mod signals;
mod system;
mod trajectory;

pub use config::{GridSteps, SimConfig};
pub use discrete::{embed_discrete, simulate_discrete, DiscreteEmbedding, DiscreteModel, Schedule};
pub use engine::{simulate_fde, simulate_layered, LayerAssignment};
pub use expect::{
    realize_expectation_d, realize_expectation_series, reconstruct_expectation, CompiledRule,
    ExpectationRule, Tap,
};
pub use ode::{embed_ode, observed_order, settled_history, simulate_ode, OdeEmbedding, OdeModel};
pub use signals::{
    DelaySignal, DirectionSignal, InitialHistory, ThetaSignal, UncertaintyRealization,
};
pub use system::DeviationSystem;
pub use trajectory::{SignalRecord, TrajectoryGrid};
