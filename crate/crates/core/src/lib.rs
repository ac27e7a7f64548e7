//! Robust stability analysis for Nash equilibria of dynamic games.
//!
//! Games are evaluated through their best replies; stability is certified by
//! cyclic small-gain conditions and probed by simulating the uncertain
//! functional difference equations of the deviation from equilibrium.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diag;
pub mod error;
pub mod gain;
pub mod game;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CournotGame64 = game::CournotGame<f64>;
pub type CournotGame32 = game::CournotGame<f32>;
pub type LinearReplyGame64 = game::LinearReplyGame<f64>;
pub type NashPoint64 = game::NashPoint<f64>;
pub type GainMatrix64 = gain::GainMatrix<f64>;
pub type TrajectoryGrid64 = sim::TrajectoryGrid<f64>;
pub type SimConfig64 = sim::SimConfig<f64>;
pub type UncertaintyRealization64 = sim::UncertaintyRealization<f64>;
pub type MonitorConfig64 = diag::MonitorConfig<f64>;
