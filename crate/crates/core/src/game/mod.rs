//! Strategic games, best replies, Nash equilibria and the fixed-point oracle.

mod boxes;
mod cournot;
mod general;
mod nash;

pub(crate) use boxes::clamp;
pub use boxes::{project_box, BoxSet, Layout};
pub use cournot::{CournotGame, CournotParams, Payoff};
pub(crate) use general::stacked_reply;
pub use general::{best_reply_map, Game, GeneralGame, LinearReplyGame};
pub use nash::{
    deviation_inverse, deviation_scale, deviation_transform, find_fixed_points_grid,
    find_fixed_points_with, fixed_point_residual, solve_nash_iterate, CournotEquilibrium,
    DeviationMode, FixedPointOptions, NashPoint, SolverOptions,
};
