//! Gain functions and the small-gain condition families.

mod check;
mod cycles;
mod function;
mod report;
mod weighted;

pub use check::{
    check_cournot_small_gain, check_cyclic_small_gain, cournot_gain_matrix, cycle_composition,
    default_s_grid, search_omega, OmegaChoice, OMEGA_CAP,
};
pub use cycles::{simple_cycles, subsets};
pub use function::{GainFunction, GainMatrix};
pub use report::{
    Condition, ConditionKind, Evidence, Family, SmallGainReport, Verdict, STRICT_MARGIN,
};
pub use weighted::{
    check_weighted_small_gain, epsilon_weights, row_dominates, search_weights_n3,
    weighted_n3_values, WeightSearch,
};
