//! Window functionals, the decay monitor and convergence verdicts.

mod monitor;
mod verdict;

pub use monitor::{
    functional_scale, lyapunov_series, lyapunov_v, monitor_cournot, monitor_inequality,
    MonitorConfig, MonitorReport, Violation, VIOLATION_THRESHOLD,
};
pub use verdict::{
    convergence_verdict, stationary_counterexample, Verdict, FIXED_POINT_TOL, STATIONARY_TOL,
};
