//! The n-t-ODERNN recurrence, its Runge–Kutta reading and the leapfrog propagator.

mod config;
mod history;
mod leapfrog;
mod rk;
mod step;

pub use config::{delay_schedule, OdeRnnConfig, Tableau, WeightMode};
pub use history::{InputHistory, Padding};
pub use leapfrog::{leapfrog_inverse, leapfrog_step};
pub use rk::{convergence_order, log_log_slope, odernn_as_rk, rk_integrate, RkReduction, RkScheme};
pub use step::{
    odernn_rollout, odernn_run, odernn_run_with, odernn_step, OdeRnn, StaticWeights, StepOutput, WeightSchedule, FIXED_POINT_CAP,
    FIXED_POINT_DAMPING, FIXED_POINT_TOL,
};
