//! Numerical checks of the smoothing theory and the wall-clock harness.

mod bench;
mod bounds;
mod smoothing;

pub use bench::{bench_csv, wallclock_bench, BenchRow, BenchSettings, BenchTask, BENCH_HEADER};
pub use bounds::{
    eta_star, hessian_quadform_check, lemma_bound, optimal_rate_bound, step_bound, theorem_bound_check, theorem_rhs,
    BoundReport, BoundStatus, HessianCheckConfig, TheoremConstants, TheoremReport,
};
pub use smoothing::{estimate_g, g_k_distance, SmoothedEstimate};
