//! Drivers for the numerical studies: convergence rates in `N`, in `λ` and
//! jointly, the stochastic-solver comparison, and Monte Carlo state
//! statistics.

mod config;
mod fit;
mod mc;
mod rates;
mod sgd;

pub use config::{
    BatchSolver, CombinedSettings, ExperimentConfig, ExperimentKind, McSettings, RateLambdaSettings, RateNSettings,
    SgdSettings,
};
pub use fit::{fit_loglog_slope, RateFit, MIN_FIT_POINTS};
pub use mc::{accumulate_states, mc_source, monte_carlo_state_stats, RunningStats, StateStats, MC_STREAM};
pub use rates::{
    initial_guess, run_combined, run_rate_vs_lambda, run_rate_vs_n, solve_perm, RatePoint, RateStudy, TRAIN_STREAM,
};
pub use sgd::{run_sgd_vs_reference, Checkpoint, SgdComparison, SgdTrace, HELDOUT_STREAM, INIT_STREAM, REFERENCE_STREAM};
