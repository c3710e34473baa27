//! Solvers for the penalized problem: stochastic gradients with penalty
//! continuation, a deterministic batch minimizer, and closed-form oracles.

mod lbfgs;
mod psgd;
mod quadratic;
mod reduced;
mod schedule;

pub use lbfgs::{batch_minimize, lbfgs, BatchSolution, LbfgsOptions, MinimizeOutcome, StopReason};
pub use psgd::{project_ball, psgd, IterRecord, PenaltyRun, PsgdConfig, Sampler, UpdateRule, SGD_STREAM};
pub use quadratic::{
    anchored_perm_solve, linear_perm_oracle, strong_convexity_constant, ChaosMoments, QuadraticModel,
    GRAM_RANK_CUTOFF,
};
pub use reduced::{reduced_reference_solve, REDUCED_GRADIENT_TOL};
pub use schedule::{PenaltySchedule, StepSchedule};
