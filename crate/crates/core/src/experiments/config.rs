use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::objective::ProblemSettings;
use crate::optim::{LbfgsOptions, PenaltySchedule, StepSchedule, UpdateRule};
use crate::surrogate::{InitMode, SurrogateSpec};

/// Which study a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ExperimentKind {
    #[default]
    RateN,
    RateLambda,
    RateCombined,
    SgdCompare,
    McStats,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::RateN => "rate-n",
            ExperimentKind::RateLambda => "rate-lambda",
            ExperimentKind::RateCombined => "rate-combined",
            ExperimentKind::SgdCompare => "sgd-compare",
            ExperimentKind::McStats => "mc-stats",
        }
    }
}

/// How each pERM instance of the rate studies is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BatchSolver {
    /// Closed-form normal equations (chaos surrogates only); singular
    /// instances return the minimizer nearest to the initial guess.
    #[default]
    Exact,
    /// Quasi-Newton iteration on the batch objective from the initial guess.
    Lbfgs,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RateNSettings {
    /// Grid `N = 2^k` for `k = min_exp..=max_exp`.
    pub min_exp: u32,
    pub max_exp: u32,
    pub ref_exp: u32,
    pub lambda: f64,
}

impl Default for RateNSettings {
    fn default() -> Self {
        Self {
            min_exp: 1,
            max_exp: 13,
            ref_exp: 14,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RateLambdaSettings {
    pub n_samples: usize,
    /// Geometric grid from `lambda_min` to `lambda_max` with `n_lambda` points.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub lambda_ref: f64,
    /// Ridge weight on `θ` used for this study only.
    pub theta_reg: f64,
}

impl Default for RateLambdaSettings {
    fn default() -> Self {
        Self {
            n_samples: 100,
            lambda_min: 1.0,
            lambda_max: 1e5,
            n_lambda: 10,
            lambda_ref: 1.7e6,
            theta_reg: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CombinedSettings {
    pub min_exp: u32,
    pub max_exp: u32,
    pub ref_exp: u32,
    /// `λ(N) = N^power`
    pub lambda_power: f64,
}

impl Default for CombinedSettings {
    fn default() -> Self {
        Self {
            min_exp: 1,
            max_exp: 9,
            ref_exp: 11,
            lambda_power: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SgdSettings {
    pub surrogates: Vec<SurrogateSpec>,
    pub n_iter: u64,
    pub n_checkpoints: usize,
    /// Samples of the reduced reference problem.
    pub n_reference: usize,
    /// Held-out samples for the expectation estimates.
    pub n_heldout: usize,
    pub steps: StepSchedule,
    pub penalty: PenaltySchedule,
    pub rule: UpdateRule,
    pub radius: Option<f64>,
    /// Stride of the iteration log.
    pub log_every: u64,
    /// Initial `θ` for chaos surrogates.
    pub chaos_init: InitMode,
    /// Initial `θ` for networks.
    pub net_init: InitMode,
}

impl Default for SgdSettings {
    fn default() -> Self {
        Self {
            surrogates: vec![
                SurrogateSpec::Legendre { degree: 1 },
                SurrogateSpec::Legendre { degree: 2 },
                SurrogateSpec::Legendre { degree: 3 },
                SurrogateSpec::NeuralNet { hidden: vec![9, 9, 9] },
            ],
            n_iter: 100_000,
            n_checkpoints: 20,
            n_reference: 1024,
            n_heldout: 1000,
            steps: StepSchedule::RobbinsMonro { beta0: 1.0, k0: 2000.0 },
            penalty: PenaltySchedule::Linear {
                lambda0: 1.0,
                slope: 1e-3,
            },
            rule: UpdateRule::adam(),
            radius: None,
            log_every: 100,
            chaos_init: InitMode::Zeros,
            net_init: InitMode::ScaledUniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct McSettings {
    pub n_samples: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { n_samples: 100_000 }
    }
}

/// Full description of a run; together with the code version it determines
/// every output number.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output: Option<String>,
    /// Defaults to [`ProblemSettings::plain_norms`].
    pub problem: ProblemSettings,
    /// Surrogate of the rate studies.
    pub surrogate: SurrogateSpec,
    pub solver: BatchSolver,
    pub lbfgs: LbfgsOptions,
    pub rate_n: RateNSettings,
    pub rate_lambda: RateLambdaSettings,
    pub combined: CombinedSettings,
    pub sgd: SgdSettings,
    pub mc: McSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::default(),
            seed: 0,
            output: None,
            problem: ProblemSettings::plain_norms(),
            surrogate: SurrogateSpec::Legendre { degree: 2 },
            solver: BatchSolver::default(),
            lbfgs: LbfgsOptions {
                tol: 1e-10,
                max_iter: 20_000,
                ..LbfgsOptions::default()
            },
            rate_n: RateNSettings::default(),
            rate_lambda: RateLambdaSettings::default(),
            combined: CombinedSettings::default(),
            sgd: SgdSettings::default(),
            mc: McSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind,
            ..Self::default()
        }
    }
}
