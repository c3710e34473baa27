use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{BatchSolver, ExperimentConfig};
use super::fit::{fit_loglog_slope, RateFit};
use crate::error::{Error, Result};
use crate::field::{sample_many, seeded_rng, ParamSample};
use crate::linalg::{dot, sub};
use crate::objective::{OptState, ProblemData};
use crate::optim::{anchored_perm_solve, batch_minimize};
use crate::surrogate::{Surrogate, SurrogateModel};

/// RNG stream of the training samples shared by the rate studies.
pub const TRAIN_STREAM: u64 = 1;

/// One grid point of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatePoint {
    /// `N` or `λ`, depending on the study.
    pub abscissa: f64,
    pub n_samples: usize,
    pub lambda: f64,
    pub squared_error_control: f64,
    pub squared_error_theta: f64,
}

impl RatePoint {
    pub fn squared_error(&self) -> f64 {
        self.squared_error_control + self.squared_error_theta
    }
}

/// A convergence curve and the log-log fit of its total squared error.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateStudy {
    pub points: Vec<RatePoint>,
    pub fit: RateFit,
    pub reference: OptState,
}

/// The initial guess `z = 0`, `θ = 1`.
pub fn initial_guess(data: &ProblemData, sur: &SurrogateModel) -> OptState {
    OptState::new(vec![0.0; data.n_dof()], vec![1.0; sur.param_count()])
}

/// Solves one pERM instance with the configured solver.
pub fn solve_perm(
    cfg: &ExperimentConfig,
    data: &ProblemData,
    sur: &SurrogateModel,
    samples: &[ParamSample],
    lambda: f64,
) -> Result<OptState> {
    let x0 = initial_guess(data, sur);
    match cfg.solver {
        BatchSolver::Exact => {
            let chaos = sur.as_chaos().ok_or_else(|| {
                Error::InvalidArgument("the exact solver needs a chaos surrogate; use the lbfgs solver".into())
            })?;
            anchored_perm_solve(data, chaos, samples, lambda, &x0)
        }
        BatchSolver::Lbfgs => Ok(batch_minimize(data, sur, &x0, samples, lambda, &cfg.lbfgs)?.x),
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let d = sub(a, b);
    dot(&d, &d)
}

fn point(abscissa: f64, n_samples: usize, lambda: f64, x: &OptState, reference: &OptState) -> RatePoint {
    RatePoint {
        abscissa,
        n_samples,
        lambda,
        squared_error_control: squared_distance(&x.z, &reference.z),
        squared_error_theta: squared_distance(&x.theta, &reference.theta),
    }
}

fn setup(cfg: &ExperimentConfig) -> Result<(ProblemData, SurrogateModel)> {
    let data = ProblemData::new(&cfg.problem)?;
    let sur = cfg.surrogate.build(data.s(), data.n_dof())?;
    Ok((data, sur))
}

fn pow2_grid(min_exp: u32, max_exp: u32) -> Result<Vec<usize>> {
    if min_exp > max_exp || max_exp >= usize::BITS - 1 {
        return Err(Error::InvalidArgument(format!("bad exponent range {min_exp}..={max_exp}")));
    }
    Ok((min_exp..=max_exp).map(|k| 1usize << k).collect())
}

fn with_context<T>(r: Result<T>, what: impl FnOnce() -> alloc::string::String) -> Result<T> {
    r.map_err(|e| e.context(what()))
}

/// Squared errors for growing nested sample sets at fixed `λ`, against the
/// solution on the largest set.
pub fn run_rate_vs_n(cfg: &ExperimentConfig) -> Result<RateStudy> {
    let s = &cfg.rate_n;
    let grid = pow2_grid(s.min_exp, s.max_exp)?;
    if s.ref_exp < s.max_exp {
        return Err(Error::InvalidArgument("reference sample set must contain every grid set".into()));
    }
    let (data, sur) = setup(cfg)?;
    let n_ref = 1usize << s.ref_exp;
    let samples = sample_many(&mut seeded_rng(cfg.seed, TRAIN_STREAM), data.s(), n_ref);
    let reference = with_context(solve_perm(cfg, &data, &sur, &samples, s.lambda), || format!("reference N = {n_ref}"))?;
    let mut points = Vec::with_capacity(grid.len());
    for &n in &grid {
        let x = with_context(solve_perm(cfg, &data, &sur, &samples[..n], s.lambda), || format!("N = {n}"))?;
        points.push(point(n as f64, n, s.lambda, &x, &reference));
    }
    finish(points, reference)
}

/// Squared errors for a geometric `λ` grid at a frozen sample set, against
/// the solution at `λ_ref`.
pub fn run_rate_vs_lambda(cfg: &ExperimentConfig) -> Result<RateStudy> {
    let s = &cfg.rate_lambda;
    if s.n_lambda < 2 || !(s.lambda_min > 0.0) || !(s.lambda_max > s.lambda_min) {
        return Err(Error::InvalidArgument("lambda grid needs two or more increasing positive points".into()));
    }
    let (data, sur) = setup(cfg)?;
    let data = data.with_theta_reg(s.theta_reg);
    let samples = sample_many(&mut seeded_rng(cfg.seed, TRAIN_STREAM), data.s(), s.n_samples);
    let reference = with_context(solve_perm(cfg, &data, &sur, &samples, s.lambda_ref), || {
        format!("reference lambda = {}", s.lambda_ref)
    })?;
    let ratio = libm::log(s.lambda_max / s.lambda_min) / (s.n_lambda - 1) as f64;
    let mut points = Vec::with_capacity(s.n_lambda);
    for i in 0..s.n_lambda {
        let lambda = if i + 1 == s.n_lambda {
            s.lambda_max
        } else {
            s.lambda_min * libm::exp(ratio * i as f64)
        };
        let x = with_context(solve_perm(cfg, &data, &sur, &samples, lambda), || format!("lambda = {lambda}"))?;
        points.push(point(lambda, s.n_samples, lambda, &x, &reference));
    }
    finish(points, reference)
}

/// Squared errors when `N` and `λ = N^p` grow together, against the solution
/// on the largest nested set with its own balanced `λ`.
pub fn run_combined(cfg: &ExperimentConfig) -> Result<RateStudy> {
    let s = &cfg.combined;
    let grid = pow2_grid(s.min_exp, s.max_exp)?;
    if s.ref_exp < s.max_exp {
        return Err(Error::InvalidArgument("reference sample set must contain every grid set".into()));
    }
    let (data, sur) = setup(cfg)?;
    let n_ref = 1usize << s.ref_exp;
    let samples = sample_many(&mut seeded_rng(cfg.seed, TRAIN_STREAM), data.s(), n_ref);
    let balance = |n: usize| libm::pow(n as f64, s.lambda_power);
    let reference = with_context(solve_perm(cfg, &data, &sur, &samples, balance(n_ref)), || {
        format!("reference N = {n_ref}")
    })?;
    let mut points = Vec::with_capacity(grid.len());
    for &n in &grid {
        let lambda = balance(n);
        let x = with_context(solve_perm(cfg, &data, &sur, &samples[..n], lambda), || format!("N = {n}"))?;
        points.push(point(n as f64, n, lambda, &x, &reference));
    }
    finish(points, reference)
}

fn finish(points: Vec<RatePoint>, reference: OptState) -> Result<RateStudy> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.abscissa, p.squared_error())).collect();
    let fit = fit_loglog_slope(&xy)?;
    Ok(RateStudy { points, fit, reference })
}
