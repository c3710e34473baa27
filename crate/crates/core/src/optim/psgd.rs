use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::schedule::{PenaltySchedule, StepSchedule};
use crate::error::{Error, Result};
use crate::field::{sample_y, seeded_rng, ParamSample, SampleRng};
use crate::objective::{eval_sample, OptState, ProblemData};
use crate::surrogate::Surrogate;

/// RNG stream reserved for the stochastic solver's parameter draws.
pub const SGD_STREAM: u64 = 7;

/// Euclidean projection onto `{‖x‖ ≤ R}`.
pub fn project_ball(x: &OptState, radius: f64) -> OptState {
    let nrm = x.norm();
    if nrm <= radius {
        return x.clone();
    }
    let mut c = radius / nrm;
    loop {
        let p = OptState::new(x.z.iter().map(|v| c * v).collect(), x.theta.iter().map(|v| c * v).collect());
        // Shrink past rounding so the output lies in the ball and projecting
        // again is the identity.
        if p.norm() <= radius {
            return p;
        }
        c *= 1.0 - f64::EPSILON;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum UpdateRule {
    /// `x ← x − β_k ∇`
    #[default]
    Sgd,
    /// Per-coordinate adaptive moments with bias correction; `β_k` is the
    /// learning rate.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl UpdateRule {
    pub fn adam() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Where the i.i.d. parameter draws come from.
#[derive(Debug, Clone, Copy)]
pub enum Sampler<'a> {
    /// Uniform on `[-1, 1]^s`.
    Uniform { s: usize },
    /// Uniform resampling from a frozen sample set.
    Empirical(&'a [ParamSample]),
}

impl Sampler<'_> {
    fn draw(&self, rng: &mut SampleRng) -> ParamSample {
        match self {
            Sampler::Uniform { s } => sample_y(rng, *s),
            Sampler::Empirical(set) => set[rng.random_range(0..set.len())].clone(),
        }
    }

    fn s(&self) -> Option<usize> {
        match self {
            Sampler::Uniform { s } => Some(*s),
            Sampler::Empirical(set) => set.first().map(ParamSample::dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsgdConfig {
    pub steps: StepSchedule,
    pub penalty: PenaltySchedule,
    pub n_iter: u64,
    pub radius: Option<f64>,
    pub rule: UpdateRule,
    /// Keep every `log_every`-th iteration (and the last) in the log.
    pub log_every: u64,
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterRecord {
    pub k: u64,
    pub beta: f64,
    pub lambda: f64,
    /// `f(x_k, y^k) + λ_k g(x_k, y^k)` at the drawn sample.
    pub objective: f64,
    /// `‖x_k − x_ref‖` when a reference was supplied.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyRun {
    pub x: OptState,
    pub log: Vec<IterRecord>,
    pub seed: u64,
}

/// Penalized stochastic gradient descent with one fresh sample per step.
///
/// `observer` sees `(k, x_k)` before each update and the final iterate as
/// `(n_iter, x_n)`.
#[allow(clippy::too_many_arguments)]
pub fn psgd<S: Surrogate + ?Sized>(
    data: &ProblemData,
    sur: &S,
    x0: &OptState,
    cfg: &PsgdConfig,
    sampler: Sampler<'_>,
    seed: u64,
    reference: Option<&OptState>,
    mut observer: impl FnMut(u64, &OptState),
) -> Result<PenaltyRun> {
    if cfg.n_iter == 0 {
        return Err(Error::InvalidArgument("psgd needs at least one iteration".into()));
    }
    if let Some(r) = cfg.radius {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("projection radius must be positive, got {r}")));
        }
    }
    if !cfg.steps.is_valid() || !cfg.penalty.is_valid() || cfg.log_every == 0 {
        return Err(Error::InvalidArgument("invalid step or penalty schedule or log stride".into()));
    }
    if let Sampler::Empirical(set) = sampler {
        if set.is_empty() {
            return Err(Error::InvalidArgument("empirical sampler needs samples".into()));
        }
    }
    if sampler.s() != Some(data.s()) {
        return Err(Error::DimensionMismatch {
            what: "sampler dimension",
            expected: data.s(),
            found: sampler.s().unwrap_or(0),
        });
    }
    crate::error::check_len("control", data.n_dof(), x0.z.len())?;
    crate::error::check_len("surrogate parameters", sur.param_count(), x0.theta.len())?;

    let n = data.n_dof();
    let mut rng = seeded_rng(seed, SGD_STREAM);
    let mut x = x0.to_flat();
    let mut grad = vec![0.0; x.len()];
    let mut adam_m = vec![0.0; x.len()];
    let mut adam_v = vec![0.0; x.len()];
    let mut log = Vec::with_capacity((cfg.n_iter / cfg.log_every + 1).min(1 << 20) as usize);
    let mut state = x0.clone();
    for k in 0..cfg.n_iter {
        let y = sampler.draw(&mut rng);
        let beta = cfg.steps.beta(k);
        let lambda = cfg.penalty.lambda(k, beta);
        observer(k, &state);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let terms = eval_sample(data, sur, &state, &y, lambda, Some((&mut grad, 1.0)));
        if k % cfg.log_every == 0 || k + 1 == cfg.n_iter {
            log.push(IterRecord {
                k,
                beta,
                lambda,
                objective: terms.f + lambda * terms.g,
                distance: reference.map(|r| state.distance(r)),
            });
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Divergence { iteration: k });
        }
        match cfg.rule {
            UpdateRule::Sgd => {
                for (xi, gi) in x.iter_mut().zip(&grad) {
                    *xi -= beta * gi;
                }
            }
            UpdateRule::Adam { beta1, beta2, eps } => {
                let t = (k + 1) as i32;
                let c1 = 1.0 - libm::pow(beta1, t as f64);
                let c2 = 1.0 - libm::pow(beta2, t as f64);
                for i in 0..x.len() {
                    adam_m[i] = beta1 * adam_m[i] + (1.0 - beta1) * grad[i];
                    adam_v[i] = beta2 * adam_v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = adam_m[i] / c1;
                    let v_hat = adam_v[i] / c2;
                    x[i] -= beta * m_hat / (libm::sqrt(v_hat) + eps);
                }
            }
        }
        state = OptState::from_flat(n, &x);
        if let Some(r) = cfg.radius {
            state = project_ball(&state, r);
            x = state.to_flat();
        }
        if !state.is_finite() {
            return Err(Error::Divergence { iteration: k });
        }
    }
    observer(cfg.n_iter, &state);
    Ok(PenaltyRun { x: state, log, seed })
}
